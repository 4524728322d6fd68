"""Core domain types: scaled exclusion configurations and the simplex parameterization.

Everything works in rescaled variables: n particles with energies x_j >= 0,
sum x_j = n, and |x_j - x_k| >= eps_tilde = alpha/(n-1) for all pairs.
The map ``t_n_map`` parameterizes the ordered configurations by the standard
simplex, distributing the excess energy n(1 - alpha/2) over the gaps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Tolerances for the float-valued invariants.  The exclusion constraint is
# tested non-strictly (gap >= eps_tilde - GAP_TOL): equality is a measure-zero
# boundary and strictness cannot survive rounding.
GAP_TOL = 1e-12
SUM_RTOL = 1e-9
SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Particle count n and exclusion parameter alpha; eps_tilde = alpha/(n-1)."""

    n: int
    alpha: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need n >= 2, got n={self.n}")
        if not (0.0 < self.alpha < 2.0):
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")

    @property
    def epsilon_tilde(self) -> float:
        return self.alpha / (self.n - 1)

    @property
    def excess_energy(self) -> float:
        """Total energy above the minimum the exclusion rule allows: n(1 - alpha/2)."""
        return self.n * (1.0 - 0.5 * self.alpha)


@dataclass(frozen=True)
class SimplexPoint:
    """Point of the standard simplex: z >= 0, sum z = 1."""

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        object.__setattr__(self, "z", z)
        if z.ndim != 1 or len(z) < 2:
            raise ValueError("simplex point must be a 1-d vector of length >= 2")
        if np.any(z < 0):
            raise ValueError("simplex coordinates must be nonnegative")
        if abs(z.sum() - 1.0) > SIMPLEX_TOL * max(1.0, len(z)):
            raise ValueError(f"simplex coordinates must sum to 1, got {z.sum()!r}")

    def __len__(self):
        return len(self.z)


@dataclass(frozen=True)
class Configuration:
    """Sorted vector of n scaled energies on the exclusion simplex."""

    energies: np.ndarray
    params: ModelParams

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        object.__setattr__(self, "energies", e)
        if len(e) != self.params.n:
            raise ValueError(f"expected {self.params.n} energies, got {len(e)}")

    @property
    def gaps(self) -> np.ndarray:
        """Consecutive sorted differences minus eps_tilde (slack beyond the minimum)."""
        return np.diff(self.energies) - self.params.epsilon_tilde


@dataclass
class GapSample:
    """Scaled gaps (n-1)*zeta/alpha collected in an energy window around center_x."""

    center_x: float
    scaled_gaps: np.ndarray
    fitted_rate: float = float("nan")
    theory_rate: float = float("nan")
    ks_statistic: float = float("nan")
    ks_pvalue: float = float("nan")
    extra: dict = field(default_factory=dict)


def t_n_map(z: SimplexPoint, params: ModelParams) -> Configuration:
    """Map a simplex point to the ordered exclusion configuration.

    x_j = n(1-alpha/2) * (z_1/n + z_2/(n-1) + ... + z_j/(n+1-j)) + (j-1)*alpha/(n-1).
    The image satisfies all configuration invariants by construction: each
    consecutive gap is n(1-alpha/2) z_j/(n+1-j) + eps_tilde >= eps_tilde.
    """
    n = params.n
    if len(z) != n:
        raise ValueError(f"simplex point has length {len(z)}, params.n = {n}")
    denom = np.arange(n, 0, -1, dtype=float)  # n, n-1, ..., 1
    increments = params.excess_energy * z.z / denom
    x = np.cumsum(increments) + np.arange(n) * params.epsilon_tilde
    return Configuration(x, params)


def t_n_map_batch(zs: np.ndarray, params: ModelParams) -> np.ndarray:
    """Vectorized t_n_map over rows of zs (each row a simplex point)."""
    n = params.n
    zs = np.asarray(zs, dtype=float)
    if zs.shape[-1] != n:
        raise ValueError(f"rows have length {zs.shape[-1]}, params.n = {n}")
    denom = np.arange(n, 0, -1, dtype=float)
    return np.cumsum(params.excess_energy * zs / denom, axis=-1) \
        + np.arange(n) * params.epsilon_tilde


def t_n_inverse(config: Configuration) -> SimplexPoint:
    """Invert t_n_map: z_j = ((n+1-j)/n) * (1/(1-alpha/2)) * slack_j.

    slack_1 = x_1 and slack_j = x_j - x_{j-1} - eps_tilde for j > 1.
    Raises if the configuration violates the exclusion constraint.
    """
    params = config.params
    n = params.n
    x = config.energies
    slack = np.empty(n)
    slack[0] = x[0]
    slack[1:] = np.diff(x) - params.epsilon_tilde
    if np.any(slack[1:] < -GAP_TOL):
        worst = int(np.argmin(slack[1:])) + 1
        raise ValueError(
            f"configuration violates exclusion at index {worst}: "
            f"gap deficit {-slack[worst]:.3e}"
        )
    z = np.clip(slack, 0.0, None) * np.arange(n, 0, -1) / (n * (1.0 - 0.5 * params.alpha))
    s = z.sum()
    if abs(s - 1.0) > 1e-7:
        raise ValueError(f"inverse does not land on the simplex (sum z = {s!r})")
    return SimplexPoint(z / s)


@dataclass
class ValidationReport:
    """Per-invariant diagnostics for a configuration."""

    sorted_ok: bool
    nonnegative_ok: bool
    sum_ok: bool
    exclusion_ok: bool
    interval_count_ok: bool
    sum_error: float
    worst_gap_index: int
    worst_gap_deficit: float
    min_energy: float

    @property
    def ok(self) -> bool:
        return (self.sorted_ok and self.nonnegative_ok and self.sum_ok
                and self.exclusion_ok and self.interval_count_ok)

    def summary(self) -> str:
        checks = [
            ("sorted", self.sorted_ok),
            ("nonnegative", self.nonnegative_ok),
            (f"sum (err {self.sum_error:.2e})", self.sum_ok),
            (f"exclusion (worst deficit {self.worst_gap_deficit:.2e} "
             f"at {self.worst_gap_index})", self.exclusion_ok),
            ("interval-count bound", self.interval_count_ok),
        ]
        return "; ".join(f"{name}: {'ok' if ok else 'FAIL'}" for name, ok in checks)


def validate(config: Configuration) -> ValidationReport:
    """Check every configuration invariant, reporting the worst offender."""
    params = config.params
    x = config.energies
    n = params.n
    et = params.epsilon_tilde

    diffs = np.diff(x)
    sorted_ok = bool(np.all(diffs >= -GAP_TOL))
    nonneg_ok = bool(np.all(x >= -GAP_TOL))
    sum_error = abs(float(x.sum()) - n)
    sum_ok = sum_error <= SUM_RTOL * n

    slack = diffs - et
    if len(slack):
        worst = int(np.argmin(slack))
        worst_deficit = max(0.0, -float(slack[worst]))
    else:
        worst, worst_deficit = 0, 0.0
    exclusion_ok = bool(np.all(slack >= -GAP_TOL))

    # (j-i) * eps_tilde <= x_j - x_i for all i < j.  With sorted energies it is
    # enough to check consecutive pairs, which the exclusion check covers, but a
    # direct check over a stride sample guards against accumulation artifacts.
    interval_ok = exclusion_ok and sorted_ok
    if interval_ok and n > 2:
        for stride in (2, max(2, n // 7), n - 1):
            if stride >= n:
                continue
            lhs = stride * et
            gaps = x[stride:] - x[:-stride]
            if np.any(gaps < lhs - GAP_TOL * stride):
                interval_ok = False
                break

    return ValidationReport(
        sorted_ok=sorted_ok,
        nonnegative_ok=nonneg_ok,
        sum_ok=sum_ok,
        exclusion_ok=exclusion_ok,
        interval_count_ok=interval_ok,
        sum_error=sum_error,
        worst_gap_index=worst + 1,
        worst_gap_deficit=worst_deficit,
        min_energy=float(x.min()) if len(x) else 0.0,
    )
