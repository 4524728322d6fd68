"""Samplers for chaotic and detailed-chaotic initial configurations.

Three constructions, all routed through the simplex parameterization:

* flat: uniform on the simplex (the equilibrium measure), via normalized
  standard-exponential variates;
* Dirichlet: weights w_j scaled by a concentration K; same limiting density
  for any K, but the gap law is Gamma-shaped rather than exponential unless
  the parameters tend to 1;
* detailed: order statistics of n-1 i.i.d. draws from the density psi derived
  from a target g, which produces the exponential scaled-gap law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import DensityTable
from .equilibrium import h_from_g
from .model import Configuration, ModelParams, t_n_map_batch


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream: identical (seed, stream) gives identical bits."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        )


@dataclass(frozen=True)
class DirichletSpec:
    """Weights over particle ranks plus a common concentration multiplier."""

    weights: np.ndarray
    concentration_K: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12 * len(w):
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        if not self.concentration_K > 0:
            raise ValueError("concentration K must be positive")

    @classmethod
    def flat(cls, n: int, K: float = 1.0) -> "DirichletSpec":
        return cls(np.full(n, 1.0 / n), K)


def _to_config(row: np.ndarray, params: ModelParams) -> Configuration:
    return Configuration(row, params)


def sample_flat_batch(params: ModelParams, rng, size: int) -> np.ndarray:
    """size configurations from the uniform measure, as rows of sorted energies.

    Uniform simplex points are generated as normalized standard exponentials
    (equivalently, spacings of uniform order statistics).
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    e = gen.standard_exponential((size, params.n))
    z = e / e.sum(axis=1, keepdims=True)
    return t_n_map_batch(z, params)


def sample_flat(params: ModelParams, rng: RngStream) -> Configuration:
    """One configuration from the uniform (equilibrium) measure."""
    return _to_config(sample_flat_batch(params, rng, 1)[0], params)


def sample_dirichlet_batch(spec: DirichletSpec, params: ModelParams, rng,
                           size: int) -> np.ndarray:
    """size configurations with simplex coordinates ~ Dirichlet(K * n * w)."""
    if len(spec.weights) != params.n:
        raise ValueError(f"spec has {len(spec.weights)} weights, params.n = {params.n}")
    shape = spec.concentration_K * params.n * spec.weights
    if np.any(shape == 0):
        raise ValueError("degenerate Dirichlet component: K*n*w_j = 0")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    g = gen.standard_gamma(shape, size=(size, params.n))
    z = g / g.sum(axis=1, keepdims=True)
    return t_n_map_batch(z, params)


def sample_dirichlet(spec: DirichletSpec, params: ModelParams,
                     rng: RngStream) -> Configuration:
    return _to_config(sample_dirichlet_batch(spec, params, rng, 1)[0], params)


def weights_from_density(w: DensityTable, n: int) -> np.ndarray:
    """Rank weights w_j = integral of w over ((j-1)/n, j/n]."""
    if np.any(w.values < 0):
        raise ValueError("density must be nonnegative")
    edges = np.linspace(0.0, 1.0, n + 1)
    masses = np.diff(w.cdf_at(edges)) / w.mass
    return masses / masses.sum()


def detailed_eta_map(g: DensityTable, alpha: float):
    """The map u -> H(G^{-1}(u)) pushing Uniform(0,1) to the order-statistics
    density psi (its CDF is G o H^{-1}, so the inverse CDF is H o G^{-1})."""
    g.require_admissible(alpha)
    h = h_from_g(g, alpha)
    G = g.cdf / g.mass
    H = h.cdf / h.mass

    def eta_of_uniform(u):
        x = np.interp(u, G, g.x)   # G^{-1}
        return np.interp(x, h.x, H)

    return eta_of_uniform


def sample_detailed_batch(g: DensityTable, params: ModelParams, rng,
                          size: int) -> np.ndarray:
    """size configurations from the order-statistics construction for target g.

    eta_j are the order statistics of n-1 i.i.d. psi-draws (obtained by mapping
    uniform order statistics through H o G^{-1}); the simplex coordinates are
    their spacings.
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    eta_map = detailed_eta_map(g, params.alpha)
    n = params.n
    u = np.sort(gen.random((size, n - 1)), axis=1)
    eta = eta_map(u)
    z = np.diff(eta, axis=1, prepend=0.0, append=1.0)
    z = np.clip(z, 0.0, None)
    z /= z.sum(axis=1, keepdims=True)
    return t_n_map_batch(z, params)


def sample_detailed(g: DensityTable, params: ModelParams,
                    rng: RngStream) -> Configuration:
    return _to_config(sample_detailed_batch(g, params, rng, 1)[0], params)
