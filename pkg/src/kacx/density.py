"""Tabulated densities, the 1-d transport distance, and ensemble histograms.

DensityTable is the common currency for every density in the toolkit (the
equilibrium density, target densities g, the excess-energy densities on [0,1],
the order-statistics density).  The CDF is cached at construction; builders
that know the CDF in closed form pass it in, otherwise a cumulative Simpson
rule is used so that CDF-level quantities are accurate well beyond the grid's
piecewise-linear representation.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

DEFAULT_GRID_POINTS = 8192


class DensityTable:
    """Probability density sampled on a strictly increasing grid."""

    def __init__(self, x, values, cdf=None, normalize=False):
        x = np.ascontiguousarray(x, dtype=float)
        v = np.ascontiguousarray(values, dtype=float)
        if x.ndim != 1 or v.shape != x.shape or len(x) < 4:
            raise ValueError("grid and values must be matching 1-d arrays (>= 4 points)")
        if np.any(np.diff(x) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(v < 0):
            worst = float(v.min())
            if worst < -1e-12 * max(1.0, float(np.abs(v).max())):
                raise ValueError(f"density has negative values (min {worst:.3e})")
            v = np.clip(v, 0.0, None)
        if cdf is None:
            cdf = np.concatenate([[0.0], cumulative_simpson(v, x=x)])
        else:
            cdf = np.ascontiguousarray(cdf, dtype=float)
            if cdf.shape != x.shape:
                raise ValueError("cdf must match the grid")
        mass = float(cdf[-1])
        if normalize:
            if mass <= 0:
                raise ValueError("cannot normalize a zero-mass table")
            v = v / mass
            cdf = cdf / mass
            mass = 1.0
        cdf = np.maximum.accumulate(cdf)  # guard tiny non-monotonicity from rounding
        self.x = x
        self.values = v
        self.cdf = cdf
        self.mass = mass
        self.mean = float(simpson(x * v, x=x))
        self._cdf_spline = None
        for arr in (self.x, self.values, self.cdf):
            arr.setflags(write=False)

    # -- evaluation ---------------------------------------------------------

    def pdf(self, x):
        return np.interp(x, self.x, self.values, left=0.0, right=0.0)

    def cdf_at(self, x):
        # monotone cubic through the stored CDF: keeps node values exact and
        # cuts the between-node error to fourth order, which matters when
        # differences of nearby CDF values are taken (cell averaging)
        if self._cdf_spline is None:
            from scipy.interpolate import PchipInterpolator

            self._cdf_spline = PchipInterpolator(self.x, self.cdf,
                                                 extrapolate=False)
        out = self._cdf_spline(np.asarray(x, dtype=float))
        out = np.where(np.asarray(x, dtype=float) <= self.x[0], 0.0, out)
        out = np.where(np.asarray(x, dtype=float) >= self.x[-1], self.cdf[-1], out)
        return out if out.ndim else float(out)

    def quantile(self, u):
        """Inverse CDF; flat stretches resolve to their left edge."""
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u > self.mass * (1 + 1e-12))):
            raise ValueError("quantile argument outside [0, mass]")
        return np.interp(u, self.cdf, self.x)

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    def admissible(self, alpha: float, slack: float = 0.0) -> bool:
        """Whether the density respects the exclusion cap: max g <= 1/alpha - slack."""
        if alpha <= 0:
            return True
        return self.max_value <= 1.0 / alpha - slack

    def require_admissible(self, alpha: float):
        if not self.admissible(alpha):
            raise ValueError(
                f"density exceeds the exclusion cap 1/alpha = {1.0 / alpha:.6g} "
                f"(max value {self.max_value:.6g})"
            )

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_function(cls, fn, x_min=0.0, x_max=1.0, n=DEFAULT_GRID_POINTS,
                      cdf_fn=None, normalize=False):
        x = np.linspace(x_min, x_max, n)
        cdf = cdf_fn(x) if cdf_fn is not None else None
        return cls(x, fn(x), cdf=cdf, normalize=normalize)

    def resampled(self, grid) -> "DensityTable":
        grid = np.asarray(grid, dtype=float)
        return DensityTable(grid, self.pdf(grid), cdf=self.cdf_at(grid))

    def cell_averages(self, edges) -> np.ndarray:
        """Mean density over each cell [edges[k], edges[k+1]], from the cached CDF."""
        edges = np.asarray(edges, dtype=float)
        masses = np.diff(self.cdf_at(edges))
        return masses / np.diff(edges)


def w1_distance(mu, nu) -> float:
    """Kantorovich-Rubinstein distance between two measures on the half line.

    In one dimension this is the L1 distance between the CDFs.  Arguments may
    be sample vectors (empirical measures), DensityTable instances, or
    (edges, masses) histogram pairs; any mix is accepted.

    Empirical CDFs are right-continuous steps, so each segment between merged
    breakpoints is integrated from its one-sided limits: the value just after
    the left breakpoint and just before the right one.  Steps are then exact;
    continuous CDFs (linear between their nodes) are exact as well.
    """
    grid = np.union1d(_breakpoints(mu), _breakpoints(nu))
    if len(grid) < 2:
        return 0.0
    a1, b1 = _segment_limits(mu, grid)
    a2, b2 = _segment_limits(nu, grid)
    a = a1 - a2
    b = b1 - b2
    dx = np.diff(grid)
    seg = np.where(
        a * b >= 0,
        0.5 * (np.abs(a) + np.abs(b)),
        0.5 * (a * a + b * b) / np.maximum(np.abs(a) + np.abs(b), 1e-300),
    )
    return float(np.sum(seg * dx))


def _breakpoints(m):
    if isinstance(m, DensityTable):
        return m.x
    if isinstance(m, tuple) and len(m) == 2:
        return np.asarray(m[0], dtype=float)
    return np.asarray(m, dtype=float)


def _segment_limits(m, grid):
    """Normalized CDF values on each open segment (grid_k, grid_{k+1}):
    (right limit at the left end, left limit at the right end)."""
    if isinstance(m, DensityTable):
        f = np.interp(grid, m.x, m.cdf / m.mass, left=0.0, right=1.0)
        return f[:-1], f[1:]
    if isinstance(m, tuple) and len(m) == 2:
        edges, masses = (np.asarray(a, dtype=float) for a in m)
        cdf = np.concatenate([[0.0], np.cumsum(masses)])
        f = np.interp(grid, edges, cdf / cdf[-1], left=0.0, right=1.0)
        return f[:-1], f[1:]
    xs = np.sort(np.asarray(m, dtype=float))
    n = len(xs)
    after = np.searchsorted(xs, grid[:-1], side="right") / n
    before = np.searchsorted(xs, grid[1:], side="left") / n
    return after, before


class EnsembleHistogram:
    """Mean histogram of an ensemble of configurations, as a density.

    Keeps the per-bin distribution of counts across the ensemble so that the
    spread of individual outcomes around the mean can be reported and plotted.
    """

    def __init__(self, edges, mean_density, counts):
        self.edges = np.asarray(edges, dtype=float)
        self.mean_density = np.asarray(mean_density, dtype=float)
        self.counts = np.asarray(counts)  # shape (n_samples, n_bins)

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def standard_error(self):
        """Monte Carlo standard error of the mean density, per bin."""
        n_samples, _ = self.counts.shape
        per_sample = self.counts / self._norm
        return per_sample.std(axis=0, ddof=1) / np.sqrt(n_samples)

    @property
    def _norm(self):
        bin_w = np.diff(self.edges)
        n_particles = self.counts.sum(axis=1, keepdims=True)
        return n_particles * bin_w

    def as_measure(self):
        masses = self.mean_density * np.diff(self.edges)
        return (self.edges, masses / masses.sum())


def empirical_histogram(configs, bin_width, x_max=None) -> EnsembleHistogram:
    """Bin an ensemble of configurations (or plain energy vectors)."""
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    arrays = [np.asarray(getattr(c, "energies", c), dtype=float) for c in configs]
    if not arrays:
        raise ValueError("empty ensemble")
    top = x_max if x_max is not None else max(float(a.max()) for a in arrays)
    n_bins = max(1, int(np.ceil(top / bin_width + 1e-9)))
    edges = np.arange(n_bins + 1) * bin_width
    counts = np.stack([np.histogram(a, bins=edges)[0] for a in arrays])
    n_particles = np.array([len(a) for a in arrays])[:, None]
    mean_density = (counts / (n_particles * bin_width)).mean(axis=0)
    return EnsembleHistogram(edges, mean_density, counts)
