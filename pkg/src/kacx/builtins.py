"""Built-in target densities and deterministic initial configurations."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .density import DEFAULT_GRID_POINTS, DensityTable
from .equilibrium import exp_density, f_alpha
from .model import Configuration, ModelParams, SimplexPoint, t_n_map


def fig_excess_g(x_max: float = 12.0, n_points: int = DEFAULT_GRID_POINTS) -> DensityTable:
    """Two-peak rational density c1 / ((1 + (c2 x - 1)^2)(1 + (c2 x - 4)^2)).

    The constants are fixed at build time by quadrature so that the tabulated
    density has mass 1 and mean 1 on [0, x_max].
    """
    x = np.linspace(0.0, x_max, n_points)

    def raw(c2):
        return 1.0 / ((1.0 + (c2 * x - 1.0) ** 2) * (1.0 + (c2 * x - 4.0) ** 2))

    def mean_gap(c2):
        v = raw(c2)
        return np.trapezoid(x * v, x) / np.trapezoid(v, x) - 1.0

    c2 = brentq(mean_gap, 0.3, 12.0, xtol=1e-13)
    v = raw(c2)
    table = DensityTable(x, v, normalize=True)
    return table


def builtin_density(name: str, alpha: float | None = None,
                    n_points: int = DEFAULT_GRID_POINTS,
                    x_max: float | None = None) -> DensityTable:
    key = name.replace("_", "-").lower()
    if key == "equilibrium":
        if alpha is None:
            raise ValueError("equilibrium density needs alpha")
        return f_alpha(alpha, n_points=n_points, x_max=x_max)
    if key == "exp":
        return exp_density(n_points=n_points, x_max=x_max)
    if key in ("fig-excess-g", "two-peak"):
        return fig_excess_g(x_max=x_max or 12.0, n_points=n_points)
    raise ValueError(f"unknown builtin density {name!r}")


def equal_spacing_config(params: ModelParams) -> Configuration:
    """Deterministic configuration with the excess energy equally partitioned
    (every simplex coordinate 1/n).  The empirical density is the equilibrium
    limit, but all gaps are deterministic, so the gap law is a point mass."""
    n = params.n
    return t_n_map(SimplexPoint(np.full(n, 1.0 / n)), params)


def packed_block_config(params: ModelParams) -> Configuration:
    """All particles at the minimal spacing, pushed as low as energy allows:
    a block of pitch eps_tilde starting at 1 - alpha/2."""
    n = params.n
    x0 = 1.0 - 0.5 * params.alpha
    return Configuration(x0 + np.arange(n) * params.epsilon_tilde, params)


def plus_outlier_config(params: ModelParams,
                        outlier_fraction: float = 0.01) -> Configuration:
    """Minimal-pitch block at the origin plus a small high-energy group that
    carries the remaining energy (placed at minimal pitch as well)."""
    n = params.n
    et = params.epsilon_tilde
    m = max(1, int(round(outlier_fraction * n)))
    k = n - m
    block = np.arange(k) * et
    needed = n - block.sum()
    base = (needed - et * m * (m - 1) / 2.0) / m
    if base < block[-1] + 2 * et:
        raise ValueError("outlier fraction too large: groups would overlap")
    outliers = base + np.arange(m) * et
    return Configuration(np.concatenate([block, outliers]), params)


def builtin_config(name: str, params: ModelParams, **kw) -> Configuration:
    key = name.replace("_", "-").lower()
    if key in ("equal-spacing", "step-equal-spacing"):
        return equal_spacing_config(params)
    if key in ("plus-outlier", "step-plus-outlier"):
        return plus_outlier_config(params, **kw)
    if key == "packed-block":
        return packed_block_config(params)
    raise ValueError(f"unknown builtin configuration {name!r}")
