"""Quantile function, limiting equilibrium density, and the density transform suite.

The increasing function

    phi(xi) = (1 - alpha/2) * integral_0^xi w(t)/(1-t) dt + alpha*xi

maps rank fraction xi in [0,1) to energy; its inverse is the CDF of the
limiting density g = 1/phi'(phi^{-1}(x)).  With the uniform excess-energy
density w == 1 this gives the closed form

    phi(xi) = (1 - alpha/2) * log(1/(1-xi)) + alpha*xi

whose induced density is the equilibrium limit.  The transforms between a
target density g, the excess-energy density w on [0,1], the excess-energy
density h in the energy variable, and the order-statistics density psi on
[0,1] all live here, together with the exclusion factor, gap statistics, and
the entropy functional.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.stats import kstest

from .density import DEFAULT_GRID_POINTS, DensityTable

TAIL_MASS = 1e-12  # default truncation: quantile of 1 - TAIL_MASS sets x_max


def phi(xi, alpha, w: DensityTable | None = None):
    """Energy at rank fraction xi.  Closed form for w == 1, quadrature otherwise."""
    if w is not None:
        return QuantileFn(alpha, w).phi(xi)
    xi = np.asarray(xi, dtype=float)
    if np.any((xi < 0) | (xi >= 1)):
        raise ValueError("rank fraction must lie in [0, 1)")
    return -(1.0 - 0.5 * alpha) * np.log1p(-xi) + alpha * xi


def phi_prime(xi, alpha, w: DensityTable | None = None):
    if w is not None:
        return QuantileFn(alpha, w).phi_prime(xi)
    xi = np.asarray(xi, dtype=float)
    return (1.0 - 0.5 * alpha) / (1.0 - xi) + alpha


def phi_inverse(x, alpha, w: DensityTable | None = None):
    """Invert phi by bisection in s = -log(1-xi).

    Working in s keeps full relative precision on 1-xi, so the residual
    |phi(phi^{-1}(x)) - x| stays near rounding level even deep in the tail,
    where phi' is enormous.  Returns xi = 1 - e^{-s}.
    """
    if w is not None:
        return QuantileFn(alpha, w).phi_inverse(x)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("energies must be nonnegative")
    # phi in terms of s: (1 - alpha/2) s + alpha (1 - e^{-s}), increasing
    c = 1.0 - 0.5 * alpha

    def phi_s(s):
        return c * s - alpha * np.expm1(-s)

    s = phi_inverse_s(x, alpha)
    return -np.expm1(-s) if s.ndim else float(-np.expm1(-s))


def phi_from_s(s, alpha):
    """phi evaluated at xi = 1 - e^{-s}; exact deep in the tail where the
    float representation of xi itself would quantize 1 - xi."""
    s = np.asarray(s, dtype=float)
    return (1.0 - 0.5 * alpha) * s - alpha * np.expm1(-s)


def phi_inverse_s(x, alpha):
    """phi^{-1} in the variable s = -log(1 - xi), by bisection plus Newton."""
    x = np.asarray(x, dtype=float)
    c = 1.0 - 0.5 * alpha
    lo = np.zeros_like(x)
    hi = x / c + 1.0 if c > 0 else np.full_like(x, 745.0)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        too_low = phi_from_s(mid, alpha) < x
        lo = np.where(too_low, mid, lo)
        hi = np.where(too_low, hi, mid)
    s = 0.5 * (lo + hi)
    for _ in range(2):
        s = s - (phi_from_s(s, alpha) - x) / (c + alpha * np.exp(-s))
    return s


class QuantileFn:
    """phi and its inverse for a tabulated excess-energy density w on [0,1].

    The integrand w(t)/(1-t) is tabulated after the substitution
    s = -log(1-t), which removes the endpoint singularity: in the s variable
    the integrand is w(1 - e^{-s}), smooth wherever w is.
    """

    def __init__(self, alpha: float, w: DensityTable | None = None,
                 tail: float = TAIL_MASS, n_nodes: int = 65536):
        if not (0.0 <= alpha < 2.0):
            raise ValueError(f"alpha must lie in [0, 2), got {alpha}")
        self.alpha = alpha
        self.w = w
        if w is None:
            self._param = None
        else:
            s = np.linspace(0.0, -np.log(tail), n_nodes)
            t = -np.expm1(-s)
            integrand = w.pdf(t) / max(w.mass, 1e-300)
            core = np.concatenate([[0.0], cumulative_simpson(integrand, x=s)])
            self._xi = t
            self._phi = (1.0 - 0.5 * alpha) * core + alpha * t
            self._dphi = (1.0 - 0.5 * alpha) * integrand / np.maximum(1.0 - t, tail) \
                + alpha
            self._param = (self._xi, self._phi, self._dphi)

    def phi(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self._param is None:
            return -(1.0 - 0.5 * self.alpha) * np.log1p(-xi) + self.alpha * xi
        return np.interp(xi, self._xi, self._phi)

    def phi_prime(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self._param is None:
            return (1.0 - 0.5 * self.alpha) / (1.0 - xi) + self.alpha
        return np.interp(xi, self._xi, self._dphi)

    def phi_inverse(self, x):
        if self._param is None:
            return phi_inverse(x, self.alpha)
        x = np.asarray(x, dtype=float)
        return np.interp(x, self._phi, self._xi)

    @property
    def x_max(self) -> float:
        if self._param is None:
            return float(phi(1.0 - TAIL_MASS, self.alpha))
        return float(self._phi[-1])


def f_alpha(alpha: float, n_points: int = DEFAULT_GRID_POINTS,
            x_max: float | None = None, tail: float = TAIL_MASS) -> DensityTable:
    """Limiting equilibrium density for exclusion parameter alpha.

    alpha = 0 is the classical case with density e^{-x}.  The CDF is supplied
    exactly (it is phi^{-1}), so CDF-level quantities carry no quadrature error.
    """
    if not (0.0 <= alpha < 2.0):
        raise ValueError(f"alpha must lie in [0, 2), got {alpha}")
    if x_max is None:
        x_max = float(phi(1.0 - tail, alpha))
    x = np.linspace(0.0, x_max, n_points)
    xi = phi_inverse(x, alpha)
    values = 1.0 / phi_prime(xi, alpha)
    return DensityTable(x, values, cdf=xi)


def exp_density(n_points: int = DEFAULT_GRID_POINTS, x_max: float | None = None,
                tail: float = 1e-12) -> DensityTable:
    """Unit-mean exponential density with exact CDF (the alpha -> 0 equilibrium)."""
    if x_max is None:
        x_max = -np.log(tail)
    x = np.linspace(0.0, x_max, n_points)
    return DensityTable(x, np.exp(-x), cdf=-np.expm1(-x))


def w_from_g(g: DensityTable, alpha: float, n_points: int = 4097,
             xi_cut: float = 1e-4) -> DensityTable:
    """Excess-energy density on [0,1]: w(xi) = (1/g(G^{-1}) - alpha)(1-xi)/(1-alpha/2).

    Requires g < 1/alpha a.e. and mean 1; the result integrates to 1.  Near
    xi = 1 the inverse hazard (1-G)/g of a truncated table is polluted by the
    missing tail mass, so the last xi_cut stretch of rank is filled by linear
    extrapolation from the clean zone (exact when w is affine there, which
    covers light-tailed targets).
    """
    g.require_admissible(alpha)
    xi_p = g.cdf / g.mass
    with np.errstate(divide="ignore"):
        w_p = (1.0 / g.values - alpha) * (1.0 - xi_p) / (1.0 - 0.5 * alpha)
    keep = (g.values > 0) & (1.0 - xi_p > xi_cut) \
        & np.concatenate([[True], np.diff(xi_p) > 0])
    xi_p, w_p = xi_p[keep], w_p[keep]
    if len(xi_p) >= 2:  # extrapolate through the cut zone to the endpoint
        slope = (w_p[-1] - w_p[-2]) / (xi_p[-1] - xi_p[-2])
        w_end = w_p[-1] + slope * (1.0 - xi_p[-1])
        xi_p = np.concatenate([xi_p, [1.0]])
        w_p = np.concatenate([w_p, [w_end]])
    grid = np.linspace(0.0, 1.0, n_points)
    w = np.interp(grid, xi_p, w_p)
    if xi_p[0] > 0:  # g vanishing near 0: hazard limit, extend flat
        w[grid < xi_p[0]] = w_p[0]
    return DensityTable(grid, np.clip(w, 0.0, None))


def g_from_w(w: DensityTable, alpha: float, n_points: int = DEFAULT_GRID_POINTS,
             x_max: float | None = None, tail: float = TAIL_MASS) -> DensityTable:
    """Density on the half line induced by an excess-energy density on [0,1]."""
    if alpha == 0 and w.pdf(1.0) == 0:
        raise ValueError("w vanishing at 1 with alpha = 0 gives a bounded phi; "
                         "no density on the half line")
    q = QuantileFn(alpha, w, tail=tail)
    if x_max is None:
        x_max = q.x_max
    x = np.linspace(0.0, x_max, n_points)
    xi = q.phi_inverse(x)
    values = 1.0 / q.phi_prime(xi)
    return DensityTable(x, values, cdf=xi)


def h_from_g(g: DensityTable, alpha: float) -> DensityTable:
    """Excess-energy density in the energy variable:
    h(x) = (1 - alpha*g(x)) (1 - G(x)) / (1 - alpha/2)."""
    g.require_admissible(alpha)
    G = g.cdf / g.mass
    h = (1.0 - alpha * g.values) * (1.0 - G) / (1.0 - 0.5 * alpha)
    return DensityTable(g.x, np.clip(h, 0.0, None))


def psi_from_g(g: DensityTable, alpha: float):
    """Order-statistics density psi on [0,1] with CDF Psi = G o H^{-1}.

    Returns (psi_table, h_table).  The table is parametric in eta = H(x), so
    the grid is automatically dense where h is small; the CDF is supplied
    exactly as G at the same parameter values, hence integrates to 1 even when
    psi has an integrable endpoint singularity.
    """
    h = h_from_g(g, alpha)
    eta = h.cdf / h.mass
    G = g.cdf / g.mass
    # Drop nodes where h or the survivals are at rounding level: there the
    # ratio g/h is numerically meaningless.  The supplied CDF still reaches 1.
    keep = (h.values > h.values.max() * 1e-10) \
        & (1.0 - G > 1e-9) & (1.0 - eta > 1e-12) \
        & np.concatenate([[True], np.diff(eta) > 0])
    eta_k, psi_k, G_k = eta[keep], g.values[keep] / h.values[keep], G[keep]
    if eta_k[0] > 0.0:
        eta_k = np.concatenate([[0.0], eta_k])
        psi_k = np.concatenate([[psi_k[0]], psi_k])
        G_k = np.concatenate([[0.0], G_k])
    if eta_k[-1] < 1.0:
        eta_k = np.concatenate([eta_k, [1.0]])
        psi_k = np.concatenate([psi_k, [psi_k[-1]]])
        G_k = np.concatenate([G_k, [1.0]])
    return DensityTable(eta_k, psi_k, cdf=G_k), h


def psi_cdf_crosscheck(psi: DensityTable, eta_lo=0.05, eta_hi=0.95) -> float:
    """Max deviation between the stored CDF of psi and cumulative quadrature
    of its density values, away from the endpoints."""
    quad = np.concatenate([[0.0], cumulative_simpson(psi.values, x=psi.x)])
    mask = (psi.x >= eta_lo) & (psi.x <= eta_hi)
    i0 = int(np.argmax(mask))
    offset = psi.cdf[i0] - quad[i0]
    return float(np.max(np.abs((quad[mask] + offset) - psi.cdf[mask])))


def exclusion_factor(u):
    """Pi(u) = (1-u) exp(-u/(1-u)): asymptotic admissibility probability at
    local occupancy u.  Continuously extended by 0 for u >= 1."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("occupancy must be nonnegative")
    out = np.zeros_like(u)
    ok = u < 1.0 - 1e-9
    uu = u[ok]
    out[ok] = (1.0 - uu) * np.exp(-uu / (1.0 - uu))
    return out if out.ndim else float(out)


def entropy(g: DensityTable, alpha: float) -> float:
    """The Lyapunov functional integral g log(alpha*g/(1 - alpha*g)) dx.

    Finite only for admissible g (g < 1/alpha); decreases along the kinetic
    evolution and is minimized at the equilibrium density.
    """
    if alpha <= 0:
        raise ValueError("entropy functional requires alpha > 0")
    g.require_admissible(alpha)
    v = g.values
    integrand = np.zeros_like(v)
    pos = v > 1e-300
    ag = alpha * v[pos]
    integrand[pos] = v[pos] * (np.log(ag) - np.log1p(-ag))
    return float(np.trapezoid(integrand, g.x))


def gap_rate(g, alpha: float, x: float) -> float:
    """Exponential rate of the limiting scaled-gap law at energy x:
    alpha*g(x)/(1 - alpha*g(x))."""
    gx = g.pdf(x) if isinstance(g, DensityTable) else float(g(x))
    u = alpha * gx
    if u >= 1.0:
        raise ValueError("occupancy at or above the exclusion cap")
    return u / (1.0 - u)


def scaled_gaps_in_window(config, x: float, window: float) -> np.ndarray:
    """Scaled gaps (n-1)*zeta/alpha for consecutive pairs inside the window."""
    params = config.params
    e = config.energies
    lo, hi = x - 0.5 * window, x + 0.5 * window
    inside = (e >= lo) & (e <= hi)
    idx = np.nonzero(inside)[0]
    if len(idx) < 2:
        return np.empty(0)
    pairs = idx[:-1][np.diff(idx) == 1]
    zeta = e[pairs + 1] - e[pairs] - params.epsilon_tilde
    return np.clip(zeta, 0.0, None) * (params.n - 1) / params.alpha


def gap_statistics(config, x: float, window: float, g=None, alpha=None,
                   min_particles: int = 10):
    """Collect scaled gaps around x, fit an exponential rate by maximum
    likelihood, and test exponentiality with a Kolmogorov-Smirnov statistic."""
    from .model import GapSample

    configs = config if isinstance(config, (list, tuple)) else [config]
    params = configs[0].params
    gaps = np.concatenate([scaled_gaps_in_window(c, x, window) for c in configs])
    n_inside = max(
        int(((c.energies >= x - 0.5 * window) & (c.energies <= x + 0.5 * window)).sum())
        for c in configs
    )
    if n_inside < min_particles:
        raise ValueError(
            f"window around x={x} holds only {n_inside} particles "
            f"(need >= {min_particles})"
        )
    mean = float(gaps.mean())
    fitted = 1.0 / mean if mean > 0 else float("inf")
    ks = kstest(gaps, "expon", args=(0.0, mean))
    sample = GapSample(center_x=x, scaled_gaps=gaps,
                       fitted_rate=fitted,
                       ks_statistic=float(ks.statistic), ks_pvalue=float(ks.pvalue))
    if g is not None:
        a = alpha if alpha is not None else params.alpha
        sample.theory_rate = gap_rate(g, a, x)
    return sample


def xi_crossing() -> float:
    """Root of 1 - xi - exp(-2 xi) = 0: the rank at which phi is independent
    of alpha, so the mass of the equilibrium density on [0, 2*xi0] is xi0."""
    from scipy.optimize import brentq

    return float(brentq(lambda t: 1.0 - t - np.exp(-2.0 * t), 0.5, 0.99,
                        xtol=1e-14))
