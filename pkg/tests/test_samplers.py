import numpy as np
import pytest
from scipy import stats

from kacx.density import DensityTable, empirical_histogram
from kacx.equilibrium import exp_density, f_alpha, gap_statistics, psi_from_g
from kacx.model import Configuration, ModelParams, t_n_inverse, validate
from kacx.samplers import (DirichletSpec, RngStream, detailed_eta_map,
                           sample_detailed, sample_detailed_batch,
                           sample_dirichlet, sample_dirichlet_batch,
                           sample_flat, sample_flat_batch,
                           weights_from_density)


def _z_coordinates(energies, params):
    slack = np.empty_like(energies)
    slack[..., 0] = energies[..., 0]
    slack[..., 1:] = np.diff(energies, axis=-1) - params.epsilon_tilde
    return slack * np.arange(params.n, 0, -1) / (params.n * (1 - params.alpha / 2))


def test_flat_determinism():
    p = ModelParams(50, 1.0)
    a = sample_flat(p, RngStream(123, 4))
    b = sample_flat(p, RngStream(123, 4))
    c = sample_flat(p, RngStream(123, 5))
    assert np.array_equal(a.energies, b.energies)
    assert not np.array_equal(a.energies, c.energies)


def test_flat_simplex_moments():
    # E[z] = 1/n, Var[z] = (n-1)/(n^2(n+1)), Cov = -1/(n^2(n+1))
    n, reps = 10, 400_000
    p = ModelParams(n, 1.0)
    E = sample_flat_batch(p, RngStream(7), reps)
    z = _z_coordinates(E, p)
    var_th = (n - 1) / (n**2 * (n + 1))
    cov_th = -1 / (n**2 * (n + 1))
    se_mean = np.sqrt(var_th / reps)
    assert np.abs(z.mean(axis=0) - 1 / n).max() < 5 * se_mean
    v = z.var(axis=0, ddof=1)
    se_var = var_th * np.sqrt(2.0 / reps)  # approximate
    assert np.abs(v - var_th).max() < 8 * se_var
    c = np.cov(z[:, 2], z[:, 7])[0, 1]
    assert abs(c - cov_th) < 6 * var_th / np.sqrt(reps)


def test_flat_n2_marginal():
    p = ModelParams(2, 1.0)
    E = sample_flat_batch(p, RngStream(3), 200_000)
    x1 = E[:, 0]
    assert x1.mean() == pytest.approx((1 - 0.5) / 2, abs=3e-4)
    assert x1.max() < 0.5  # uniform on [0, 1 - alpha/2]
    assert stats.kstest(x1 / 0.5, "uniform").pvalue > 0.01


def test_all_samplers_produce_valid_configurations(fa1):
    p = ModelParams(200, 1.3)
    outs = [
        sample_flat(p, RngStream(1)),
        sample_dirichlet(DirichletSpec.flat(200, 3.0), p, RngStream(2)),
        sample_detailed(f_alpha(1.3), p, RngStream(3)),
    ]
    for c in outs:
        assert validate(c).ok


def test_dirichlet_flat_recovers_uniform():
    # K=1, w=1/n is exactly the flat Dirichlet
    n, reps = 8, 200_000
    p = ModelParams(n, 1.0)
    E = sample_dirichlet_batch(DirichletSpec.flat(n, 1.0), p, RngStream(17), reps)
    z = _z_coordinates(E, p)
    var_th = (n - 1) / (n**2 * (n + 1))
    assert abs(z.var(ddof=1) - var_th) < 5 * var_th / np.sqrt(reps * n / 2)


def test_dirichlet_concentration_scaling():
    # Var[z_j] = w(1-w)/(K n + 1)
    n, reps = 100, 50_000
    p = ModelParams(n, 1.0)
    for K in (0.5, 5.0):
        E = sample_dirichlet_batch(DirichletSpec.flat(n, K), p, RngStream(19), reps)
        z = _z_coordinates(E, p)
        var_th = (1 / n) * (1 - 1 / n) / (K * n + 1)
        measured = z.var(ddof=1)
        assert measured == pytest.approx(var_th, rel=0.05)


def test_dirichlet_large_K_concentrates():
    n = 100
    p = ModelParams(n, 1.0)
    E = sample_dirichlet_batch(DirichletSpec.flat(n, 1e6), p, RngStream(23), 50)
    z = _z_coordinates(E, p)
    assert np.abs(z - 1 / n).max() < 1 / n * 0.2
    # configuration approaches the deterministic equal-partition one
    from kacx.builtins import equal_spacing_config

    ref = equal_spacing_config(p).energies
    assert np.abs(E - ref).max() < 0.02


def test_dirichlet_small_K_few_large_gaps():
    # most simplex coordinates near zero, excess energy in few large gaps
    n = 100
    p = ModelParams(n, 1.0)
    E = sample_dirichlet_batch(DirichletSpec.flat(n, 0.02), p, RngStream(29), 200)
    z = _z_coordinates(E, p)
    frac_tiny = np.mean(z < 1e-4 / n)
    assert frac_tiny > 0.5
    top3 = np.sort(z, axis=1)[:, -3:].sum(axis=1)
    assert top3.mean() > 0.7  # a few gaps carry most of the excess energy


def test_dirichlet_degenerate_component_rejected():
    w = np.zeros(5)
    w[0] = 1.0
    p = ModelParams(5, 1.0)
    with pytest.raises(ValueError, match="degenerate"):
        sample_dirichlet_batch(DirichletSpec(w, 1.0), p, RngStream(1), 1)


def test_weights_from_density_uniform():
    xi = np.linspace(0, 1, 1025)
    w = DensityTable(xi, np.ones_like(xi), cdf=xi)
    assert np.allclose(weights_from_density(w, 4), 0.25, atol=1e-10)


def test_weights_from_density_linear():
    xi = np.linspace(0, 1, 4097)
    w = DensityTable(xi, 2 * xi, cdf=xi**2)
    assert np.allclose(weights_from_density(w, 2), [0.25, 0.75], atol=1e-8)


def test_weights_from_closed_form_excess_density(ge):
    # target e^{-x} at alpha=1 has w(xi) = 2 xi, so the rank masses are
    # ((j/n)^2 - ((j-1)/n)^2)
    from kacx.equilibrium import w_from_g

    w = w_from_g(ge, 1.0)
    n = 10
    masses = weights_from_density(w, n)
    j = np.arange(1, n + 1)
    assert np.abs(masses - ((j / n) ** 2 - ((j - 1) / n) ** 2)).max() < 1e-6


def test_detailed_equilibrium_target_is_flat(fa1):
    # psi == 1 at equilibrium, so the construction reduces to uniform spacings
    p = ModelParams(400, 1.0)
    E_det = sample_detailed_batch(fa1, p, RngStream(31), 4000)
    E_flat = sample_flat_batch(p, RngStream(33), 4000)
    ks = stats.ks_2samp(E_det[:, 200], E_flat[:, 200])
    assert ks.pvalue > 0.01
    eta_map = detailed_eta_map(fa1, 1.0)
    u = np.linspace(0.01, 0.99, 99)
    assert np.abs(eta_map(u) - u).max() < 1e-6


def test_detailed_exp_histogram(ge):
    p = ModelParams(1000, 1.0)
    E = sample_detailed_batch(ge, p, RngStream(5), 5000)
    h = empirical_histogram(list(E), 0.05)
    se = h.standard_error()
    edges = h.edges
    target = np.diff(-np.expm1(-edges)) / 0.05
    # below x ~ 0.25 the target sits at the exclusion cap (alpha*g(0) = 1) and
    # a genuine finite-n boundary layer reshapes the density by ~1%; the MC
    # noise at 5000 samples resolves it, so the bulk is held to noise level
    # and the boundary zone to an absolute 1.5% of the density scale
    mask = (h.centers > 0.25) & (h.centers < 5.0)
    dev = np.abs(h.mean_density[mask] - target[mask]) / np.maximum(se[mask], 1e-12)
    assert dev.max() < 4.5, dev.max()
    edge = h.centers <= 0.25
    assert np.abs(h.mean_density[edge] - target[edge]).max() < 0.015


def test_detailed_n2_valid(ge):
    p = ModelParams(2, 1.0)
    for k in range(50):
        c = sample_detailed(ge, p, RngStream(41, k))
        assert validate(c).ok


def test_detailed_rejects_cap_violating_target():
    x = np.linspace(0, 2, 513)
    g = DensityTable(x, 1.25 * np.exp(-4 * (x - 1.0) ** 2), normalize=False)
    p = ModelParams(100, 1.0)
    with pytest.raises(ValueError, match="cap"):
        sample_detailed(g, p, RngStream(1))


def test_flat_gap_law_matches_beta_limit(fa1):
    # scaled gaps at x are asymptotically exponential with rate
    # 2 alpha (1 - phi^{-1}(x)) / (2 - alpha) = alpha f/(1 - alpha f)
    p = ModelParams(4000, 1.0)
    configs = [Configuration(e, p)
               for e in sample_flat_batch(p, RngStream(61), 50)]
    gs = gap_statistics(configs, x=1.0, window=0.2, g=fa1, alpha=1.0)
    from kacx.equilibrium import phi_inverse

    rate_beta = 2 * 1.0 * (1 - phi_inverse(1.0, 1.0)) / (2 - 1.0)
    assert gs.theory_rate == pytest.approx(rate_beta, rel=1e-6)
    assert gs.fitted_rate == pytest.approx(rate_beta, rel=0.05)
    assert gs.ks_pvalue > 0.05


def test_dirichlet_K_gaps_not_exponential():
    # K n w bounded away from 1 gives Gamma-shaped gaps; KS must reject
    p = ModelParams(1000, 1.0)
    E = sample_dirichlet_batch(DirichletSpec.flat(1000, 5.0), p, RngStream(67), 50)
    configs = [Configuration(e, p) for e in E]
    gs = gap_statistics(configs, x=1.0, window=0.2)
    assert gs.ks_pvalue < 0.05


def test_order_statistics_moment_relations(ge):
    """Spacing moments against the order-statistics predictions.

    With eta_j the order statistics of psi-draws and z_j their spacings:
      E[z_j]   ~ E[lambda_j / psi(eta_j)]          (error o(1/n))
      Var[z_j] ~ E[(lambda_j / psi(eta_j))^2]      (error o(1/n^2))
      Cov[z_j, z_k] = O(1/n^2) and vanishing       (j, k in the bulk)
    where lambda_j are uniform spacings.  Checked as a trend over n.
    """
    alpha = 0.8
    psi, h = psi_from_g(ge, alpha)
    eta_map = detailed_eta_map(ge, alpha)
    r1 = {}
    r2 = {}
    r3 = {}
    for n, reps in ((50, 200_000), (200, 100_000), (800, 30_000)):
        gen = np.random.default_rng(100 + n)
        u = np.sort(gen.random((reps, n - 1)), axis=1)
        eta = eta_map(u)
        j = n // 2
        z_j = eta[:, j] - eta[:, j - 1]
        lam_j = u[:, j] - u[:, j - 1]
        psi_eta = psi.pdf(eta[:, j])
        pred = lam_j / psi_eta
        r1[n] = n * abs(z_j.mean() - pred.mean())
        r2[n] = n**2 * abs(z_j.var(ddof=1) - (pred**2).mean())
        k = n // 4
        z_k = eta[:, k] - eta[:, k - 1]
        r3[n] = n**2 * abs(np.cov(z_j, z_k)[0, 1])
    assert r1[800] < r1[50], r1
    assert r1[800] < 0.02
    assert r2[800] < r2[50], r2
    assert r3[800] < 1.0, r3


def test_detailed_sampler_inverse_consistency(ge):
    # the simplex point recovered from a sampled configuration matches the
    # order-statistics spacings that generated it
    p = ModelParams(50, 1.0)
    c = sample_detailed(ge, p, RngStream(71))
    z = t_n_inverse(c).z
    assert abs(z.sum() - 1) < 1e-12
    assert np.all(z >= 0)
