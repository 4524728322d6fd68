import numpy as np
import pytest

from kacx.builtins import fig_excess_g
from kacx.density import DensityTable
from kacx.equilibrium import exp_density, f_alpha
from kacx.kinetic import (KineticState, StepRejected, collision_operator,
                          collision_oracle, leakage_rate, solve, stable_dt,
                          time_step, weak_moment)


def _uniform02(alpha=0.5, n=512):
    x = np.linspace(0, 2.0, 4097)
    tab = DensityTable(x, np.full_like(x, 0.5), cdf=0.5 * x)
    return KineticState.from_density(tab, alpha, n_points=n, x_max=12.0)


def test_from_density_cell_averages(fa1):
    ks = KineticState.from_density(fa1, 1.0, n_points=256, x_max=12.0)
    assert ks.mass() == pytest.approx(1.0, abs=1e-12)
    assert ks.energy() == pytest.approx(1.0, abs=1e-6)
    assert ks.g.max() < 1.0  # admissible


def test_conservation_machine_exact(fa1):
    for state in (_uniform02(), KineticState.from_density(fa1, 1.0),
                  KineticState.from_density(fig_excess_g(), 1.0)):
        q = collision_operator(state)
        assert abs(q.sum() * state.dx) < 1e-12
        assert abs((state.grid * q).sum() * state.dx) < 1e-12


def test_equilibrium_is_stationary(fa1):
    ks = KineticState.from_density(fa1, 1.0, n_points=512, x_max=12.0)
    assert np.abs(collision_operator(ks)).max() < 1e-5


def test_stationarity_sharpens_under_refinement(fa1):
    norms = {}
    for n in (512, 2048):
        ks = KineticState.from_density(fa1, 1.0, n_points=n, x_max=12.0)
        norms[n] = np.abs(collision_operator(ks)).max()
    assert norms[512] / norms[2048] >= 4.0


def test_classical_exponential_stationary():
    tab = exp_density(x_max=12.0)
    ks = KineticState.from_density(tab, 0.5, n_points=512, x_max=12.0)
    q = collision_operator(ks, with_pi=False)
    assert np.abs(q).max() < 1e-9


def test_uniform_is_not_stationary():
    ks = _uniform02()
    q = collision_operator(ks)
    assert np.abs(q).max() > 0.01
    assert abs(q.sum() * ks.dx) < 1e-8
    assert abs((ks.grid * q).sum() * ks.dx) < 1e-8


def test_oracle_agrees_with_convolution_form():
    ks = _uniform02()
    xs = np.array([0.3, 0.9, 1.7, 3.0, 5.0])
    q_main = np.interp(xs, ks.grid, collision_operator(ks))
    q_oracle = collision_oracle(ks, xs, n_y=2000, n_xi=401)
    assert np.abs(q_main - q_oracle).max() < 1e-4


def test_oracle_agrees_for_smooth_density():
    tab = fig_excess_g()
    ks = KineticState.from_density(tab, 1.0, n_points=1024, x_max=12.0)
    xs = np.array([0.5, 1.0, 2.0, 4.0])
    q_main = np.interp(xs, ks.grid, collision_operator(ks))
    q_oracle = collision_oracle(ks, xs, n_y=3000, n_xi=601)
    assert np.abs(q_main - q_oracle).max() < 5e-4


def test_weak_form_two_routes():
    ks = _uniform02()
    grid = ks.grid
    for h, expect_zero in ((np.ones_like(grid), True), (grid, True),
                           (grid**2, False)):
        d = weak_moment(ks, h, "direct")
        s = weak_moment(ks, h, "symmetrized")
        assert abs(d - s) < 1e-7
        if expect_zero:
            assert abs(d) < 1e-10
        else:
            assert abs(d) > 1e-3


def test_detailed_balance_integrand_vanishes(fa1):
    # not only Q[f_alpha] but the whole integrand vanishes at equilibrium
    from kacx.kinetic import _pi_of

    ks = KineticState.from_density(fa1, 1.0, n_points=512, x_max=12.0)
    g = ks.g
    p = _pi_of(ks)
    worst = 0.0
    scale = 0.0
    for m in (64, 200, 380):
        i = np.arange(m)
        gain = np.outer(g[i] * g[m - 1 - i], p[i] * p[m - 1 - i])
        loss = gain.T
        worst = max(worst, np.abs(gain - loss).max())
        scale = max(scale, gain.max())
    # the cell-averaged representation deviates from pointwise detailed
    # balance at the dx^2 level
    assert worst < 1e-3 * scale


def test_cap_contact_is_an_error():
    x = np.linspace(0, 2, 4097)
    tab = DensityTable(x, np.full_like(x, 0.5), cdf=0.5 * x)
    state = KineticState(np.linspace(0.01, 2, 200), np.full(200, 0.55), 1.999)
    with pytest.raises(ValueError):
        collision_operator(state)


def test_time_step_identity_at_zero_dt(fa1):
    ks = KineticState.from_density(fa1, 1.0)
    out = time_step(ks, 0.0)
    assert np.array_equal(out.g, ks.g)
    assert out.time == ks.time


def test_time_step_conserves_and_relaxes():
    ks = _uniform02(alpha=0.5)
    s0 = ks.entropy()
    out = ks
    for _ in range(40):
        out = time_step(out, 0.05)
        assert out.mass() == pytest.approx(1.0, abs=1e-10)
        assert out.energy() == pytest.approx(ks.energy(), abs=1e-8)
        s1 = out.entropy()
        assert s1 <= s0 + 1e-10
        s0 = s1
    assert out.diagnostics["projection"] < 1e-9


def test_time_step_near_stationary_point(fa1):
    ks = KineticState.from_density(fa1, 1.0, n_points=512)
    out = time_step(ks, 0.02)
    assert np.abs(out.g - ks.g).max() < 1e-5 * 0.02 * 10


def test_step_rejection_suggests_halving():
    ks = _uniform02()
    with pytest.raises(StepRejected) as err:
        time_step(ks, 50.0)
    assert err.value.suggested_dt == 25.0


def test_stable_dt_positive():
    assert 0 < stable_dt(_uniform02()) < 10.0


def test_solve_snapshot_times_exact():
    traj = solve(fig_excess_g(), 1.0, t_end=0.4, dt=0.03,
                 snapshot_times=[0.1, 0.25, 0.4], n_points=128)
    assert list(traj.times) == [0.0, 0.1, 0.25, 0.4]
    assert np.abs(traj.mass - 1).max() < 1e-9
    assert np.abs(traj.energy - traj.energy[0]).max() < 1e-8


def test_solve_from_equilibrium_stays_put(fa1):
    traj = solve(fa1, 1.0, t_end=1.0, dt=0.05, n_points=256)
    from kacx.density import w1_distance

    d = w1_distance(traj.states[-1].as_table(), traj.states[0].as_table())
    assert d < 5e-5


def test_solve_relaxes_to_equilibrium(fa1):
    traj = solve(fig_excess_g(), 1.0, t_end=10.0, dt=0.05, n_points=256)
    from kacx.density import w1_distance

    d_end = w1_distance(traj.states[-1].as_table(), fa1)
    d_start = w1_distance(traj.states[0].as_table(), fa1)
    assert d_end < 0.02
    assert d_end < 0.15 * d_start
    assert np.all(np.diff(traj.entropy) <= 1e-10)
    assert traj.q_norm[-1] < 0.05 * traj.q_norm[0]


def test_entropy_dissipation_sign(fa1):
    # for S = integral g log(alpha g/(1-alpha g)), the dissipation is
    # dS/dt = integral Q * [log(alpha g/(1-alpha g)) + alpha g/(1-alpha g)]
    # (the mass moment of Q drops out); nonpositive, and at rounding level
    # only at the equilibrium density
    for state, near_zero in ((KineticState.from_density(fa1, 1.0), True),
                             (_uniform02(1.0), False),
                             (KineticState.from_density(fig_excess_g(), 1.0),
                              False)):
        g = np.maximum(state.g, 1e-14)
        ag = state.alpha * g
        q = collision_operator(state)
        ds = float((q * (np.log(ag / (1 - ag)) + ag / (1 - ag))).sum()
                   * state.dx)
        assert ds < 1e-12
        if near_zero:
            assert abs(ds) < 1e-8
        else:
            assert ds < -1e-4


def test_leakage_small_for_concentrated_densities(fa1):
    assert leakage_rate(KineticState.from_density(fa1, 1.0)) < 1e-7
    assert leakage_rate(_uniform02()) < 1e-15  # support [0,2], no pairs beyond 12
