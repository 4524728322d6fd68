import numpy as np
import pytest

from kacx.density import DensityTable, empirical_histogram, w1_distance


def test_table_rejects_bad_input():
    with pytest.raises(ValueError):
        DensityTable([0, 1, 2, 3], [1, -2, 1, 1])
    with pytest.raises(ValueError):
        DensityTable([0, 1, 1, 2], [1, 1, 1, 1])


def test_table_normalize_and_moments():
    x = np.linspace(0, 10, 2001)
    t = DensityTable(x, 2 * np.exp(-x), normalize=True)
    assert t.mass == pytest.approx(1.0)
    # truncated mean: (1 - 11 e^{-10}) / (1 - e^{-10})
    expected_mean = (1 - 11 * np.exp(-10)) / (1 - np.exp(-10))
    assert t.mean == pytest.approx(expected_mean, abs=1e-7)
    assert t.cdf_at(1e9) == pytest.approx(t.mass)
    assert t.quantile(0.5) == pytest.approx(
        -np.log(1 - 0.5 * (1 - np.exp(-10))), abs=1e-5)


def test_cell_averages_exact_mass():
    x = np.linspace(0, 20, 4001)
    t = DensityTable(x, np.exp(-x), cdf=-np.expm1(-x))
    edges = np.linspace(0, 12, 97)
    avg = t.cell_averages(edges)
    assert np.sum(avg * np.diff(edges)) == pytest.approx(t.cdf_at(12.0))
    mid = 0.5 * (edges[:-1] + edges[1:])
    assert np.abs(avg - np.exp(-mid) * 2 * np.sinh(np.diff(edges) / 2) / np.diff(edges)).max() < 1e-7


def test_w1_known_values():
    assert w1_distance(np.array([0.0]), np.array([1.0])) == pytest.approx(1.0)
    assert w1_distance(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    u = np.linspace(0, 1, 20001)[1:-1]
    assert w1_distance(u, np.array([0.5])) == pytest.approx(0.25, abs=1e-4)


def test_w1_metric_axioms(rng):
    samples = [np.sort(rng.standard_exponential(300)) for _ in range(6)]
    for a in samples[:3]:
        for b in samples[3:]:
            dab = w1_distance(a, b)
            assert dab >= 0
            assert dab == pytest.approx(w1_distance(b, a), abs=1e-12)
    for a, b, c in zip(samples[:2], samples[2:4], samples[4:]):
        assert w1_distance(a, c) <= w1_distance(a, b) + w1_distance(b, c) + 1e-12


def test_w1_table_vs_samples():
    x = np.linspace(0, 25, 8192)
    t = DensityTable(x, np.exp(-x), cdf=-np.expm1(-x))
    u = (np.arange(1, 100001) - 0.5) / 100000
    samples = -np.log1p(-u * t.mass)
    assert w1_distance(samples, t) < 2e-4


def test_histogram_single_point_mass():
    h = empirical_histogram([np.full(50, 1.23)], 0.2)
    assert h.counts.sum() == 50
    k = int(1.23 / 0.2)
    assert h.counts[0, k] == 50


def test_histogram_errors():
    with pytest.raises(ValueError):
        empirical_histogram([np.array([1.0])], 0.0)
    with pytest.raises(ValueError):
        empirical_histogram([], 0.1)


def test_histogram_mean_and_se(rng):
    data = [rng.standard_exponential(1000) for _ in range(100)]
    h = empirical_histogram(data, 0.5)
    target = np.exp(-h.centers) * 2 * np.sinh(0.25) / 0.5
    dev = np.abs(h.mean_density - target) / np.maximum(h.standard_error(), 1e-12)
    assert np.median(dev[h.centers < 4]) < 3
