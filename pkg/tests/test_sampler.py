import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpplog.kernels import DegenerateIntensityError, HermiteKernel, SineKernel, Window
from dpplog.montecarlo import mean_estimate, variance_estimate
from dpplog.palm import palm_kernel
from dpplog.quadrature import composite_gauss_legendre
from dpplog.sampler import (CampbellSample, CampbellSampler, Configuration, EigenError,
                            SpectralSampler, count_in, discretize, empirical_intensity,
                            sample_campbell, sample_dpp, sample_palm, spectral_sampler)

SINE = SineKernel(Window(-10, 10))


def test_configuration_invariants():
    X = Configuration([3.0, -1.0, 2.0])
    assert list(X) == [-1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        Configuration([1.0, 1.0])
    with pytest.raises(ValueError):
        Configuration([np.nan])
    with pytest.raises(ValueError):
        X.points[0] = 5.0
    assert len(X.without(2.0)) == 2


def test_campbell_sample_convention():
    with pytest.raises(ValueError):
        CampbellSample(0.5, Configuration([0.5, 1.0]), 1.0)


def test_discretize_sine_trace():
    d = discretize(SINE, 200)
    assert d.trace == pytest.approx(20.0, abs=1e-3)
    assert d.expected_count == pytest.approx(d.trace, abs=1e-8)
    assert np.max(np.abs(d.matrix - d.matrix.T)) < 1e-12
    assert abs(discretize(SINE, 400).trace - d.trace) < 1e-8


def test_discretize_hermite_rank():
    d = discretize(HermiteKernel(4, Window(-8, 8)), 200)
    top = d.eigenvalues[d.eigenvalues > 0.5]
    assert top.size == 4
    assert np.allclose(top, 1.0, atol=1e-6)


def test_discretize_palm_kernel_spectrum():
    pk = palm_kernel(HermiteKernel(5), [0.4])
    d = discretize(pk, 400)
    assert d.eigenvalues.min() >= 0 and d.eigenvalues.max() <= 1
    assert np.sum(d.eigenvalues > 0.5) == 4


def test_non_contraction_rejected():
    class Doubled(SineKernel):
        def matrix(self, x, y=None):
            return 2 * super().matrix(x, y)

    with pytest.raises(EigenError):
        discretize(Doubled(Window(-5, 5)), 100)


def test_hermite_cardinality():
    rng = np.random.default_rng(1)
    d = discretize(HermiteKernel(3), 200)
    assert all(len(sample_dpp(d, rng)) == 3 for _ in range(200))
    assert all(len(sample_palm(HermiteKernel(3), [0.0], rng=rng)) == 2 for _ in range(200))
    assert all(len(sample_palm(HermiteKernel(5), [0.0, 1.0], rng=rng)) == 3 for _ in range(100))


def test_determinism():
    d = discretize(SINE, 200)
    a = [sample_dpp(d, np.random.default_rng(7)).points for _ in range(3)]
    assert all(np.array_equal(a[0], x) for x in a)


def test_sine_unit_window_count_moments():
    k = SineKernel(Window(0, 1))
    sp = SpectralSampler(discretize(k, 200))
    rng = np.random.default_rng(11)
    counts = np.array([len(sp.sample(rng)) for _ in range(10000)])
    m = mean_estimate(counts)
    assert abs(m.value - 1.0) < 3 * m.stderr
    q = composite_gauss_legendre(0, 1, n_panels=4, order=16)
    K2 = k.matrix(q.nodes) ** 2
    oracle = 1.0 - q.weights @ K2 @ q.weights
    v = variance_estimate(counts)
    assert abs(v.value - oracle) < 3 * v.stderr


def test_points_inside_window_and_sorted():
    rng = np.random.default_rng(3)
    X = sample_dpp(discretize(SINE, 200), rng)
    assert np.all(np.diff(X.points) > 0)
    assert X.points.min() >= -10 and X.points.max() <= 10


def test_palm_without_anchors_is_plain_sampler():
    sp = spectral_sampler(SINE, 200)
    a = sp.sample_palm([], np.random.default_rng(5)).points
    b = sp.sample(np.random.default_rng(5)).points
    assert np.array_equal(a, b)


def test_palm_hole_at_anchor():
    rng = np.random.default_rng(2)
    sp = spectral_sampler(SINE, 400, (0.0,))
    samples = [sp.sample_palm([0.0], rng) for _ in range(4000)]
    edges = np.array([-0.6, -0.3, -0.1, 0.1, 0.3, 0.6])
    h = empirical_intensity(samples, edges)
    assert h.density[2] < 0.05
    assert h.density[2] < h.density[1] < 1 and h.density[2] < h.density[3]


def test_palm_degenerate_anchor():
    k = HermiteKernel(1, Window(-60, 60))
    with pytest.raises(DegenerateIntensityError):
        sample_palm(k, [50.0], n_nodes=400, rng=0)


def test_campbell_uniform_anchor_for_sine():
    rng = np.random.default_rng(4)
    ind = lambda a: ((a >= 0) & (a <= 1)).astype(float)
    cs = CampbellSampler(SINE, ind, support=(0, 1))
    assert cs.normalizer == pytest.approx(1.0, abs=1e-12)
    anchors = np.array([cs.draw_anchor(rng) for _ in range(4000)])
    assert anchors.min() >= 0 and anchors.max() <= 1
    assert abs(anchors.mean() - 0.5) < 3 * anchors.std() / np.sqrt(anchors.size)
    s = sample_campbell(SINE, ind, rng=rng, support=(0, 1))
    assert s.anchor not in s.config.points


def test_campbell_hermite_anchor_histogram():
    k = HermiteKernel(2)
    rng = np.random.default_rng(9)
    cs = CampbellSampler(k, lambda a: np.ones_like(a))
    anchors = np.array([cs.draw_anchor(rng) for _ in range(5000)])
    edges = np.linspace(-3, 3, 9)
    counts, _ = np.histogram(anchors, edges)
    p = counts / anchors.size
    for lo, hi, pi in zip(edges[:-1], edges[1:], p):
        q = composite_gauss_legendre(lo, hi, n_panels=2, order=10)
        exact = q.integrate(k.diag(q.nodes)) / cs.normalizer
        assert abs(pi - exact) < 3 * np.sqrt(exact * (1 - exact) / anchors.size) + 1e-12
    assert cs.normalizer == pytest.approx(2.0, abs=1e-10)


def test_campbell_degenerate():
    with pytest.raises(DegenerateIntensityError):
        CampbellSampler(SINE, lambda a: np.zeros_like(a))


def test_count_in():
    assert count_in([0.5, 2, 10], 0, 3) == 2
    assert count_in([], -1, 1) == 0
    assert count_in([1.0], 1, 2) == 1 and count_in([1.0], 0, 1) == 0
    with pytest.raises(ValueError):
        count_in([1.0], 2, 1)


@given(st.lists(st.floats(-50, 50), max_size=30), st.floats(-60, 0), st.floats(0.01, 60))
def test_count_in_additive(xs, lo, width):
    mid = lo + width / 2
    assert count_in(xs, lo, lo + width) == count_in(xs, lo, mid) + count_in(xs, mid, lo + width)


def test_empirical_intensity_sine_flat():
    rng = np.random.default_rng(6)
    sp = spectral_sampler(SINE, 400)
    samples = [sp.sample(rng) for _ in range(10000)]
    h = empirical_intensity(samples, np.linspace(-5, 5, 21))
    assert np.all(np.abs(h.density - 1) < 3 * h.stderr)
    with pytest.raises(ValueError):
        empirical_intensity([], [0, 1])


def test_empirical_intensity_hermite1():
    rng = np.random.default_rng(8)
    d = discretize(HermiteKernel(1), 200)
    sp = SpectralSampler(d)
    samples = [sp.sample(rng) for _ in range(10000)]
    edges = np.linspace(-2, 2, 11)
    h = empirical_intensity(samples, edges)
    exact = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        q = composite_gauss_legendre(lo, hi, n_panels=1, order=10)
        exact.append(q.integrate(np.exp(-q.nodes**2) / np.sqrt(np.pi)) / (hi - lo))
    assert np.all(np.abs(h.density - exact) < 3 * h.stderr)


def test_pair_correlation():
    k = SineKernel(Window(-3, 3))
    rng = np.random.default_rng(12)
    sp = SpectralSampler(discretize(k, 400, breakpoints=[0.0, 0.5, 1.0]))
    prods = []
    for _ in range(10000):
        X = sp.sample(rng)
        prods.append(count_in(X, 0, 0.5) * count_in(X, 0.5, 1.0))
    m = mean_estimate(prods)
    qi = composite_gauss_legendre(0, 0.5, n_panels=2, order=12)
    qj = composite_gauss_legendre(0.5, 1.0, n_panels=2, order=12)
    rho2 = 1.0 - k.matrix(qi.nodes, qj.nodes) ** 2
    oracle = qi.weights @ rho2 @ qj.weights
    assert abs(m.value - oracle) < 3 * m.stderr
