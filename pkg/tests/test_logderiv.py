import numpy as np
import pytest

from dpplog.functionals import CutoffSpec, DegenerateNormalizerError, regularized_coulomb
from dpplog.kernels import HermiteKernel, SineKernel, Window
from dpplog.logderiv import (STANDARD_PSI, RegularizationSchedule, dlnC_consistency,
                             dlnC_derivative, hermite_log_derivative, ibp_battery, log_derivative,
                             normalized_coulomb, palm_coulomb_mean, palm_coulomb_means,
                             radon_nikodym_factor, rn_difference_quotient_check, rn_product,
                             smooth_bump_with_derivative)
from dpplog.montecarlo import mean_estimate, variance_estimate
from dpplog.functionals import variance_norm
from dpplog.palm import palm_reduce
from dpplog.sampler import spectral_sampler

SINE = SineKernel(Window(-6, 6))
SCHED = RegularizationSchedule(((4, 0.1), (5, 0.05), (6, 0.02)))


@pytest.fixture(scope="module")
def sine_palm():
    rng = np.random.default_rng(31)
    sp = spectral_sampler(SINE, 600, (0.0, 0.1))
    return [sp.sample_palm([0.0], rng) for _ in range(10000)]


def test_schedule_validation_and_parse():
    s = RegularizationSchedule.parse("4:0.1,5:0.05,6:0.02")
    assert s == SCHED and str(s) == "4:0.1,5:0.05,6:0.02"
    assert s.finest == (6.0, 0.02)
    with pytest.raises(ValueError):
        RegularizationSchedule(((4, 0.1), (5, 0.05)))
    with pytest.raises(ValueError):
        RegularizationSchedule(((5, 0.1), (4, 0.05), (6, 0.02)))
    with pytest.raises(ValueError):
        RegularizationSchedule(((4, 0.1), (5, 0.2), (6, 0.02)))
    with pytest.raises(ValueError):
        RegularizationSchedule.parse("4:0.1,5:0.05,9:0.02").check_window(SINE.window)


def test_symmetric_sine_configuration():
    e = log_derivative(SINE, 0.0, SCHED, [-1.3, 1.3])
    assert abs(e.extrapolated) < 1e-8
    assert all(abs(v) < 1e-8 for _, _, v in e.per_pair)


def test_repeated_pairs_converge():
    s = RegularizationSchedule(((5, 0.05),) * 3)
    e = log_derivative(SINE, 0.2, s, [-1.0, 0.9, 2.5])
    assert e.cauchy_gap == 0 and e.converged


def test_hermite_oracle():
    k = HermiteKernel(4)
    s = RegularizationSchedule(((6, 0.1), (7, 0.05), (8, 0.01)))
    rng = np.random.default_rng(2)
    for a in (-0.7, 0.3, 1.2):
        sp = spectral_sampler(k, 400, (a,))
        for _ in range(5):
            X = sp.sample_palm([a], rng)
            if np.min(np.abs(X.points - a)) <= 0.1:
                continue
            assert abs(log_derivative(k, a, s, X).extrapolated - hermite_log_derivative(a, X)) < 1e-4


def test_palm_coulomb_means_consistent():
    pairs = [(4, 0.1), (6, 0.02)]
    both = palm_coulomb_means(SINE, 0.3, pairs)
    assert both[1] == pytest.approx(palm_coulomb_mean(SINE, 0.3, 6, 0.02), abs=1e-12)
    # symmetric window and anchor: odd integrand
    assert abs(palm_coulomb_mean(SINE, 0.0, 6, 0.02)) < 1e-10


def test_normalized_coulomb_centering_and_variance(sine_palm):
    spec = CutoffSpec(5, 0.05, 0.0)
    mean = palm_coulomb_mean(SINE, 0.0, 5, 0.05)
    vals = np.array([normalized_coulomb(SINE, 0.0, spec, X, mean) for X in sine_palm])
    m, v = mean_estimate(vals), variance_estimate(vals)
    assert abs(m.value) < 3 * m.stderr
    pk = palm_reduce(SINE, 0.0)
    assert abs(v.value - variance_norm(spec.cutoff_function(), pk)) < 3 * v.stderr


def test_rn_product_excludes_points_near_b():
    assert rn_product(0.0, 0.1, 5, 0.05, [0.12]) == 1.0
    assert rn_product(0.0, 0.1, 5, 0.05, [1.0]) == pytest.approx((0.9 / 1.0) ** 2)


def test_rn_factor_identity_at_a(sine_palm):
    f = radon_nikodym_factor(SINE, 0.0, 0.0, CutoffSpec(5, 0.05, 0.0), sine_palm[:200])
    assert np.all(f.in_sample == 1.0) and f.evaluator(sine_palm[0]) == 1.0
    assert f.log_constant == 0.0
    with pytest.raises(ValueError):
        radon_nikodym_factor(SINE, 0.0, 0.3, CutoffSpec(5, 0.05, 0.0), sine_palm[:10])


def test_rn_degenerate_normalizer():
    from dpplog.sampler import Configuration
    samples = [Configuration([0.0101])] + [Configuration([3.0])] * 19
    with pytest.raises(DegenerateNormalizerError):
        radon_nikodym_factor(SINE, 0.0, 0.2, CutoffSpec(5, 0.01, 0.0), samples)


def test_change_of_measure(sine_palm):
    rng = np.random.default_rng(5)
    sp = spectral_sampler(SINE, 600, (0.0, 0.1))
    Pb = [sp.sample_palm([0.1], rng) for _ in range(10000)]
    f = radon_nikodym_factor(SINE, 0.0, 0.1, CutoffSpec(6, 0.005, 0.0), sine_palm)
    from dpplog.sampler import count_in
    for phi in (lambda X: count_in(X, 0, 1), lambda X: count_in(X, -0.3, 0.3),
                STANDARD_PSI["bump-0.5"]):
        ea = mean_estimate(f.in_sample * np.array([phi(X) for X in sine_palm]))
        eb = mean_estimate([phi(X) for X in Pb])
        assert ea.z(eb) < 3


def test_dlnC_at_zero(sine_palm):
    spec = CutoffSpec(5, 0.05, 0.0)
    d = dlnC_derivative(SINE, 0.0, spec, sine_palm)
    direct = -np.mean([regularized_coulomb(spec, X) for X in sine_palm])
    assert d.value == pytest.approx(direct, abs=1e-12)
    assert abs(d.value + palm_coulomb_mean(SINE, 0.0, 5, 0.05)) < 3 * d.stderr
    assert abs(d.value) < 3 * d.stderr


def test_dlnC_finite_difference(sine_palm):
    c = dlnC_consistency(SINE, 0.0, 0.05, CutoffSpec(6, 0.005, 0.0), sine_palm)
    assert c.z_score < 3


def test_rn_difference_quotient(sine_palm):
    spec = CutoffSpec(6, 0.005, 0.0)
    (e1, g1), (e2, g2) = rn_difference_quotient_check(SINE, 0.0, [0.2, 0.02], spec, sine_palm)
    assert g2 < g1
    with pytest.raises(ValueError):
        rn_difference_quotient_check(SINE, 0.0, [0.0], spec, sine_palm)


def test_rn_difference_quotient_hermite_edge():
    k = HermiteKernel(6)
    rng = np.random.default_rng(8)
    sp = spectral_sampler(k, 400, (3.0,))
    samples = [sp.sample_palm([3.0], rng) for _ in range(10000)]
    spec = CutoffSpec(k.window.half_width, 0.005, 3.0)
    gaps = rn_difference_quotient_check(k, 3.0, [0.2, 0.02], spec, samples)
    assert gaps[1][1] < gaps[0][1] and gaps[1][1] < 0.1


def test_bump_derivative():
    chi, dchi = smooth_bump_with_derivative(0.0, 1.0)
    x = np.linspace(-0.95, 0.95, 21)
    h = 1e-6
    assert np.allclose(dchi(x), (chi(x + h) - chi(x - h)) / (2 * h), atol=1e-6)
    assert chi(np.array([1.0]))[0] == 0 and dchi(np.array([-1.0]))[0] == 0


def test_ibp_small_battery():
    res = ibp_battery(HermiteKernel(4), STANDARD_PSI,
                      RegularizationSchedule(((6, 0.1), (7, 0.05), (8, 0.01))), 3000,
                      np.random.default_rng(13))
    assert [r.name for r in res] == list(STANDARD_PSI)
    for r in res:
        assert r.z_score < 3 and r.n == 3000
    one = res[0]
    assert abs(one.lhs.value) < 3 * one.lhs.stderr + 1e-12
