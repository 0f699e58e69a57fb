"""Logarithmic derivative of a projection DPP and its Monte Carlo checks.

For an anchor a the regularized derivative is

    d(a, X) = rho_1'(a) / rho_1(a) + S(X) - E^a S,   S(X) = sum_{|x|<R, |x-a|>delta} 2 / (a - x),

where E^a is the reduced Palm expectation.  E^a S is a quadrature of
2 / (a - x) * Pi^a(x, x); the Palm intensity vanishes to second order at a,
so the integrand is smooth across the inner cutoff.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .functionals import (CutoffSpec, DegenerateNormalizerError, coulomb_truncated,
                          regularized_coulomb, regularized_coulomb_pair)
from .kernels import INTENSITY_FLOOR, DegenerateIntensityError, intensity_log_derivative
from .montecarlo import Estimate, as_generator, mean_estimate, ratio_estimate
from .palm import PalmKernel, palm_reduce
from .quadrature import composite_gauss_legendre
from .sampler import CampbellSampler, count_in, points_of, spectral_sampler

CONV_TOL = 1e-2
MAX_RELERR = 0.2


@dataclass(frozen=True)
class RegularizationSchedule:
    """(R, delta) pairs with R nondecreasing and delta nonincreasing."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple((float(R), float(d)) for R, d in self.pairs)
        if len(pairs) < 3:
            raise ValueError("a schedule needs at least 3 pairs")
        for (R0, d0), (R1, d1) in zip(pairs, pairs[1:]):
            if R1 < R0 or d1 > d0:
                raise ValueError("schedule must have R nondecreasing and delta nonincreasing")
        if any(not (R > 0 and 0 < d < 1) for R, d in pairs):
            raise ValueError("schedule needs R > 0 and 0 < delta < 1")
        object.__setattr__(self, "pairs", pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)

    @property
    def finest(self):
        return self.pairs[-1]

    def check_window(self, window):
        reach = max(abs(window.lo), abs(window.hi))
        if self.pairs[-1][0] > reach * (1 + 1e-12):
            raise ValueError(f"largest R {self.pairs[-1][0]} exceeds the window reach {reach}")

    @classmethod
    def parse(cls, text):
        """From ``"R1:d1,R2:d2,..."``."""
        pairs = []
        for item in text.split(","):
            R, d = item.split(":")
            pairs.append((float(R), float(d)))
        return cls(tuple(pairs))

    def __str__(self):
        return ",".join(f"{R:g}:{d:g}" for R, d in self.pairs)


@dataclass(frozen=True)
class LogDerivEstimate:
    per_pair: tuple  # (R, delta, value)
    extrapolated: float
    converged: bool
    cauchy_gap: float


def coulomb_cutoff_function(a, R, delta):
    return coulomb_truncated(a, R, delta)


def _palm_at(k, a, intensity_floor):
    if isinstance(k, PalmKernel):
        raise TypeError("pass the base kernel; the anchor is added here")
    k.check_domain(a)
    rho = float(k.diag(a))
    if rho <= intensity_floor:
        raise DegenerateIntensityError(f"intensity {rho:.3g} at {a} is below the floor")
    return palm_reduce(k, a, intensity_floor)


def _coulomb_nodes(k, a, pairs, panel_width, order):
    w = k.window
    R_max = max(R for R, _ in pairs)
    lo, hi = max(w.lo, -R_max), min(w.hi, R_max)
    bps = [p for R, d in pairs for p in (-R, R, a - d, a + d)]
    d_min = min(d for _, d in pairs)
    refine = [(a, 1.0, min(panel_width, 0.25))]
    return composite_gauss_legendre(lo, hi, panel_width=panel_width, order=order, breakpoints=bps,
                                    refine=refine, graded=k.grading()), d_min


def palm_coulomb_means(k, a, pairs, *, panel_width=0.5, order=12,
                       intensity_floor=INTENSITY_FLOOR) -> np.ndarray:
    """E^a S^{R,delta}_a for each (R, delta) in ``pairs`` from one Palm-intensity evaluation."""
    pk = _palm_at(k, a, intensity_floor)
    q, _ = _coulomb_nodes(k, a, pairs, panel_width, order)
    x = q.nodes
    base = 2.0 * pk.diag(x) / (a - x)
    out = np.empty(len(pairs))
    for i, (R, d) in enumerate(pairs):
        m = (np.abs(x) < R) & (np.abs(x - a) > d)
        out[i] = q.weights[m] @ base[m]
    return out


def palm_coulomb_mean(k, a, R, delta, **kw) -> float:
    return float(palm_coulomb_means(k, a, [(R, delta)], **kw)[0])


def normalized_coulomb(k, a, spec: CutoffSpec, X, mean=None) -> float:
    """S^{R,delta}_a(X) - E^a S^{R,delta}_a."""
    if mean is None:
        mean = palm_coulomb_mean(k, a, spec.R, spec.delta)
    return regularized_coulomb(spec, X) - mean


def _coulomb_sums(a, pairs, X):
    p = points_of(X)
    out = np.empty(len(pairs))
    for i, (R, d) in enumerate(pairs):
        m = (np.abs(p) < R) & (np.abs(p - a) > d)
        out[i] = np.sum(2.0 / (a - p[m]))
    return out


def log_derivative(k, a, schedule: RegularizationSchedule, X, conv_tol=CONV_TOL,
                   intensity_floor=INTENSITY_FLOOR) -> LogDerivEstimate:
    """Regularized log-derivative at every schedule pair; the finest one is reported."""
    pairs = list(schedule)
    drho = intensity_log_derivative(k, a, intensity_floor)
    vals = drho + _coulomb_sums(a, pairs, X) - palm_coulomb_means(k, a, pairs,
                                                                   intensity_floor=intensity_floor)
    gap = float(abs(vals[-1] - vals[-2]))
    per = tuple((R, d, float(v)) for (R, d), v in zip(pairs, vals))
    return LogDerivEstimate(per, float(vals[-1]), gap < conv_tol, gap)


def hermite_log_derivative(a, X) -> float:
    """-2a + sum 2 / (a - x): the exact log-derivative of the Hermite ensemble."""
    p = points_of(X)
    return float(-2.0 * a + np.sum(2.0 / (a - p)))


def rn_product(a, b, R, delta, X) -> float:
    """prod ((x - b) / (x - a))^2 over |x| < R, |x - a| > delta, |x - b| > delta."""
    p = points_of(X)
    m = (np.abs(p) < R) & (np.abs(p - a) > delta) & (np.abs(p - b) > delta)
    r = (p[m] - b) / (p[m] - a)
    return float(np.prod(r * r))


@dataclass(frozen=True, eq=False)
class RadonNikodymFactor:
    """Self-normalized density of the Palm measure at b relative to the one at a.

    ``normalizer`` is the empirical mean Z of the unnormalized product under
    the Palm measure at a; the constant in front of the product is 1 / Z.
    """

    a: float
    b: float
    spec: CutoffSpec
    normalizer: Estimate
    evaluator: Callable
    in_sample: np.ndarray = field(repr=False)

    @property
    def log_constant(self) -> float:
        return -float(np.log(self.normalizer.value))


def radon_nikodym_factor(k, a, b, spec: CutoffSpec, palm_samples, max_relerr=MAX_RELERR):
    if not abs(b - a) < min(spec.theta, 1.0):
        raise ValueError(f"need |b - a| < {min(spec.theta, 1.0)}")
    R, d = spec.R, spec.delta
    prods = np.array([rn_product(a, b, R, d, X) for X in palm_samples])
    Z = mean_estimate(prods)
    if not Z.value > 0 or Z.stderr > max_relerr * Z.value:
        raise DegenerateNormalizerError(
            f"normalizer {Z.value:.3g} +- {Z.stderr:.3g}; delta may be too small for the sample size")
    zval = Z.value

    def evaluator(X):
        return rn_product(a, b, R, d, X) / zval

    return RadonNikodymFactor(a, b, spec.with_b(b), Z, evaluator, prods / zval)


def dlnC_derivative(k, a, spec: CutoffSpec, palm_samples) -> Estimate:
    """Estimate of -E^a[Psi_{b,a} S_{a,b}] with b = spec.b (or a)."""
    b = a if spec.b is None else spec.b
    sp = spec.with_b(b)
    psi = np.array([rn_product(a, b, sp.R, sp.delta, X) for X in palm_samples])
    s = np.array([regularized_coulomb_pair(sp, X) for X in palm_samples])
    r = ratio_estimate(psi * s, psi)
    return Estimate(-r.value, r.stderr, r.n)


@dataclass(frozen=True)
class LnCCheck:
    eps: float
    finite_difference: Estimate
    derivative: Estimate
    z_score: float


def dlnC_consistency(k, a, eps, spec: CutoffSpec, palm_samples) -> LnCCheck:
    """(ln C(eps) - ln C(0)) / eps against the derivative formula at eps / 2.

    Both estimates use the same samples; the z-score uses the standard error
    of their paired difference.
    """
    R, d = spec.R, spec.delta
    pe = np.array([rn_product(a, a + eps, R, d, X) for X in palm_samples])
    ph = np.array([rn_product(a, a + eps / 2, R, d, X) for X in palm_samples])
    sh = np.array([regularized_coulomb_pair(spec.with_b(a + eps / 2), X) for X in palm_samples])
    n = pe.size
    m_e, m_h = pe.mean(), ph.mean()
    # ln C(0) = 0 since the product is identically one at b = a
    fd = -np.log(m_e) / eps
    ratio = (ph * sh).mean() / m_h
    infl_fd = -(pe - m_e) / (m_e * eps)
    infl_r = -(ph * sh - ratio * ph) / m_h
    fd_est = Estimate(float(fd), float(infl_fd.std(ddof=1) / np.sqrt(n)), n)
    der_est = Estimate(float(-ratio), float(infl_r.std(ddof=1) / np.sqrt(n)), n)
    se = (infl_fd - infl_r).std(ddof=1) / np.sqrt(n)
    z = abs(fd - (-ratio)) / se if se > 0 else 0.0
    return LnCCheck(eps, fd_est, der_est, float(z))


def rn_difference_quotient_check(k, a, eps_list, spec: CutoffSpec, palm_samples):
    """Empirical L2(P^a) distance between (Psi_{a+eps,a} - 1) / eps and the normalized Coulomb sum."""
    eps_list = list(eps_list)
    if any(e == 0 or not abs(e) < min(spec.theta, 1.0) for e in eps_list):
        raise ValueError("each eps must satisfy 0 < |eps| < theta")
    mean = palm_coulomb_mean(k, a, spec.R, spec.delta)
    sbar = np.array([regularized_coulomb(spec, X) for X in palm_samples]) - mean
    out = []
    for e in eps_list:
        f = radon_nikodym_factor(k, a, a + e, spec, palm_samples)
        out.append((e, float(np.sqrt(np.mean(((f.in_sample - 1) / e - sbar) ** 2)))))
    return out


def smooth_bump_with_derivative(center=0.0, radius=1.0):
    """chi(a) = exp(-1 / (1 - u^2)), u = (a - center) / radius, and its derivative."""
    def chi(a):
        u = (np.asarray(a, dtype=float) - center) / radius
        out = np.zeros_like(u)
        m = np.abs(u) < 1
        out[m] = np.exp(-1.0 / (1.0 - u[m] ** 2))
        return out

    def dchi(a):
        u = (np.asarray(a, dtype=float) - center) / radius
        out = np.zeros_like(u)
        m = np.abs(u) < 1
        um = u[m]
        out[m] = np.exp(-1.0 / (1.0 - um**2)) * (-2.0 * um / (1.0 - um**2) ** 2) / radius
        return out

    return chi, dchi


def _bump_sum(center, radius):
    def psi(X):
        p = points_of(X)
        u = (p - center) / radius
        m = np.abs(u) < 1
        return float(np.exp(-np.sum(np.exp(1.0 - 1.0 / (1.0 - u[m] ** 2)))))

    return psi


STANDARD_PSI = {
    "one": lambda X: 1.0,
    "count-2-3": lambda X: float(np.exp(-count_in(X, 2.0, 3.0))),
    "bump-0.5": _bump_sum(0.5, 0.5),
}


@dataclass(frozen=True)
class IBPResult:
    name: str
    lhs: Estimate
    rhs: Estimate
    z_score: float
    n: int
    nonconverged_fraction: float


def ibp_battery(k, psis: dict, schedule: RegularizationSchedule, n_samples, rng, *,
                support=(-1.0, 1.0), n_nodes=400, conv_tol=CONV_TOL, sampler=None):
    """Integration-by-parts check for observables chi(a) psi(X), one Campbell sample set.

    chi is the standard bump on ``support``.  Anchors are drawn with density
    rho_1 on ``support`` (total mass Z) and X from the Palm process, so

        lhs = Z * mean(chi'(a) psi(X)),   rhs = -Z * mean(d(a, X) chi(a) psi(X)).

    Every observable is evaluated on the same samples; z-scores use the
    standard error of the per-sample difference.
    """
    schedule.check_window(k.window)
    rng = as_generator(rng)
    lo, hi = support
    chi, dchi = smooth_bump_with_derivative(0.5 * (lo + hi), 0.5 * (hi - lo))
    indicator = lambda a: ((a >= lo) & (a <= hi)).astype(float)
    cs = CampbellSampler(k, indicator, support, n_nodes=n_nodes,
                         sampler=sampler or spectral_sampler(k, n_nodes))
    Z = cs.normalizer
    names = list(psis)
    L = np.empty((len(names), n_samples))
    Rv = np.empty((len(names), n_samples))
    nonconv = 0
    for i in range(n_samples):
        s = cs.draw(rng)
        est = log_derivative(k, s.anchor, schedule, s.config, conv_tol)
        nonconv += not est.converged
        c, dc = float(chi(s.anchor)), float(dchi(s.anchor))
        for j, name in enumerate(names):
            v = psis[name](s.config)
            L[j, i] = Z * dc * v
            Rv[j, i] = -Z * est.extrapolated * c * v
    out = []
    for j, name in enumerate(names):
        lhs, rhs = mean_estimate(L[j]), mean_estimate(Rv[j])
        diff = mean_estimate(L[j] - Rv[j])
        z = abs(diff.value) / diff.stderr if diff.stderr > 0 else 0.0
        out.append(IBPResult(name, lhs, rhs, float(z), n_samples, nonconv / n_samples))
    return out


def ibp_test(k, psi, schedule, n_samples, rng, **kw) -> IBPResult:
    return ibp_battery(k, {"psi": psi}, schedule, n_samples, rng, **kw)[0]
