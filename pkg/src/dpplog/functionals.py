"""Additive and multiplicative functionals of configurations.

Expectations are quadratures of f(x) Pi(x, x) over the kernel's window, i.e.
exact expectations for the process restricted to the window.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .montecarlo import Estimate, mean_estimate
from .quadrature import composite_gauss_legendre
from .sampler import points_of

PANEL_WIDTH = 0.5
ORDER = 12


class QuadratureWarning(UserWarning):
    pass


class DegenerateNormalizerError(ValueError):
    pass


class GSpaceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A real function with the locations where it jumps or is singular.

    Quadratures split panels at ``breakpoints`` and grade panels
    geometrically toward ``singular_points``.
    """

    func: Callable
    breakpoints: tuple = ()
    singular_points: tuple = ()
    name: str = "f"

    __test__ = False  # not a pytest class

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def __add__(self, c):
        return TestFunction(lambda x: self.func(x) + c, self.breakpoints,
                            self.singular_points, f"{self.name}+{c}")

    def __mul__(self, c):
        return TestFunction(lambda x: c * self.func(x), self.breakpoints,
                            self.singular_points, f"{c}*{self.name}")

    __rmul__ = __mul__


def as_test_function(f) -> TestFunction:
    return f if isinstance(f, TestFunction) else TestFunction(f)


def combine(coeffs, funcs) -> TestFunction:
    """Linear combination sum c_i f_i."""
    funcs = [as_test_function(f) for f in funcs]
    bp = tuple(sorted({p for f in funcs for p in f.breakpoints}))
    sp = tuple(sorted({p for f in funcs for p in f.singular_points}))

    def g(x):
        return sum(c * f(x) for c, f in zip(coeffs, funcs))

    return TestFunction(g, bp, sp, "combination")


def indicator(lo, hi) -> TestFunction:
    return TestFunction(lambda x: ((x >= lo) & (x < hi)).astype(float), (lo, hi),
                        name=f"indicator[{lo},{hi})")


def gaussian_bump(center=0.0, width=1.0, height=1.0) -> TestFunction:
    return TestFunction(lambda x: height * np.exp(-0.5 * ((x - center) / width) ** 2),
                        name=f"gaussian({center},{width})")


def smooth_bump(center=0.0, radius=1.0, height=1.0) -> TestFunction:
    """C-infinity bump exp(-1 / (1 - u^2)) e, u = (x - center) / radius, peak ``height``."""
    def f(x):
        u = (x - center) / radius
        out = np.zeros_like(u)
        m = np.abs(u) < 1
        out[m] = height * np.exp(1.0 - 1.0 / (1.0 - u[m] ** 2))
        return out

    return TestFunction(f, (center - radius, center + radius), name=f"bump({center},{radius})")


def coulomb_truncated(a, R, delta) -> TestFunction:
    """2 / (a - x) on {|x| < R, |x - a| > delta}, zero elsewhere."""
    def f(x):
        m = (np.abs(x) < R) & (np.abs(x - a) > delta)
        out = np.zeros_like(x)
        out[m] = 2.0 / (a - x[m])
        return out

    return TestFunction(f, (-R, R, a - delta, a + delta), (a,), f"coulomb(a={a},R={R},d={delta})")


PRESETS = {
    "indicator": lambda p: indicator(p["lo"], p["hi"]),
    "gaussian-bump": lambda p: gaussian_bump(p.get("center", 0.0), p.get("width", 1.0),
                                             p.get("height", 1.0)),
    "smooth-bump": lambda p: smooth_bump(p.get("center", 0.0), p.get("radius", 1.0),
                                         p.get("height", 1.0)),
    "coulomb-truncated": lambda p: coulomb_truncated(p["a"], p["R"], p["delta"]),
}


def from_preset(spec: dict) -> TestFunction:
    """Build a test function from ``{"preset": name, **params}``."""
    return PRESETS[spec["preset"]](spec)


def window_quadrature(k, breakpoints=(), singular_points=(), panel_width=PANEL_WIDTH,
                      order=ORDER):
    w = k.window
    graded = list(k.grading())
    for s in singular_points:
        graded.append((s, 1.0, 24))
    return composite_gauss_legendre(w.lo, w.hi, panel_width=panel_width, order=order,
                                    breakpoints=breakpoints, graded=graded)


def _quad_for(f, k, quad, refine=False):
    if quad is not None:
        return quad
    pw = PANEL_WIDTH / 2 if refine else PANEL_WIDTH
    return window_quadrature(k, f.breakpoints, f.singular_points, panel_width=pw)


def additive(f, X) -> float:
    p = points_of(X)
    if p.size == 0:
        return 0.0
    return float(np.sum(as_test_function(f)(p)))


def expected_additive(f, k, quad=None, check=True) -> float:
    """Quadrature of f(x) Pi(x, x) over the window (= E S_f for the windowed process).

    Warns with :class:`QuadratureWarning` when halving the panel width moves
    the value by more than 1e-6.
    """
    f = as_test_function(f)
    q = _quad_for(f, k, quad)
    val = float(q.integrate(f(q.nodes) * k.diag(q.nodes)))
    if check and quad is None:
        q2 = _quad_for(f, k, None, refine=True)
        val2 = float(q2.integrate(f(q2.nodes) * k.diag(q2.nodes)))
        if abs(val2 - val) > 1e-6:
            warnings.warn(f"expected_additive changed by {abs(val2 - val):.3g} under refinement",
                          QuadratureWarning, stacklevel=2)
        val = val2
    return val


def normalized_additive(f, k, X, quad=None, mean=None) -> float:
    """S_f(X) - E S_f.  Pass ``mean`` to reuse a precomputed expectation."""
    if mean is None:
        mean = expected_additive(f, k, quad)
    return additive(f, X) - mean


def variance_norm(f, k, quad=None, outside=0.0) -> float:
    """Squared V(Pi)-norm  1/2 iint |f(x) - f(y)|^2 Pi(x, y)^2 dx dy.

    ``f`` is taken equal to the constant ``outside`` off the window.  The
    window x window part is a tensor quadrature; the part with one variable
    off the window uses the reproducing property of a projection,
    int_R Pi(x, y)^2 dy = Pi(x, x).  With ``outside=0`` this is the variance
    of S_f under the windowed process.
    """
    f = as_test_function(f)
    q = _quad_for(f, k, quad)
    x, w = q.nodes, q.weights
    fx = f(x)
    K2 = k.matrix(x) ** 2
    inner = K2 @ w
    df = fx[:, None] - fx[None, :]
    within = 0.5 * (w @ ((df * df) * K2) @ w)
    leak = k.diag(x) - inner
    return float(within + w @ ((fx - outside) ** 2 * leak))


@dataclass(frozen=True)
class CutoffSpec:
    R: float
    delta: float
    a: float
    b: float | None = None
    theta: float = 0.25

    def __post_init__(self):
        if not (self.R > 0 and 0 < self.delta < 1):
            raise ValueError("need R > 0 and 0 < delta < 1")
        if not self.R > abs(self.a) + 1:
            raise ValueError("need R > |a| + 1")
        if self.b is not None and not abs(self.b - self.a) < min(self.theta, 1.0):
            raise ValueError(f"need |b - a| < {min(self.theta, 1.0)}")

    def with_b(self, b):
        return CutoffSpec(self.R, self.delta, self.a, b, self.theta)

    def cutoff_function(self) -> TestFunction:
        return coulomb_truncated(self.a, self.R, self.delta)


def regularized_coulomb(spec: CutoffSpec, X) -> float:
    """Sum of 2 / (a - x) over points with |x| < R and |x - a| > delta."""
    p = points_of(X)
    m = (np.abs(p) < spec.R) & (np.abs(p - spec.a) > spec.delta)
    return float(np.sum(2.0 / (spec.a - p[m])))


def regularized_coulomb_pair(spec: CutoffSpec, X) -> float:
    """Sum of 2 / (b - x) over points with |x| < R, |x - a| > delta, |x - b| > delta."""
    if spec.b is None:
        raise ValueError("regularized_coulomb_pair needs spec.b")
    p = points_of(X)
    m = (np.abs(p) < spec.R) & (np.abs(p - spec.a) > spec.delta) & (np.abs(p - spec.b) > spec.delta)
    return float(np.sum(2.0 / (spec.b - p[m])))


def multiplicative(g, X) -> float:
    p = points_of(X)
    if p.size == 0:
        return 1.0
    v = np.asarray(g(p), dtype=float)
    if np.any(v < 0):
        raise ValueError("multiplicative functional needs g >= 0")
    return float(np.prod(v))


def _log_of(g):
    g = as_test_function(g)
    return TestFunction(lambda x: np.log(g(x)), g.breakpoints, g.singular_points, f"log {g.name}")


def tilde_multiplicative(g, k, X, quad=None, mean_log=None) -> float:
    """exp(S_{log g}(X) - E S_{log g})."""
    p = points_of(X)
    if p.size and np.any(np.asarray(g(p)) <= 0):
        raise ValueError("tilde_multiplicative needs g > 0 on the configuration")
    lg = _log_of(g)
    if mean_log is None:
        mean_log = expected_additive(lg, k, quad)
    return float(np.exp(additive(lg, p) - mean_log))


@dataclass(frozen=True, eq=False)
class NormalizedMultiplicative:
    g: Callable
    mean_log: float
    normalizer: Estimate

    def tilde(self, X):
        p = points_of(X)
        if p.size and np.any(np.asarray(self.g(p)) <= 0):
            return 0.0
        return float(np.exp(additive(_log_of(self.g), p) - self.mean_log))

    def __call__(self, X):
        return self.tilde(X) / self.normalizer.value


def normalized_multiplicative(g, k, samples, quad=None, max_relerr=0.2):
    """Psi-tilde_g divided by its empirical mean over ``samples``.

    Returns ``(evaluator, normalizer)``; the in-sample mean of the evaluator
    is one by construction.
    """
    lg = _log_of(g)
    mean_log = expected_additive(lg, k, quad)
    proto = NormalizedMultiplicative(g, mean_log, Estimate(1.0))
    vals = np.array([proto.tilde(X) for X in samples])
    est = mean_estimate(vals)
    if not est.value > 0 or est.stderr > max_relerr * est.value:
        raise DegenerateNormalizerError(f"normalizer {est.value:.3g} +- {est.stderr:.3g}")
    return NormalizedMultiplicative(g, mean_log, est), est


@dataclass(frozen=True)
class GSpaceParams:
    B1: tuple
    B2: tuple
    alpha: float = 0.5
    eps_floor: float = 0.1
    M: float = 10.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.M > self.eps_floor > 0):
            raise ValueError("need alpha > 0 and M > eps_floor > 0")
        for lo, hi in (self.B1, self.B2):
            if not lo < hi:
                raise ValueError("B1 and B2 must be nonempty bounded intervals")


def restricted_operator_norm(k, intervals, n_per_unit=40) -> float:
    """Largest eigenvalue of Pi restricted to a union of intervals."""
    lo = max(min(a for a, _ in intervals), k.window.lo)
    hi = min(max(b for _, b in intervals), k.window.hi)
    q = composite_gauss_legendre(lo, hi, panel_width=0.25, order=10,
                                 breakpoints=[p for iv in intervals for p in iv], graded=k.grading())
    inside = np.zeros(q.nodes.size, dtype=bool)
    for a, b in intervals:
        inside |= (q.nodes >= a) & (q.nodes <= b)
    x, sw = q.nodes[inside], np.sqrt(q.weights[inside])
    M = sw[:, None] * k.matrix(x) * sw[None, :]
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[-1])


def g_distance(g1, g2, params: GSpaceParams, k, quad=None, norm_tol=1e-9) -> float:
    """int_{B2} |g1 - g2|^{1+alpha} Pi(x,x) dx + int_{window \\ B2} |g1 - g2|^2 Pi(x,x) dx."""
    norm = restricted_operator_norm(k, [params.B1, params.B2])
    if not norm < 1 - norm_tol:
        raise GSpaceError(f"operator norm of the restriction to B1 u B2 is {norm:.12g}, not < 1")
    if quad is None:
        g1t, g2t = as_test_function(g1), as_test_function(g2)
        quad = window_quadrature(k, tuple(params.B2) + g1t.breakpoints + g2t.breakpoints)
    x = quad.nodes
    diff = np.abs(np.asarray(g1(x), dtype=float) - np.asarray(g2(x), dtype=float))
    in_b2 = (x >= params.B2[0]) & (x <= params.B2[1])
    integrand = np.where(in_b2, diff ** (1 + params.alpha), diff**2) * k.diag(x)
    return float(quad.integrate(integrand))
