"""Integrable projection kernels on the line.

Every kernel here has the form

    Pi(x, y) = scale * (A(x) B(y) - A(y) B(x)) / (x - y)

and lives on a finite :class:`Window` where all numerics happen.  Near the
diagonal the ratio is replaced by its Taylor expansion about the midpoint,
which avoids the 0/0 cancellation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .quadrature import composite_gauss_legendre

INTENSITY_FLOOR = 1e-12
DIAG_SWITCH_THRESHOLD = 1e-6


class KernelDomainError(ValueError):
    """Evaluation point outside the kernel's window or domain."""


class DegenerateIntensityError(ValueError):
    """First intensity at or below ``INTENSITY_FLOOR``."""


@dataclass(frozen=True)
class Window:
    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError(f"invalid window [{self.lo}, {self.hi}]")

    @property
    def length(self):
        return self.hi - self.lo

    @property
    def half_width(self):
        return max(abs(self.lo), abs(self.hi))

    def contains(self, x):
        x = np.asarray(x)
        return (x >= self.lo) & (x <= self.hi)


@dataclass(frozen=True, eq=False)
class IntegrableKernel:
    """The functions A, B and their derivatives.  Higher derivatives are optional;
    without third derivatives the near-diagonal branch is zeroth order."""

    A: Callable
    B: Callable
    dA: Callable
    dB: Callable
    scale: float = 1.0
    d2A: Optional[Callable] = None
    d2B: Optional[Callable] = None
    d3A: Optional[Callable] = None
    d3B: Optional[Callable] = None

    @property
    def max_order(self):
        if self.d2A is None or self.d2B is None:
            return 1
        if self.d3A is None or self.d3B is None:
            return 2
        return 3

    def parts(self, x, order):
        fa = [self.A, self.dA, self.d2A, self.d3A][: order + 1]
        fb = [self.B, self.dB, self.d2B, self.d3B][: order + 1]
        return [f(x) for f in fa], [f(x) for f in fb]

    def __call__(self, x, y):
        return _integrable_eval(self.parts, self.max_order, self.scale, x, y)


def _near_diagonal(parts, max_order, scale, m, t):
    a, b = parts(m, min(max_order, 3))
    val = a[1] * b[0] - a[0] * b[1]
    if max_order >= 3:
        val = val - t * t * (a[0] * b[3] - 3 * a[1] * b[2] + 3 * a[2] * b[1] - a[3] * b[0]) / 6
    return scale * val


def _integrable_eval(parts, max_order, scale, x, y):
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    d = x - y
    near = np.abs(d) < DIAG_SWITCH_THRESHOLD
    out = np.empty(x.shape)
    far = ~near
    if far.any():
        (ax,), (bx,) = parts(x[far], 0)
        (ay,), (by,) = parts(y[far], 0)
        out[far] = scale * (ax * by - ay * bx) / d[far]
    if near.any():
        m = 0.5 * (x[near] + y[near])
        t = 0.5 * (y[near] - x[near])
        out[near] = _near_diagonal(parts, max_order, scale, m, t)
    return out


class KernelModel:
    """Base class of the kernel zoo.  Subclasses provide ``window``,
    ``scale``, ``max_order`` and ``parts``."""

    window: Window
    scale: float = 1.0
    max_order: int = 1
    strictly_positive_domain = False

    def parts(self, x, order):
        raise NotImplementedError

    def grading(self):
        """Geometric panel refinement ``(point, radius, levels)`` for quadrature."""
        return ()

    def integrable(self) -> IntegrableKernel:
        def comp(side, k):
            return lambda x: self.parts(np.asarray(x, dtype=float), k)[side][k]

        extra = {}
        if self.max_order >= 2:
            extra.update(d2A=comp(0, 2), d2B=comp(1, 2))
        if self.max_order >= 3:
            extra.update(d3A=comp(0, 3), d3B=comp(1, 3))
        return IntegrableKernel(comp(0, 0), comp(1, 0), comp(0, 1), comp(1, 1),
                                scale=self.scale, **extra)

    def check_domain(self, *xs):
        for x in xs:
            x = np.asarray(x, dtype=float)
            if not np.all(self.window.contains(x)):
                raise KernelDomainError(f"points outside window [{self.window.lo}, {self.window.hi}]")
            if self.strictly_positive_domain and np.any(x <= 0):
                raise KernelDomainError("kernel is defined on (0, inf) only")

    def __call__(self, x, y):
        return _integrable_eval(self.parts, self.max_order, self.scale, x, y)

    def matrix(self, x, y=None):
        x = np.asarray(x, dtype=float)
        y = x if y is None else np.asarray(y, dtype=float)
        (ax,), (bx,) = self.parts(x, 0)
        (ay,), (by,) = self.parts(y, 0)
        d = x[:, None] - y[None, :]
        near = np.abs(d) < DIAG_SWITCH_THRESHOLD
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.scale * (np.outer(ax, by) - np.outer(bx, ay)) / d
        if near.any():
            i, j = np.nonzero(near)
            out[i, j] = _near_diagonal(self.parts, self.max_order, self.scale,
                                       0.5 * (x[i] + y[j]), 0.5 * (y[j] - x[i]))
        return out

    def diag(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.parts(x, 1)
        return self.scale * (a[1] * b[0] - a[0] * b[1])

    def diag_derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.max_order >= 2:
            a, b = self.parts(x, 2)
            return self.scale * (a[2] * b[0] - a[0] * b[2])
        h = 1e-5 * np.maximum(1.0, np.abs(x))
        return (self.diag(x + h) - self.diag(x - h)) / (2 * h)


@dataclass(frozen=True)
class SineKernel(KernelModel):
    window: Window = field(default_factory=lambda: Window(-10.0, 10.0))
    scale = 1 / np.pi
    max_order = 3

    def parts(self, x, order):
        s, c = np.sin(np.pi * x), np.cos(np.pi * x)
        a = [s, np.pi * c, -np.pi**2 * s, -np.pi**3 * c]
        b = [c, -np.pi * s, -np.pi**2 * c, np.pi**3 * s]
        return a[: order + 1], b[: order + 1]

    def diag(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def diag_derivative(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


def hermite_functions(x, n):
    """phi_0..phi_n at x, orthonormal in L^2(R); phi_k = H_k e^{-x^2/2} normalized.

    Returns an array of shape ``(n + 1,) + x.shape``.  Uses the three-term
    recurrence on the normalized functions, so nothing overflows.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n + 1,) + x.shape)
    out[0] = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if n >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for k in range(1, n):
        out[k + 1] = np.sqrt(2.0 / (k + 1)) * x * out[k] - np.sqrt(k / (k + 1)) * out[k - 1]
    return out


@dataclass(frozen=True)
class HermiteKernel(KernelModel):
    """Christoffel-Darboux kernel of the first N Hermite functions (GUE-type
    ensemble with joint density prop. to prod (x_i - x_j)^2 prod exp(-x_i^2))."""

    N: int = 1
    window: Optional[Window] = None
    max_order = 3

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("HermiteN needs a positive integer N")
        if self.window is None:
            L = np.sqrt(2.0 * self.N) + 6.0
            object.__setattr__(self, "window", Window(-L, L))

    @property
    def scale(self):
        return np.sqrt(self.N / 2.0)

    def parts(self, x, order):
        N = self.N
        phi = hermite_functions(x, N + 1)

        def derivs(k):
            p = phi[k]
            up = phi[k + 1]
            down = phi[k - 1] if k >= 1 else np.zeros_like(p)
            d1 = np.sqrt(k / 2.0) * down - np.sqrt((k + 1) / 2.0) * up
            q = x * x - 2 * k - 1
            return [p, d1, q * p, 2 * x * p + q * d1]

        return derivs(N)[: order + 1], derivs(N - 1)[: order + 1]

    # The Gram form sum_k phi_k(x) phi_k(y) is used for evaluation: it is
    # exactly symmetric and has no diagonal cancellation.
    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        px = hermite_functions(x, self.N - 1)
        py = hermite_functions(y, self.N - 1)
        return np.sum(px * py, axis=0)

    def matrix(self, x, y=None):
        px = hermite_functions(np.asarray(x, dtype=float), self.N - 1)
        py = px if y is None else hermite_functions(np.asarray(y, dtype=float), self.N - 1)
        return px.T @ py

    def diag(self, x):
        p = hermite_functions(np.asarray(x, dtype=float), self.N - 1)
        return np.sum(p * p, axis=0)

    def diag_derivative(self, x):
        p = hermite_functions(np.asarray(x, dtype=float), self.N)
        return -np.sqrt(2.0 * self.N) * p[self.N - 1] * p[self.N]


@dataclass(frozen=True)
class BesselKernel(KernelModel):
    """Hard-edge Bessel kernel on (0, inf):
    (J_s(sqrt x) sqrt y J_s'(sqrt y) - sqrt x J_s'(sqrt x) J_s(sqrt y)) / (2 (x - y))."""

    s: float = 0.0
    window: Window = field(default_factory=lambda: Window(0.0, 100.0))
    scale = 0.5
    max_order = 2
    strictly_positive_domain = True

    def __post_init__(self):
        if not self.s > -1:
            raise ValueError("Bessel kernel needs s > -1")
        if self.window.lo < 0:
            raise ValueError("Bessel window must satisfy lo >= 0")

    def grading(self):
        if self.window.lo > 1.0:
            return ()
        # the intensity behaves like x^s at 0
        beta = self.s if self.window.lo == 0 and self.s < 0 else 0.0
        return ((self.window.lo, min(4.0, self.window.length), 30, beta),)

    def parts(self, x, order):
        s = self.s
        z = np.sqrt(x)
        J = special.jv(s, z)
        Jp = special.jvp(s, z)
        a = [J, Jp / (2 * z)]
        b = [z * Jp, -(z * z - s * s) * J / (2 * z * z)]
        if order >= 2:
            a.append((-2 * Jp - (z - s * s / z) * J) / (4 * z**3))
            b.append(-(s * s / (x * x)) * J / 2 - (1 - s * s / x) * Jp / (4 * z))
        if order >= 3:
            raise ValueError("Bessel kernel provides derivatives up to order 2")
        return a[: order + 1], b[: order + 1]

    def diag(self, x):
        z = np.sqrt(np.asarray(x, dtype=float))
        s = self.s
        return 0.25 * (special.jv(s, z) ** 2 - special.jv(s + 1, z) * special.jv(s - 1, z))

    def _t_rule(self, xmax):
        # the t-integrand is t^s times an entire function of t
        n = 24 + int(2 * np.sqrt(max(xmax, 0.0)))
        t, w = special.roots_jacobi(n, 0.0, self.s)
        return 0.5 * (t + 1), w * 0.5 ** (1 + self.s)

    def matrix(self, x, y=None):
        """K(x, y) = 1/4 int_0^1 J_s(sqrt(t x)) J_s(sqrt(t y)) dt.

        The two-term integrable formula cancels badly when x and y are both
        close to 0 (all digits lost for s < 0); the integral form does not.
        """
        x = np.asarray(x, dtype=float)
        y = x if y is None else np.asarray(y, dtype=float)
        t, w = self._t_rule(max(x.max(initial=0.0), y.max(initial=0.0)))
        s = self.s
        # J_s(sqrt(t x)) / (t x)^{s/2} is entire; the powers are restored outside
        fx = special.jv(s, np.sqrt(np.outer(x, t))) * np.outer(x, t) ** (-s / 2)
        fy = fx if y is x else special.jv(s, np.sqrt(np.outer(y, t))) * np.outer(y, t) ** (-s / 2)
        core = 0.25 * (fx * w) @ fy.T
        return core * np.outer(x ** (s / 2), y ** (s / 2))

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        flat = [self.matrix(np.array([a]), np.array([b]))[0, 0] for a, b in zip(x.ravel(), y.ravel())]
        return np.array(flat).reshape(x.shape)


@dataclass(frozen=True)
class CustomKernel(KernelModel):
    """Wraps a user-supplied :class:`IntegrableKernel`."""

    kernel: IntegrableKernel = None
    window: Window = None

    def __post_init__(self):
        if self.kernel is None or self.window is None:
            raise ValueError("CustomKernel needs an IntegrableKernel and a Window")

    @property
    def scale(self):
        return self.kernel.scale

    @property
    def max_order(self):
        return self.kernel.max_order

    def parts(self, x, order):
        return self.kernel.parts(x, order)

    def diag_derivative(self, x):
        x = np.asarray(x, dtype=float)
        h = 1e-5 * np.maximum(1.0, np.abs(x))
        return (self.diag(x + h) - self.diag(x - h)) / (2 * h)


def with_window(k: KernelModel, window) -> KernelModel:
    if not isinstance(window, Window):
        window = Window(*window)
    from dataclasses import replace
    return replace(k, window=window)


def parse_kernel(text: str, window=None) -> KernelModel:
    """``sine``, ``bessel:<s>`` or ``hermite:<N>``."""
    name, _, arg = text.strip().lower().partition(":")
    if name == "sine":
        k = SineKernel()
    elif name == "bessel":
        k = BesselKernel(float(arg or 0.0))
    elif name == "hermite":
        if not arg:
            raise ValueError("hermite kernel needs N, e.g. hermite:4")
        k = HermiteKernel(int(arg))
    else:
        raise ValueError(f"unknown kernel {text!r}")
    return k if window is None else with_window(k, window)


def kernel_spec(k) -> str:
    if isinstance(k, SineKernel):
        return "sine"
    if isinstance(k, HermiteKernel):
        return f"hermite:{k.N}"
    if isinstance(k, BesselKernel):
        return f"bessel:{k.s!r}"
    return "custom"


# -- operations ---------------------------------------------------------------

def eval_kernel(k, x, y):
    k.check_domain(x, y)
    return k(x, y)


def first_intensity(k, x):
    k.check_domain(x)
    return k.diag(x)


def intensity_log_derivative(k, a, intensity_floor=INTENSITY_FLOOR):
    k.check_domain(a)
    rho = k.diag(a)
    if np.any(rho <= intensity_floor):
        raise DegenerateIntensityError(f"first intensity {rho} <= {intensity_floor} at a={a}")
    return k.diag_derivative(a) / rho


@dataclass
class AssumptionReport:
    symmetry_residual: float
    projection_residual: float
    eigen_min: float
    eigen_max: float
    trace: float
    max_second_difference: float
    tail_integral: float
    symmetric: bool
    projection: bool
    smooth: bool
    tail_finite: bool

    @property
    def passed(self):
        return self.symmetric and self.projection and self.smooth and self.tail_finite


def check_assumption2(k, grid_size=200, tol=1e-6, smooth_bound=1e8) -> AssumptionReport:
    """Numerical check of the projection-kernel assumptions on the window.

    Reports rather than raises.  The projection check asks for the discretized
    operator's spectrum to lie in [-tol, 1 + tol]; on a finite window a
    projection kernel restricts to a positive contraction, so the projection
    residual max lambda (1 - lambda) is reported separately.
    """
    if grid_size < 16:
        raise ValueError("grid_size must be >= 16")
    w = k.window
    lo, hi = w.lo, w.hi
    pad = 1e-3 * w.length
    g = np.linspace(lo + pad, hi - pad, grid_size)
    K = k.matrix(g)
    sym = float(np.max(np.abs(K - K.T)))

    q = composite_gauss_legendre(lo, hi, n_panels=max(1, grid_size // 10), order=10,
                                 graded=k.grading())
    sw = np.sqrt(q.weights)
    M = sw[:, None] * k.matrix(q.nodes) * sw[None, :]
    M = 0.5 * (M + M.T)
    ev = np.linalg.eigvalsh(M)
    proj_res = float(np.max(np.abs(ev * (1 - ev))))

    h = g[1] - g[0]
    with np.errstate(all="ignore"):
        d2x = (K[2:, 1:-1] - 2 * K[1:-1, 1:-1] + K[:-2, 1:-1]) / h**2
        d2xy = (K[2:, 2:] - K[2:, :-2] - K[:-2, 2:] + K[:-2, :-2]) / (4 * h * h)
    second = float(max(np.max(np.abs(d2x)), np.max(np.abs(d2xy))))

    tail = float(q.integrate(k.diag(q.nodes) / (1 + q.nodes**2)))
    return AssumptionReport(
        symmetry_residual=sym,
        projection_residual=proj_res,
        eigen_min=float(ev[0]),
        eigen_max=float(ev[-1]),
        trace=float(np.trace(M)),
        max_second_difference=second,
        tail_integral=tail,
        symmetric=sym < 1e-12,
        projection=bool(ev[0] >= -tol and ev[-1] <= 1 + tol),
        smooth=bool(np.isfinite(second) and second < smooth_bound),
        tail_finite=bool(np.isfinite(tail)),
    )
