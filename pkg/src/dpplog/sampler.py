"""Spectral sampling of determinantal processes restricted to a window.

The kernel is discretized on composite Gauss-Legendre nodes as the symmetric
matrix sqrt(w_i) Pi(x_i, x_j) sqrt(w_j).  A sample selects each eigenvector
independently with probability equal to its eigenvalue, then draws one node
per selected vector from the running projection density, and finally places
each point uniformly inside its node's quadrature cell.

Palm samples at arbitrary anchors reuse one eigendecomposition: the rank-one
Palm update is applied inside the span of the numerically nonzero modes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .kernels import INTENSITY_FLOOR, DegenerateIntensityError, with_window, Window
from .palm import PalmKernel, palm_kernel, palm_reduce
from .quadrature import Quadrature, composite_gauss_legendre

EIGEN_EXCURSION = 1e-6
MODE_CUTOFF = 1e-12


class EigenError(RuntimeError):
    """Discretized kernel is not a positive contraction."""


@dataclass(frozen=True, eq=False)
class Configuration:
    """Finite, strictly increasing point configuration."""

    points: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        p = np.sort(np.asarray(self.points, dtype=float).ravel())
        if not np.all(np.isfinite(p)):
            raise ValueError("configuration points must be finite")
        if p.size > 1 and np.any(np.diff(p) <= 0):
            raise ValueError("configuration points must be distinct")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    def __len__(self):
        return self.points.size

    def __iter__(self):
        return iter(self.points.tolist())

    def __array__(self, dtype=None, copy=None):
        return self.points if dtype is None else self.points.astype(dtype)

    def without(self, x):
        return Configuration(self.points[self.points != x])


def points_of(X):
    return X.points if isinstance(X, Configuration) else np.asarray(X, dtype=float)


@dataclass(frozen=True, eq=False)
class CampbellSample:
    anchor: float
    config: Configuration
    normalizer: float  # integral of chi * rho_1, the total mass being sampled

    def __post_init__(self):
        if np.any(self.config.points == self.anchor):
            raise ValueError("reduced Palm convention: the anchor is not part of the configuration")


@dataclass(frozen=True, eq=False)
class DiscretizedKernel:
    kernel: object
    quad: Quadrature
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def nodes(self):
        return self.quad.nodes

    @property
    def weights(self):
        return self.quad.weights

    @property
    def trace(self):
        return float(np.trace(self.matrix))

    @property
    def expected_count(self):
        return float(self.quad.integrate(self.kernel.diag(self.nodes)))


def discretize(k, n_nodes=200, *, order=10, breakpoints=(), refine_at=(),
               refine_radius=0.5, refine_factor=5) -> DiscretizedKernel:
    """Composite Gauss-Legendre discretization of ``k`` on its window.

    ``n_nodes`` sets the base panel width (window length * order / n_nodes);
    breakpoints and refinement around ``refine_at`` add nodes on top.
    """
    if n_nodes < 16:
        raise ValueError("n_nodes must be >= 16")
    order = min(order, n_nodes)
    w = k.window
    n_panels = int(np.ceil(n_nodes / order))
    width = w.length / n_panels
    refine = [(a, refine_radius, width / refine_factor) for a in refine_at]
    q = composite_gauss_legendre(w.lo, w.hi, panel_width=width, order=order,
                                 breakpoints=breakpoints, refine=refine, graded=k.grading())
    sw = np.sqrt(q.weights)
    M = sw[:, None] * k.matrix(q.nodes) * sw[None, :]
    asym = np.max(np.abs(M - M.T))
    if asym > 1e-12 * max(1.0, np.max(np.abs(M))):
        raise EigenError(f"discretized kernel not symmetric (residual {asym:.3g})")
    M = 0.5 * (M + M.T)
    try:
        lam, U = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise EigenError("eigensolver failed") from exc
    if lam[0] < -EIGEN_EXCURSION or lam[-1] > 1 + EIGEN_EXCURSION:
        raise EigenError(f"eigenvalues outside [0, 1]: [{lam[0]:.3g}, {lam[-1]:.3g}]")
    lam = np.clip(lam, 0.0, 1.0)
    return DiscretizedKernel(k, q, M, lam, U)


def _projection_sample(V, rng):
    """Node indices of a projection DPP with orthonormal columns ``V``."""
    n, k = V.shape
    idx = np.empty(k, dtype=np.intp)
    if k == 0:
        return idx
    norms = np.einsum("ij,ij->i", V, V)
    C = np.empty((n, k))
    for it in range(k):
        p = np.maximum(norms, 0.0)
        cum = np.cumsum(p)
        j = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), n - 1)
        idx[it] = j
        c = V @ V[j]
        if it:
            c -= C[:, :it] @ C[j, :it]
        c /= np.sqrt(p[j])
        C[:, it] = c
        norms -= c * c
    return idx


class SpectralSampler:
    """Exact sampler of the discretized process and of its Palm versions."""

    def __init__(self, disc: DiscretizedKernel, mode_cutoff=MODE_CUTOFF):
        self.disc = disc
        keep = disc.eigenvalues > mode_cutoff
        self.lam = disc.eigenvalues[keep]
        self.U = disc.eigenvectors[:, keep]
        self.sqrt_w = np.sqrt(disc.weights)

    @property
    def kernel(self):
        return self.disc.kernel

    def _draw(self, lam, vecs, rng):
        sel = rng.random(lam.size) < lam
        idx = _projection_sample(vecs[:, sel], rng)
        q = self.disc.quad
        lo, hi = q.cell_lo[idx], q.cell_hi[idx]
        pts = lo + rng.random(idx.size) * (hi - lo)
        return Configuration(pts)

    def sample(self, rng) -> Configuration:
        return self._draw(self.lam, self.U, rng)

    def palm_modes(self, anchors, intensity_floor=INTENSITY_FLOOR):
        k = self.kernel
        G = np.diag(self.lam)
        nodes = self.disc.nodes
        for a in anchors:
            k.check_domain(a)
            c = float(k.diag(a))
            if c <= intensity_floor:
                raise DegenerateIntensityError(f"intensity {c:.3g} at anchor {a} is below the floor")
            q = self.U.T @ (self.sqrt_w * k(nodes, a))
            G = G - np.outer(q, q) / c
            k = palm_reduce(k, a, intensity_floor)
        mu, V = np.linalg.eigh(0.5 * (G + G.T))
        return np.clip(mu, 0.0, 1.0), self.U @ V

    def sample_palm(self, anchors, rng) -> Configuration:
        anchors = list(np.atleast_1d(np.asarray(anchors, dtype=float)))
        if not anchors:
            return self.sample(rng)
        mu, vecs = self.palm_modes(anchors)
        return self._draw(mu, vecs, rng)


@lru_cache(maxsize=32)
def spectral_sampler(k, n_nodes=200, refine_at=()) -> SpectralSampler:
    return SpectralSampler(discretize(k, n_nodes, refine_at=refine_at))


def _windowed(k, window):
    if window is None or (isinstance(window, Window) and window == k.window):
        return k
    return with_window(k, window)


def sample_dpp(disc: DiscretizedKernel, rng) -> Configuration:
    return SpectralSampler(disc).sample(rng)


def sample_palm(k, anchors, window=None, n_nodes=200, rng=None) -> Configuration:
    """One sample of the reduced Palm process of ``k`` at ``anchors``."""
    k = _windowed(k, window)
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    return spectral_sampler(k, n_nodes).sample_palm(anchors, rng)


class CampbellSampler:
    """Draws (a, X) with a prop. to chi(a) rho_1(a) and X from the Palm process at a.

    ``support`` is an interval containing the support of ``chi`` (defaults to
    the window).  Anchors come from rejection sampling under a flat envelope
    set from a fine grid.
    """

    def __init__(self, k, chi, support=None, n_nodes=200, sampler=None, grid=4096):
        self.kernel = k
        self.chi = chi
        lo, hi = support if support is not None else (k.window.lo, k.window.hi)
        lo, hi = max(lo, k.window.lo), min(hi, k.window.hi)
        if k.strictly_positive_domain:
            lo = max(lo, 1e-12)
        self.support = (lo, hi)
        self.sampler = sampler or spectral_sampler(k, n_nodes)
        g = np.linspace(lo, hi, grid)
        f = self.density(g)
        self.envelope = 1.05 * float(np.max(f))
        q = composite_gauss_legendre(lo, hi, n_panels=64, order=12, graded=k.grading())
        self.normalizer = float(q.integrate(self.density(q.nodes)))
        if not self.normalizer > 0:
            raise DegenerateIntensityError("integral of chi * rho_1 is not positive")

    def density(self, a):
        a = np.asarray(a, dtype=float)
        return np.asarray(self.chi(a), dtype=float) * self.kernel.diag(a)

    def draw_anchor(self, rng):
        lo, hi = self.support
        while True:
            a = lo + (hi - lo) * rng.random(16)
            f = self.density(a)
            if np.any(f > self.envelope):
                raise RuntimeError("rejection envelope violated; increase the grid")
            ok = (rng.random(16) * self.envelope < f) & (self.kernel.diag(a) > INTENSITY_FLOOR)
            if ok.any():
                return float(a[np.argmax(ok)])

    def draw(self, rng) -> CampbellSample:
        a = self.draw_anchor(rng)
        return CampbellSample(a, self.sampler.sample_palm([a], rng), self.normalizer)


def sample_campbell(k, chi, window=None, n_nodes=200, rng=None, support=None) -> CampbellSample:
    k = _windowed(k, window)
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    return CampbellSampler(k, chi, support, n_nodes).draw(rng)


def count_in(X, lo, hi) -> int:
    """Number of points in [lo, hi)."""
    if not lo < hi:
        raise ValueError("count_in needs lo < hi")
    p = points_of(X)
    return int(np.count_nonzero((p >= lo) & (p < hi)))


def bin_counts(samples, edges):
    edges = np.asarray(edges, dtype=float)
    return np.array([np.histogram(points_of(X), bins=edges)[0] for X in samples], dtype=float)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    n_samples: int

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self):
        return np.diff(self.edges)


def empirical_intensity(samples, bins) -> Histogram:
    """Per-bin mean count divided by bin width, with standard errors."""
    samples = list(samples)
    if not samples:
        raise ValueError("empirical_intensity needs at least one sample")
    edges = np.asarray(bins, dtype=float)
    counts = bin_counts(samples, edges)
    width = np.diff(edges)
    n = len(samples)
    se = counts.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(width.size)
    return Histogram(edges, counts.mean(axis=0) / width, se / width, n)


__all__ = [
    "Configuration", "CampbellSample", "DiscretizedKernel", "SpectralSampler", "CampbellSampler",
    "discretize", "sample_dpp", "sample_palm", "sample_campbell", "count_in",
    "empirical_intensity", "Histogram", "spectral_sampler", "palm_kernel", "PalmKernel",
]
