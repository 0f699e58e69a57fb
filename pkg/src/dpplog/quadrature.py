"""Composite Gauss-Legendre rules with breakpoints and local refinement."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special


@lru_cache(maxsize=64)
def _reference_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True, eq=False)
class Quadrature:
    """Nodes and weights of a quadrature rule, plus the cell owned by each node.

    The cells partition the integration interval: inside every panel the cell
    boundaries are the running sums of the weights, so that a cell has length
    equal to its node's weight.
    """

    nodes: np.ndarray
    weights: np.ndarray
    cell_lo: np.ndarray
    cell_hi: np.ndarray

    def __len__(self):
        return self.nodes.size

    def integrate(self, values):
        return np.asarray(values) @ self.weights


def panel_edges(lo, hi, panel_width, breakpoints=(), refine=(), graded=()):
    """Panel boundaries on [lo, hi].

    ``refine`` is an iterable of ``(center, radius, width)``: inside
    ``[center - radius, center + radius]`` panels are at most ``width`` wide.
    ``graded`` is an iterable of ``(point, radius, levels)`` adding edges at
    ``point +- radius * 2**-j`` for geometric refinement toward an endpoint
    singularity.  A fourth entry, an exponent, is ignored here (see
    :func:`composite_gauss_legendre`).
    """
    if not lo < hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    n = max(1, int(np.ceil((hi - lo) / panel_width - 1e-9)))
    edges = [np.linspace(lo, hi, n + 1)]
    for c, r, w in refine:
        a, b = max(lo, c - r), min(hi, c + r)
        if a >= b:
            continue
        edges = [e[(e < a) | (e > b)] for e in edges]
        m = max(1, int(np.ceil((b - a) / w - 1e-9)))
        edges.append(np.linspace(a, b, m + 1))
    for c, r, levels, *_ in graded:
        g = r * 2.0 ** -np.arange(levels + 1)
        edges.append(np.clip(np.concatenate([c - g, c + g]), lo, hi))
    bp = [float(p) for p in breakpoints if lo < p < hi]
    e = np.unique(np.concatenate(edges + [np.asarray(bp, dtype=float), [lo, hi]]))
    # drop slivers produced by nearly coincident breakpoints
    keep = np.concatenate([[True], np.diff(e) > 1e-12 * (hi - lo)])
    e = e[keep]
    e[-1] = hi
    return e


def composite_gauss_legendre(lo, hi, *, panel_width=None, n_panels=None, order=10,
                             breakpoints=(), refine=(), graded=()) -> Quadrature:
    """Composite rule on [lo, hi].

    A ``graded`` entry ``(lo, radius, levels, beta)`` with ``beta != 0`` also
    switches the first panel to Gauss-Jacobi, exact for integrands
    (x - lo)^beta times a polynomial.
    """
    if panel_width is None:
        panel_width = (hi - lo) / (n_panels or 1)
    edges = panel_edges(lo, hi, panel_width, breakpoints, refine, graded)
    beta = next((g[3] for g in graded if len(g) > 3 and g[0] == lo and g[3] != 0), None)
    return rule_on_edges(edges, order, left_exponent=beta)


@lru_cache(maxsize=16)
def _jacobi_rule(order: int, beta: float):
    # weight (1 + t)^beta on [-1, 1], folded into the weights
    t, w = special.roots_jacobi(order, 0.0, beta)
    w = w * (1.0 + t) ** -beta
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def rule_on_edges(edges, order=10, left_exponent=None) -> Quadrature:
    xr, wr = _reference_rule(order)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) / 2 + half * xr
    weights = half * wr
    if left_exponent is not None:
        tj, wj = _jacobi_rule(order, float(left_exponent))
        nodes[0] = (a[0] + b[0]) / 2 + half[0] * tj
        weights[0] = half[0] * wj
    # cells tile each panel in proportion to the weights
    cum = np.cumsum(weights, axis=1)
    cell_hi = a + (b - a) * cum / cum[:, -1:]
    cell_lo = np.concatenate([a, cell_hi[:, :-1]], axis=1)
    cell_hi[:, -1] = edges[1:]
    return Quadrature(nodes.ravel(), weights.ravel(), cell_lo.ravel(), cell_hi.ravel())


def gauss_legendre(lo, hi, n) -> Quadrature:
    """Single n-point Gauss-Legendre rule on [lo, hi]."""
    return rule_on_edges([lo, hi], n)
