"""Reduced Palm kernels of projection kernels.

Conditioning on anchors a_1..a_m is a sequence of rank-one updates

    K_i(x, y) = K_{i-1}(x, y) - K_{i-1}(x, a_i) K_{i-1}(a_i, y) / K_{i-1}(a_i, a_i),

skipped when K_{i-1}(a_i, a_i) is below the intensity floor.  The updates are
applied lazily, so a Palm kernel can be evaluated anywhere in the window.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import INTENSITY_FLOOR, KernelModel


@dataclass(frozen=True, eq=False)
class PalmKernel:
    base: KernelModel
    anchors: tuple = ()
    # pivots d_i and the values e_j(a_i) of earlier columns at later anchors
    _pivots: tuple = field(default=(), repr=False)
    _cross: tuple = field(default=(), repr=False)

    @property
    def window(self):
        return self.base.window

    def check_domain(self, *xs):
        self.base.check_domain(*xs)

    def grading(self):
        return self.base.grading()

    def _columns(self, x):
        """e_i(x) = K_{i-1}(x, a_i) for every active anchor."""
        x = np.asarray(x, dtype=float)
        cols = []
        for i, a in enumerate(self.anchors):
            c = self.base(x, a)
            for j in range(i):
                if self._pivots[j] is not None:
                    c = c - cols[j] * self._cross[j][i] / self._pivots[j]
            cols.append(c)
        return cols

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = self.base(x, y)
        cx, cy = self._columns(x), self._columns(y)
        for d, ex, ey in zip(self._pivots, cx, cy):
            if d is not None:
                out = out - ex * ey / d
        return out

    def matrix(self, x, y=None):
        x = np.asarray(x, dtype=float)
        out = self.base.matrix(x, y)
        cx = self._columns(x)
        cy = cx if y is None else self._columns(y)
        for d, ex, ey in zip(self._pivots, cx, cy):
            if d is not None:
                out = out - np.outer(ex, ey) / d
        return out

    def diag(self, x):
        x = np.asarray(x, dtype=float)
        out = self.base.diag(x)
        for d, e in zip(self._pivots, self._columns(x)):
            if d is not None:
                out = out - e * e / d
        return out


def _extend(base, anchors, pivots, cross, a, intensity_floor):
    tmp = PalmKernel(base, anchors, pivots, cross)
    at_new = tmp._columns(np.asarray(a))
    d = float(tmp.diag(a))
    new_cross = tuple(c + (float(v),) for c, v in zip(cross, at_new))
    new_cross = new_cross + ((float("nan"),) * (len(anchors) + 1),)
    pivot = d if d > intensity_floor else None
    return PalmKernel(base, anchors + (a,), pivots + (pivot,), new_cross)


def palm_reduce(k, a: float, intensity_floor=INTENSITY_FLOOR):
    """Condition ``k`` (a kernel or a Palm kernel) on a point at ``a``.

    If the current intensity at ``a`` is at most ``intensity_floor`` the input
    kernel is returned unchanged.
    """
    a = float(a)
    k.check_domain(a)
    if isinstance(k, PalmKernel):
        base, anchors, pivots, cross = k.base, k.anchors, k._pivots, k._cross
    else:
        base, anchors, pivots, cross = k, (), (), ()
    if float(PalmKernel(base, anchors, pivots, cross).diag(a)) <= intensity_floor:
        return k
    return _extend(base, anchors, pivots, cross, a, intensity_floor)


def palm_kernel(k, anchors, intensity_floor=INTENSITY_FLOOR):
    for a in anchors:
        k = palm_reduce(k, a, intensity_floor)
    return k


def palm_intensity(pk, x):
    pk.check_domain(x)
    return pk.diag(x)
