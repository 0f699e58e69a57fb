import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpplog.kernels import HermiteKernel, KernelDomainError, SineKernel, Window
from dpplog.palm import PalmKernel, palm_intensity, palm_kernel, palm_reduce
from dpplog.quadrature import composite_gauss_legendre

SINE = SineKernel(Window(-10, 10))
GRID = np.linspace(-4, 4, 33)


def test_anchor_row_vanishes():
    pk = palm_reduce(SINE, 0.0)
    assert np.max(np.abs(pk(0.0, GRID))) < 1e-15
    assert palm_intensity(pk, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_hand_value():
    pk = palm_reduce(SINE, 0.0)
    assert float(pk(0.5, 0.5)) == pytest.approx(1 - (2 / np.pi) ** 2, abs=1e-14)
    assert float(palm_intensity(pk, 0.5)) == pytest.approx(0.5947152654, abs=1e-9)


def test_matches_schur_complement():
    anchors = [0.3, -1.1, 2.4]
    pk = palm_kernel(SINE, anchors)
    a = np.array(anchors)
    Kaa = SINE.matrix(a)
    Kxa = SINE.matrix(GRID, a)
    schur = SINE.matrix(GRID) - Kxa @ np.linalg.solve(Kaa, Kxa.T)
    assert np.allclose(pk.matrix(GRID), schur, atol=1e-13)
    assert np.allclose(pk.diag(GRID), np.diag(schur), atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_commutes(a, b):
    if abs(a - b) < 1e-3:
        return
    p1 = palm_reduce(palm_reduce(SINE, a), b)
    p2 = palm_reduce(palm_reduce(SINE, b), a)
    assert np.max(np.abs(p1.matrix(GRID) - p2.matrix(GRID))) < 1e-10


def test_symmetric_and_nonnegative():
    pk = palm_kernel(SINE, [0.2, 1.7])
    M = pk.matrix(GRID)
    assert np.max(np.abs(M - M.T)) < 1e-13
    assert np.min(pk.diag(np.linspace(-10, 10, 2001))) >= -1e-10


def test_second_order_vanishing():
    pk = palm_reduce(SINE, 0.4)
    r = [float(pk.diag(0.4 + h)) / h**2 for h in (1e-3, 1e-4)]
    assert r[0] == pytest.approx(r[1], rel=0.1)
    assert r[1] == pytest.approx(np.pi**2 / 3, rel=1e-3)


def test_degenerate_anchor_returns_base():
    k = HermiteKernel(1, Window(-60, 60))
    assert palm_reduce(k, 50.0) is k
    # repeated anchor: second reduction sees zero intensity
    pk = palm_reduce(SINE, 0.0)
    assert palm_reduce(pk, 0.0) is pk


def test_trace_drops_by_one():
    k = HermiteKernel(4)
    q = composite_gauss_legendre(k.window.lo, k.window.hi, panel_width=0.5, order=12)
    pk = palm_reduce(k, 0.7)
    assert q.integrate(pk.diag(q.nodes)) == pytest.approx(3.0, abs=1e-10)


def test_domain_error():
    with pytest.raises(KernelDomainError):
        palm_reduce(SINE, 12.0)


def test_lazy_kernel_off_grid():
    pk = palm_kernel(SINE, [0.0])
    assert isinstance(pk, PalmKernel)
    x = 0.123456
    expected = 1 - np.sinc(x) ** 2
    assert float(pk.diag(x)) == pytest.approx(expected, abs=1e-14)
