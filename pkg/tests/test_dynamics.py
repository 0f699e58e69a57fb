import numpy as np
import pytest

from dpplog.dynamics import (CollisionError, DiffusionConfig, DiffusionState, closed_form_drift,
                             drift, evolve, initial_ensemble, run_diffusion, stationarity_report,
                             step)
from dpplog.kernels import HermiteKernel, SineKernel, Window
from dpplog.logderiv import RegularizationSchedule

H6 = HermiteKernel(6)


def test_state_invariants():
    s = DiffusionState([1.0, -1.0])
    assert list(s.positions) == [-1.0, 1.0]
    with pytest.raises(ValueError):
        DiffusionState([0.5, 0.5])
    with pytest.raises(ValueError):
        DiffusionState([0.0], time=-1)


def test_config_validation():
    with pytest.raises(ValueError):
        DiffusionConfig(dt=0.3, T=1.0)
    with pytest.raises(ValueError):
        DiffusionConfig(drift_mode="estimated")
    assert DiffusionConfig(dt=1e-3, T=0.5).n_steps == 500


@pytest.mark.parametrize("c", [0.3, 0.7071, 2.0])
def test_two_particle_drift(c):
    st = DiffusionState([-c, c])
    cfg = DiffusionConfig()
    left, right = drift(0, st, H6, cfg), drift(1, st, H6, cfg)
    assert left == pytest.approx(c - 1 / (2 * c))
    assert right == pytest.approx(-left)


def test_drift_antisymmetric_under_reflection():
    x = np.array([-2.1, -0.4, 0.3, 1.7])
    assert np.allclose(closed_form_drift(-x[::-1]), -closed_form_drift(x)[::-1])


def test_estimated_drift_matches_closed_form():
    k = H6
    sched = RegularizationSchedule(((7, 0.1), (8, 0.05), (k.window.half_width, 0.01)))
    cfg_e = DiffusionConfig(drift_mode="estimated", schedule=sched)
    x = initial_ensemble(k, 1, 3)[0]
    st = DiffusionState(x)
    closed = closed_form_drift(x)
    for i in range(x.size):
        assert abs(drift(i, st, k, cfg_e) - closed[i]) < 1e-3


def test_seed_determinism():
    x0 = initial_ensemble(H6, 4, 1)
    cfg = DiffusionConfig(dt=1e-3, T=0.05)
    a, _, _ = evolve(x0, H6, cfg, 9)
    b, _, _ = evolve(x0, H6, cfg, 9)
    assert np.array_equal(a, b)


def test_zero_noise_relaxes_to_equilibrium_gap():
    cfg = DiffusionConfig(dt=1e-3, T=3.0, noise=False)
    st = DiffusionState([-0.2, 0.2])
    gaps = []
    for _ in range(cfg.n_steps):
        st = step(st, H6, cfg, 0)
        gaps.append(st.positions[1] - st.positions[0])
    assert np.all(np.diff(gaps) >= -1e-15)
    assert gaps[-1] / 2 == pytest.approx(1 / np.sqrt(2), abs=1e-3)


def test_euler_consistency_as_dt_shrinks():
    x = np.array([-1.0, 0.2, 1.5])
    target = closed_form_drift(x)
    for dt in (1e-2, 1e-4, 1e-6):
        cfg = DiffusionConfig(dt=dt, T=dt)
        z = np.random.default_rng(4).standard_normal((1, 3))[0]
        moved = step(DiffusionState(x), H6, cfg, 4).positions - x
        assert np.allclose((moved - np.sqrt(dt) * z) / dt, target, atol=1e-6)
        calm = step(DiffusionState(x), H6, DiffusionConfig(dt=dt, T=dt, noise=False), 4)
        assert np.allclose((calm.positions - x) / dt, target, atol=1e-6)


def test_t_zero_report_is_zero():
    x0 = initial_ensemble(H6, 50, 4)
    rep = stationarity_report(x0, x0, H6, 0.0)
    assert np.all(rep.z_density == 0) and rep.gap_ks == 0 and rep.max_abs_z == 0
    assert rep.collision_rate == 0 and rep.passed
    d = rep.to_dict()
    assert d["T"] == 0.0 and d["passed"] is True


def test_exchangeable_output():
    x0 = initial_ensemble(H6, 3, 2)
    xT, failed, snaps = evolve(x0[:, ::-1], H6, DiffusionConfig(dt=1e-3, T=0.01), 5, snapshot_every=5)
    assert np.all(np.diff(xT, axis=1) > 0) and not failed.any()
    assert [t for t, _ in snaps] == pytest.approx([0.0, 0.005, 0.01])


def test_collision_guard():
    cfg = DiffusionConfig(dt=1e-3, T=1e-3, collision_floor=0.5)
    with pytest.raises(CollisionError):
        step(DiffusionState([0.0, 0.3]), H6, cfg, 0)


def test_run_diffusion_small():
    rep = run_diffusion(HermiteKernel(3), DiffusionConfig(dt=1e-3, T=0.05), 200, rng=3, chunk=100)
    assert rep.n_trajectories == 200 and rep.collision_rate == 0
    assert rep.max_abs_z < 4.5
    assert np.max(np.abs(rep.z_exact)) < 4.5
    with pytest.raises(ValueError):
        run_diffusion(SineKernel(Window(-5, 5)), DiffusionConfig(dt=1e-3, T=0.01), 10)
