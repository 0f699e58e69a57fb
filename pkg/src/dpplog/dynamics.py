"""Finite-N interacting diffusion with drift one half of the log-derivative.

    dx_i = 1/2 d(x_i, {x_j}_{j != i}) dt + dB_i

For the Hermite ensemble the log-derivative is -2 x_i + sum_j 2 / (x_i - x_j)
and these are the Dyson dynamics, which leave the ensemble invariant.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .kernels import HermiteKernel
from .logderiv import RegularizationSchedule, log_derivative
from .montecarlo import as_generator, run_chunks
from .sampler import spectral_sampler

MAX_HALVINGS = 10


class CollisionError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiffusionState:
    positions: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        p = np.sort(np.asarray(self.positions, dtype=float).ravel())
        if not np.all(np.isfinite(p)):
            raise ValueError("positions must be finite")
        if p.size > 1 and np.any(np.diff(p) <= 0):
            raise ValueError("positions must be pairwise distinct")
        if self.time < 0:
            raise ValueError("time must be nonnegative")
        p.setflags(write=False)
        object.__setattr__(self, "positions", p)


@dataclass(frozen=True)
class DiffusionConfig:
    dt: float = 1e-4
    T: float = 0.5
    drift_mode: str = "closed"  # "closed" or "estimated"
    schedule: RegularizationSchedule | None = None
    collision_floor: float = 1e-5
    confinement: float = 1.0  # multiplies the -2x term; 1 is the invariant drift
    noise: bool = True

    def __post_init__(self):
        if not (self.dt > 0 and self.T >= 0 and self.collision_floor > 0):
            raise ValueError("need dt > 0, T >= 0 and collision_floor > 0")
        if abs(self.T / self.dt - round(self.T / self.dt)) > 1e-9:
            raise ValueError("T must be a multiple of dt")
        if self.drift_mode not in ("closed", "estimated"):
            raise ValueError("drift_mode must be 'closed' or 'estimated'")
        if self.drift_mode == "estimated" and self.schedule is None:
            raise ValueError("estimated drift needs a schedule")

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))


def _check_gaps(x, floor):
    if x.shape[-1] > 1 and np.min(np.diff(np.sort(x, axis=-1), axis=-1)) < floor:
        raise CollisionError(f"particles closer than {floor}")


def closed_form_drift(x, confinement=1.0):
    """1/2 (-2c x_i + sum_{j != i} 2 / (x_i - x_j)) for the last axis of ``x``."""
    x = np.asarray(x, dtype=float)
    d = x[..., :, None] - x[..., None, :]
    n = x.shape[-1]
    d[..., np.arange(n), np.arange(n)] = np.inf
    return -confinement * x + np.sum(1.0 / d, axis=-1)


def drift(i, state: DiffusionState, k, cfg: DiffusionConfig):
    x = state.positions
    _check_gaps(x, cfg.collision_floor)
    if cfg.drift_mode == "closed":
        return float(closed_form_drift(x, cfg.confinement)[i])
    others = np.delete(x, i)
    est = log_derivative(k, x[i], cfg.schedule, others)
    # the confinement factor only perturbs the closed form
    return 0.5 * est.extrapolated


def _drift_all(x, k, cfg):
    if cfg.drift_mode == "closed":
        return closed_form_drift(x, cfg.confinement)
    flat = x.reshape(-1, x.shape[-1])
    out = np.empty_like(flat)
    for r, row in enumerate(flat):
        st = DiffusionState(row)
        out[r] = [drift(i, st, k, cfg) for i in range(row.size)]
    return out.reshape(x.shape)


def _ok(x, floor):
    if x.shape[-1] < 2:
        return np.ones(x.shape[:-1], dtype=bool)
    return np.all(np.diff(x, axis=-1) >= floor, axis=-1)


def _advance(x, dW, dt, k, cfg, rng, depth=0):
    """Euler step for rows of ``x``; rows that collide are split with a Brownian bridge."""
    new = x + _drift_all(x, k, cfg) * dt + dW
    bad = ~_ok(new, cfg.collision_floor)
    if not bad.any():
        return new
    if depth >= MAX_HALVINGS:
        raise CollisionError(f"collision persists after {MAX_HALVINGS} halvings")
    xb, Wb = x[bad], dW[bad]
    # midpoint of the Brownian path given its endpoint
    half = 0.5 * Wb + (np.sqrt(dt / 4) * rng.standard_normal(Wb.shape) if cfg.noise else 0.0)
    mid = _advance(xb, half, dt / 2, k, cfg, rng, depth + 1)
    new[bad] = _advance(mid, Wb - half, dt / 2, k, cfg, rng, depth + 1)
    return new


def step(state: DiffusionState, k, cfg: DiffusionConfig, rng) -> DiffusionState:
    rng = as_generator(rng)
    x = state.positions[None, :].copy()
    _check_gaps(x, cfg.collision_floor)
    dW = np.sqrt(cfg.dt) * rng.standard_normal(x.shape) if cfg.noise else np.zeros_like(x)
    new = _advance(x, dW, cfg.dt, k, cfg, rng)
    return DiffusionState(np.sort(new[0]), state.time + cfg.dt)


def evolve(x0, k, cfg: DiffusionConfig, rng, snapshot_every=None):
    """Evolve an ensemble ``x0`` of shape (M, N) to time T.

    Returns the final array, a boolean mask of trajectories that hit the
    collision limit (frozen at their last valid position) and a list of
    (time, array) snapshots.
    """
    rng = as_generator(rng)
    x = np.sort(np.array(x0, dtype=float), axis=-1)
    failed = np.zeros(x.shape[0], dtype=bool)
    snaps = [(0.0, x.copy())] if snapshot_every else []
    sq = np.sqrt(cfg.dt)
    for s in range(cfg.n_steps):
        live = ~failed
        dW = sq * rng.standard_normal(x.shape) if cfg.noise else np.zeros_like(x)
        try:
            x[live] = _advance(x[live], dW[live], cfg.dt, k, cfg, rng)
        except CollisionError:
            for r in np.flatnonzero(live):
                try:
                    x[r] = _advance(x[r:r + 1], dW[r:r + 1], cfg.dt, k, cfg, rng)[0]
                except CollisionError:
                    failed[r] = True
        if snapshot_every and (s + 1) % snapshot_every == 0:
            snaps.append(((s + 1) * cfg.dt, x.copy()))
    return np.sort(x, axis=-1), failed, snaps


@dataclass(frozen=True)
class StationarityReport:
    edges: np.ndarray
    density_0: np.ndarray
    density_T: np.ndarray
    z_density: np.ndarray  # time T against time 0, per bin
    z_exact: np.ndarray  # time T against the exact intensity, per bin
    gap_ks: float  # two-sample KS distance of nearest-neighbour gaps
    gap_ks_pvalue: float
    collision_rate: float
    n_trajectories: int
    T: float

    @property
    def max_abs_z(self):
        return float(np.max(np.abs(self.z_density))) if self.z_density.size else 0.0

    @property
    def passed(self):
        return self.max_abs_z < 3 and self.collision_rate <= 0.01

    def to_dict(self):
        return {
            "T": self.T, "n_trajectories": self.n_trajectories,
            "edges": self.edges.tolist(), "density_0": self.density_0.tolist(),
            "density_T": self.density_T.tolist(), "z_density": self.z_density.tolist(),
            "z_exact": self.z_exact.tolist(), "max_abs_z": self.max_abs_z,
            "gap_ks": self.gap_ks, "gap_ks_pvalue": self.gap_ks_pvalue,
            "collision_rate": self.collision_rate, "passed": self.passed,
        }


def _bin_stats(x, edges):
    counts = np.stack([np.histogram(row, bins=edges)[0] for row in x]).astype(float)
    n = counts.shape[0]
    width = np.diff(edges)
    se = counts.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(width.size)
    return counts.mean(axis=0) / width, se / width


def _nn_gaps(x):
    if x.shape[1] < 2:
        return np.empty(0)
    d = np.diff(x, axis=1)
    left = np.concatenate([np.full((x.shape[0], 1), np.inf), d], axis=1)
    right = np.concatenate([d, np.full((x.shape[0], 1), np.inf)], axis=1)
    return np.minimum(left, right).ravel()


def stationarity_report(x0, xT, k, T, edges=None, failed=None) -> StationarityReport:
    x0, xT = np.asarray(x0), np.asarray(xT)
    ok = np.ones(x0.shape[0], dtype=bool) if failed is None else ~np.asarray(failed)
    if edges is None:
        L = np.sqrt(2 * x0.shape[1]) + 1.0
        edges = np.linspace(-L, L, 13)
    edges = np.asarray(edges, dtype=float)
    d0, s0 = _bin_stats(x0, edges)
    dT, sT = _bin_stats(xT[ok], edges)
    se = np.hypot(s0, sT)
    z = np.where(se > 0, (dT - d0) / np.where(se > 0, se, 1), 0.0)
    exact = np.array([_bin_mean(k, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])])
    z_exact = np.where(sT > 0, (dT - exact) / np.where(sT > 0, sT, 1), 0.0)
    g0, gT = _nn_gaps(x0), _nn_gaps(xT[ok])
    if g0.size and gT.size and not np.array_equal(g0, gT):
        ks = stats.ks_2samp(g0, gT)
        ks_stat, ks_p = float(ks.statistic), float(ks.pvalue)
    else:
        ks_stat, ks_p = 0.0, 1.0
    return StationarityReport(edges, d0, dT, z, z_exact, ks_stat, ks_p,
                              float(1 - ok.mean()), int(x0.shape[0]), float(T))


def _bin_mean(k, lo, hi):
    from .quadrature import composite_gauss_legendre
    q = composite_gauss_legendre(lo, hi, panel_width=0.25, order=10)
    return float(q.integrate(k.diag(q.nodes))) / (hi - lo)


def initial_ensemble(k, n_trajectories, rng, n_nodes=400):
    """Exact samples of a finite-rank ensemble, as an (M, N) array."""
    rng = as_generator(rng)
    sp = spectral_sampler(k, n_nodes)
    rows = [sp.sample(rng).points for _ in range(n_trajectories)]
    sizes = {r.size for r in rows}
    if len(sizes) != 1:
        raise ValueError("initial configurations have varying sizes; need a finite-rank projection")
    return np.stack(rows)


def _evolve_chunk(n, rng, k, cfg, n_nodes):
    x0 = initial_ensemble(k, n, rng, n_nodes)
    xT, failed, _ = evolve(x0, k, cfg, rng)
    return x0, xT, failed


def run_diffusion(k, cfg: DiffusionConfig, n_trajectories, rng=0, *, edges=None,
                  workers=1, chunk=100, n_nodes=400) -> StationarityReport:
    """Evolve ``n_trajectories`` exact samples of ``k`` to time T and compare ensembles.

    Raises :class:`CollisionError` if more than 1% of trajectories exhaust
    the collision guard.
    """
    if not isinstance(k, HermiteKernel) and cfg.drift_mode == "closed":
        raise ValueError("the closed-form drift is the Hermite ensemble's")
    seed = rng if not isinstance(rng, np.random.Generator) else int(rng.integers(2**63))
    parts = run_chunks(_evolve_chunk, n_trajectories, seed, chunk=chunk, workers=workers,
                       args=(k, cfg, n_nodes))
    x0 = np.concatenate([p[0] for p in parts])
    xT = np.concatenate([p[1] for p in parts])
    failed = np.concatenate([p[2] for p in parts])
    report = stationarity_report(x0, xT, k, cfg.T, edges, failed)
    if report.collision_rate > 0.01:
        raise CollisionError(f"collision rate {report.collision_rate:.3%} exceeds 1%")
    return report
