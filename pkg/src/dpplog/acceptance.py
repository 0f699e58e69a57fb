"""Acceptance suite: eight property checks at fixed seeds.

Each criterion returns a :class:`CriterionResult`; ``quick=True`` cuts the
sample sizes (same tolerances, less power).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DiffusionConfig, run_diffusion
from .functionals import (CutoffSpec, TestFunction, combine, gaussian_bump, indicator,
                          smooth_bump, variance_norm)
from .kernels import HermiteKernel, SineKernel, Window
from .logderiv import (STANDARD_PSI, RegularizationSchedule, coulomb_cutoff_function,
                       dlnC_consistency, hermite_log_derivative, ibp_battery, log_derivative,
                       palm_coulomb_means, radon_nikodym_factor)
from .montecarlo import mean_estimate, mean_square_estimate, spawn_generators, variance_estimate
from .palm import palm_kernel
from .quadrature import composite_gauss_legendre
from .sampler import (CampbellSampler, SpectralSampler, count_in, discretize, empirical_intensity,
                      spectral_sampler)

Z_MAX = 3.0


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number} ({self.title}): {self.summary} [{self.seconds:.0f}s]"

    def to_dict(self):
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "summary": self.summary, "seconds": self.seconds, "details": self.details}


def _sizes(quick, full, reduced):
    return reduced if quick else full


def sine(W=10.0):
    return SineKernel(Window(-W, W))


def isometry_battery():
    ramp = TestFunction(lambda x: np.clip(x, -3.0, 3.0), (-3.0, 3.0), name="ramp(-3,3)")
    return [indicator(0.0, 1.0), indicator(-2.5, 1.5), gaussian_bump(0.0, 1.0),
            smooth_bump(1.0, 2.0), ramp]


def criterion_1(rng, quick=False):
    """Monte Carlo variance of S_f against the V(Pi) norm."""
    n = _sizes(quick, 20000, 2000)
    funcs = isometry_battery()
    bps = sorted({p for f in funcs for p in f.breakpoints})
    rows, ok = [], True
    for name, k, nodes in (("sine", sine(10.0), 1600), ("hermite:5", HermiteKernel(5), 400)):
        sp = SpectralSampler(discretize(k, nodes, breakpoints=bps))
        S = np.empty((len(funcs), n))
        for i in range(n):
            p = sp.sample(rng).points
            for j, f in enumerate(funcs):
                S[j, i] = np.sum(f(p))
        for j, f in enumerate(funcs):
            mc = variance_estimate(S[j])
            oracle = variance_norm(f, k)
            z = abs(mc.value - oracle) / mc.stderr
            ok &= z < Z_MAX
            rows.append({"kernel": name, "f": f.name, "mc": mc.value, "stderr": mc.stderr,
                         "oracle": oracle, "z": z})
    zmax = max(r["z"] for r in rows)
    return ok, f"{len(rows)} variance checks, max z = {zmax:.2f} (n = {n})", {"rows": rows}


def criterion_2(rng, quick=False):
    """Palm samples of a rank-N projection have N - 1 points and a hole at the anchor."""
    n = _sizes(quick, 10000, 2000)
    N, a = 6, 0.3
    k = HermiteKernel(N)
    sp = spectral_sampler(k, 400)
    samples = [sp.sample_palm([a], rng) for _ in range(n)]
    sizes = np.array([len(X) for X in samples])
    reach = np.ceil((k.window.half_width - 0.05) / 0.1)
    edges = a - 0.05 + 0.1 * np.arange(-reach, reach + 1)
    edges = edges[(edges >= k.window.lo) & (edges <= k.window.hi)]
    hist = empirical_intensity(samples, edges)
    inner = int(np.searchsorted(edges, a, side="right") - 1)
    peak = float(hist.density.max())
    ratio = float(hist.density[inner]) / peak
    card_ok = bool(np.all(sizes == N - 1))
    ok = card_ok and ratio < 0.05
    pk = palm_kernel(k, [a])
    q = composite_gauss_legendre(edges[inner], edges[inner + 1], n_panels=1, order=10)
    exact_inner = float(q.integrate(pk.diag(q.nodes))) / 0.1
    return ok, (f"cardinality {'always' if card_ok else 'NOT always'} {N - 1}; innermost bin "
                f"{hist.density[inner]:.4f} (exact {exact_inner:.4f}), ratio to peak {peak:.3f} is "
                f"{ratio:.4f} (n = {n})"), {
        "sizes": sorted(set(sizes.tolist())), "inner_density": float(hist.density[inner]),
        "inner_exact": exact_inner, "peak": peak, "ratio": ratio}


def _clip_schedule(pairs, W):
    out = []
    for R, d in pairs:
        p = (min(R, W), d)
        if not out or out[-1] != p:
            out.append(p)
    return out


def criterion_3(rng, quick=False):
    """L2 Cauchy gaps of the normalized regularized Coulomb sum against the V(Pi^a) norm."""
    n = _sizes(quick, 10000, 5000)
    a = 0.3
    base = [(5.0, 0.2), (10.0, 0.1), (20.0, 0.05)]
    rows, ok = [], True
    for W in (10.0, 20.0, 40.0):
        k = sine(W)
        pairs = _clip_schedule(base, W)
        sp = spectral_sampler(k, int(40 * W), (a,))
        means = palm_coulomb_means(k, a, pairs)
        pk = palm_kernel(k, [a])
        Sbar = np.empty((n, len(pairs)))
        for i in range(n):
            p = sp.sample_palm([a], rng).points
            for j, (R, d) in enumerate(pairs):
                m = (np.abs(p) < R) & (np.abs(p - a) > d)
                Sbar[i, j] = np.sum(2.0 / (a - p[m])) - means[j]
        gaps = []
        for j in range(len(pairs) - 1):
            D = Sbar[:, j] - Sbar[:, j + 1]
            ms = mean_square_estimate(D)
            f = combine([1.0, -1.0], [coulomb_cutoff_function(a, *pairs[j]),
                                      coulomb_cutoff_function(a, *pairs[j + 1])])
            oracle = variance_norm(f, pk)
            z = abs(ms.value - oracle) / ms.stderr
            ok &= z < Z_MAX
            gaps.append(ms.value)
            rows.append({"W": W, "from": pairs[j], "to": pairs[j + 1], "l2_gap": np.sqrt(ms.value),
                         "mean_square": ms.value, "stderr": ms.stderr, "oracle": oracle, "z": z})
        mono = all(g1 < g0 for g0, g1 in zip(gaps, gaps[1:]))
        ok &= mono
        centering = [mean_estimate(Sbar[:, j]) for j in range(len(pairs))]
        rows.append({"W": W, "monotone": mono,
                     "centering_z": [abs(c.value) / c.stderr for c in centering]})
    zs = [r["z"] for r in rows if "z" in r]
    by_w = {}
    for r in rows:
        if "l2_gap" in r:
            by_w.setdefault(r["W"], []).append(f"{r['l2_gap']:.3f}")
    gap_txt = "; ".join(f"W={W:g}: " + " -> ".join(g) for W, g in by_w.items())
    return ok, f"gaps {gap_txt}; max z = {max(zs):.2f} (n = {n} per window)", {"rows": rows}


def criterion_4(rng, quick=False):
    """Regularized log-derivative against the exact Hermite formula."""
    n = _sizes(quick, 100, 30)
    worst, rows = 0.0, []
    for N in (2, 4, 8):
        k = HermiteKernel(N)
        W = k.window.half_width
        sched = RegularizationSchedule(((W, 1e-2), (W, 1e-3), (W, 1e-4)))
        cs = CampbellSampler(k, lambda x: np.ones_like(x), sampler=spectral_sampler(k, 400))
        err = 0.0
        for _ in range(n):
            s = cs.draw(rng)
            est = log_derivative(k, s.anchor, sched, s.config)
            err = max(err, abs(est.extrapolated - hermite_log_derivative(s.anchor, s.config)))
        rows.append({"N": N, "max_abs_error": err})
        worst = max(worst, err)
    return worst < 1e-4, f"max |error| = {worst:.2e} over {3 * n} (a, X) pairs", {"rows": rows}


def criterion_5(rng, quick=False):
    """Integration by parts against the Campbell measure."""
    n = _sizes(quick, 100000, 5000)
    rows, ok = [], True
    for name, k, nodes in (("sine", sine(10.0), 1600), ("hermite:4", HermiteKernel(4), 400),
                           ("hermite:8", HermiteKernel(8), 400)):
        W = k.window.half_width
        if name == "sine":
            sched = RegularizationSchedule(((W - 1, 1e-2), (W - 0.5, 1e-3), (W, 1e-4)))
        else:
            sched = RegularizationSchedule(((W, 1e-2), (W, 1e-3), (W, 1e-4)))
        for r in ibp_battery(k, STANDARD_PSI, sched, n, rng, n_nodes=nodes):
            ok &= r.z_score < Z_MAX
            rows.append({"kernel": name, "psi": r.name, "lhs": r.lhs.value,
                         "lhs_stderr": r.lhs.stderr, "rhs": r.rhs.value,
                         "rhs_stderr": r.rhs.stderr, "z": r.z_score,
                         "nonconverged_fraction": r.nonconverged_fraction})
    zmax = max(r["z"] for r in rows)
    return ok, f"{len(rows)} observables, max z = {zmax:.2f} (n = {n})", {"rows": rows}


def _rn_observables():
    return {"count[0,1)": lambda X: float(count_in(X, 0.0, 1.0)),
            "count[-0.3,0.3)": lambda X: float(count_in(X, -0.3, 0.3)),
            "bump-0.5": STANDARD_PSI["bump-0.5"], "count-2-3": STANDARD_PSI["count-2-3"]}


RN_DELTA = 0.005


def _rn_kernels():
    return (("sine", sine(10.0), 1600), ("hermite:6", HermiteKernel(6), 400))


def criterion_6(rng, quick=False):
    """Reweighted Palm samples at a against fresh Palm samples at b."""
    n = _sizes(quick, 20000, 3000)
    a, b = 0.0, 0.1
    obs = _rn_observables()
    rows, ok = [], True
    for name, k, nodes in _rn_kernels():
        sp = spectral_sampler(k, nodes, (a, b))
        Pa = [sp.sample_palm([a], rng) for _ in range(n)]
        Pb = [sp.sample_palm([b], rng) for _ in range(n)]
        spec = CutoffSpec(k.window.half_width, RN_DELTA, a)
        f = radon_nikodym_factor(k, a, b, spec, Pa)
        for oname, o in obs.items():
            va = np.array([o(X) for X in Pa])
            vb = np.array([o(X) for X in Pb])
            ea, eb = mean_estimate(f.in_sample * va), mean_estimate(vb)
            z = ea.z(eb)
            ok &= z < Z_MAX
            rows.append({"kernel": name, "observable": oname, "reweighted": ea.value,
                         "reweighted_stderr": ea.stderr, "direct": eb.value,
                         "direct_stderr": eb.stderr, "z": z})
    zmax = max(r["z"] for r in rows)
    return ok, f"{len(rows)} observables, |b - a| = {b - a:g}, max z = {zmax:.2f} (n = {n})", {
        "rows": rows}


def criterion_7(rng, quick=False):
    """Finite difference of ln C against the expectation formula."""
    n = _sizes(quick, 20000, 3000)
    a, eps = 0.0, 0.05
    rows, ok = [], True
    for name, k, nodes in _rn_kernels():
        sp = spectral_sampler(k, nodes, (a,))
        Pa = [sp.sample_palm([a], rng) for _ in range(n)]
        spec = CutoffSpec(k.window.half_width, RN_DELTA, a)
        c = dlnC_consistency(k, a, eps, spec, Pa)
        ok &= c.z_score < Z_MAX
        rows.append({"kernel": name, "finite_difference": c.finite_difference.value,
                     "derivative": c.derivative.value, "derivative_stderr": c.derivative.stderr,
                     "z": c.z_score})
    zmax = max(r["z"] for r in rows)
    return ok, f"eps = {eps:g}, max paired z = {zmax:.2f} (n = {n})", {"rows": rows}


def criterion_8(rng, quick=False):
    """Dyson dynamics keep the Hermite ensemble; doubled confinement does not."""
    n = _sizes(quick, 500, 200)
    k = HermiteKernel(8)
    seed = int(rng.integers(2**63))
    main = run_diffusion(k, DiffusionConfig(dt=1e-4, T=0.5), n, seed)
    ctrl = run_diffusion(k, DiffusionConfig(dt=1e-4, T=0.5, confinement=2.0), n, seed)
    ok = main.passed and ctrl.max_abs_z > Z_MAX
    return ok, (f"invariant drift max |z| = {main.max_abs_z:.2f}, doubled confinement max |z| = "
                f"{ctrl.max_abs_z:.2f} ({n} trajectories)"), {
        "invariant": main.to_dict(), "control": ctrl.to_dict()}


CRITERIA = {
    1: ("isometry", criterion_1),
    2: ("Palm correctness", criterion_2),
    3: ("regularized-functional convergence", criterion_3),
    4: ("finite-N exact oracle", criterion_4),
    5: ("integration by parts", criterion_5),
    6: ("Radon-Nikodym change of measure", criterion_6),
    7: ("ln C consistency", criterion_7),
    8: ("dynamics invariance", criterion_8),
}

DEFAULT_SEED = 20240601


def run_criterion(number, quick=False, seed=DEFAULT_SEED) -> CriterionResult:
    title, fn = CRITERIA[number]
    rng = spawn_generators(seed, len(CRITERIA))[number - 1]
    t0 = time.perf_counter()
    ok, summary, details = fn(rng, quick)
    return CriterionResult(number, title, bool(ok), summary, details, time.perf_counter() - t0)


def run_acceptance(quick=False, only=None, seed=DEFAULT_SEED, log=None):
    results = []
    for number in sorted(only or CRITERIA):
        r = run_criterion(number, quick, seed)
        if log:
            log(r.line())
        results.append(r)
    return results
