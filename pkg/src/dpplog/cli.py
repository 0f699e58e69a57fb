"""Command-line harness.

Exit codes: 0 success, 1 precondition error, 2 acceptance failure, 64 usage.
Flags override values read from ``--config`` (a JSON object keyed by flag
name with dashes or underscores).
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from contextlib import contextmanager
from dataclasses import asdict

import numpy as np

from . import __version__
from .functionals import DegenerateNormalizerError, GSpaceError
from .io import dumps, estimate_dict, write_csv, write_json, write_jsonl
from .kernels import (DegenerateIntensityError, KernelDomainError, Window, check_assumption2,
                      parse_kernel)
from .montecarlo import mean_estimate, run_chunks
from .sampler import EigenError, empirical_intensity, spectral_sampler

EXIT_OK, EXIT_PRECONDITION, EXIT_ACCEPTANCE, EXIT_USAGE = 0, 1, 2, 64

PRECONDITION_ERRORS = (ValueError, KernelDomainError, DegenerateIntensityError, EigenError,
                       DegenerateNormalizerError, GSpaceError, ArithmeticError)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _window(text):
    if text is None:
        return None
    lo, hi = (float(v) for v in str(text).split(":"))
    return Window(lo, hi)


def _common(p, kernel="sine"):
    p.add_argument("--config", help="JSON file with default values for flags")
    p.add_argument("--kernel", default=kernel, help="sine | bessel:<s> | hermite:<N>")
    p.add_argument("--window", help="lo:hi (defaults to the kernel's own window)")
    p.add_argument("--n-nodes", type=int, default=800)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output path (default stdout)")


def build_parser():
    parser = Parser(prog="dpplog", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=Parser, required=True)

    p = sub.add_parser("check-kernel", help="numerical projection-kernel checks")
    _common(p)
    p.add_argument("--grid-size", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-6)

    p = sub.add_parser("sample", help="draw configurations (JSONL)")
    _common(p)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--palm-at", help="comma-separated anchors for Palm samples")

    p = sub.add_parser("intensity", help="empirical vs exact first intensity (CSV)")
    _common(p)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--bins", default="-5:5:20", help="lo:hi:count")
    p.add_argument("--palm-at", help="comma-separated anchors")

    p = sub.add_parser("logderiv", help="regularized log-derivative over a schedule (CSV)")
    _common(p)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--schedule", default="5:0.1,8:0.01,10:0.001")
    p.add_argument("--samples", type=int, default=100, help="Palm samples when --points is not given")
    p.add_argument("--points", help="comma-separated configuration to evaluate")
    p.add_argument("--summary", help="path for the JSON summary (default stderr)")

    p = sub.add_parser("ibp-test", help="integration-by-parts check (JSONL)")
    _common(p)
    p.add_argument("--schedule", default=None, help="default: R at the window edge, delta 1e-2..1e-4")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--psi", default="all", help="one | count-2-3 | bump-0.5 | all")
    p.add_argument("--support", default="-1:1", help="support of the anchor bump, lo:hi")

    p = sub.add_parser("rn-check", help="Radon-Nikodym difference-quotient and ln C checks (CSV)")
    _common(p)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--eps", default="0.2,0.1,0.05,0.02")
    p.add_argument("--R", type=float, default=None, help="default: window edge")
    p.add_argument("--delta", type=float, default=0.005)
    p.add_argument("--samples", type=int, default=10000)

    p = sub.add_parser("diffuse", help="finite-N Dyson dynamics and stationarity report (JSON)")
    _common(p, kernel="hermite:8")
    p.set_defaults(n_nodes=400)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--trajectories", type=int, default=500)
    p.add_argument("--drift", choices=("closed", "estimated"), default="closed")
    p.add_argument("--schedule", default=None)
    p.add_argument("--confinement", type=float, default=1.0)
    p.add_argument("--snapshots", help="JSONL path for trajectory snapshots")
    p.add_argument("--snapshot-every", type=int, default=1000)

    p = sub.add_parser("acceptance", help="run the acceptance suite")
    p.add_argument("--config", help="JSON file with default values for flags")
    p.add_argument("--quick", action="store_true", help="reduced sample sizes")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--out", help="JSON report path")
    return parser


_NEGATIVE = re.compile(r"^-\.?\d")


def _attach_negative_values(argv):
    """Rewrite ``--flag -2:2`` as ``--flag=-2:2`` so argparse does not read a flag."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and _NEGATIVE.match(argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def parse_args(argv):
    argv = _attach_negative_values(list(argv))
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise ValueError("config must be a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        defaults = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = set(defaults) - known
        if unknown:
            sub.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _meta(args):
    d = {k: v for k, v in vars(args).items() if k not in ("out", "summary", "snapshots")}
    return {"program": "dpplog", "version": __version__, **d}


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _kernel(args):
    return parse_kernel(args.kernel, _window(args.window))


def cmd_check_kernel(args):
    k = _kernel(args)
    rep = check_assumption2(k, args.grid_size, args.tol)
    with _output(args.out) as out:
        write_json(out, _meta(args), {"report": asdict(rep), "passed": rep.passed})
    return EXIT_OK if rep.passed else EXIT_PRECONDITION


def _sample_chunk(n, rng, k, n_nodes, anchors):
    sp = spectral_sampler(k, n_nodes)
    if anchors:
        return [sp.sample_palm(anchors, rng).points for _ in range(n)]
    return [sp.sample(rng).points for _ in range(n)]


def _draw(args, k, n, anchors=()):
    parts = run_chunks(_sample_chunk, n, args.seed, chunk=1000, workers=args.workers,
                       args=(k, args.n_nodes, tuple(anchors)))
    return [X for part in parts for X in part]


def cmd_sample(args):
    k = _kernel(args)
    anchors = _floats(args.palm_at) if args.palm_at else []
    samples = _draw(args, k, args.samples, anchors)
    with _output(args.out) as out:
        write_jsonl(out, _meta(args), ({"index": i, "points": X} for i, X in enumerate(samples)))
    return EXIT_OK


def cmd_intensity(args):
    from .palm import palm_kernel
    from .quadrature import composite_gauss_legendre
    k = _kernel(args)
    anchors = _floats(args.palm_at) if args.palm_at else []
    lo, hi, nb = args.bins.split(":")
    edges = np.linspace(float(lo), float(hi), int(nb) + 1)
    hist = empirical_intensity(_draw(args, k, args.samples, anchors), edges)
    pk = palm_kernel(k, anchors) if anchors else k
    rows = []
    for (b0, b1), v, s in zip(zip(edges[:-1], edges[1:]), hist.density, hist.stderr):
        q = composite_gauss_legendre(b0, b1, n_panels=4, order=10)
        exact = float(q.integrate(pk.diag(q.nodes))) / (b1 - b0)
        rows.append((f"empirical[{b0:.17g},{b1:.17g})", float(v), float(s), hist.n_samples))
        rows.append((f"exact[{b0:.17g},{b1:.17g})", exact, 0.0, 0))
    with _output(args.out) as out:
        write_csv(out, _meta(args), ("name", "value", "stderr", "n"), rows)
    return EXIT_OK


def cmd_logderiv(args):
    from .logderiv import RegularizationSchedule, log_derivative
    k = _kernel(args)
    sched = RegularizationSchedule.parse(args.schedule)
    sched.check_window(k.window)
    if args.points is not None:
        configs = [np.array(_floats(args.points))]
    else:
        configs = _draw(args, k, args.samples, [args.a])
    vals = np.array([[v for _, _, v in log_derivative(k, args.a, sched, X).per_pair]
                     for X in configs])
    ests = [mean_estimate(vals[:, j]) for j in range(vals.shape[1])]
    rows = [(R, d, e.value, e.stderr) for (R, d), e in zip(sched, ests)]
    gap = abs(ests[-1].value - ests[-2].value)
    summary = {"extrapolated": ests[-1].value, "cauchy_gap": gap, "converged": bool(gap < 1e-2),
               "n": len(configs)}
    with _output(args.out) as out:
        write_csv(out, _meta(args), ("R", "delta", "value", "stderr"), rows)
    if args.summary:
        with open(args.summary, "w") as fh:
            write_json(fh, _meta(args), summary)
    else:
        sys.stderr.write(dumps(summary) + "\n")
    return EXIT_OK


def _default_schedule(k):
    from .logderiv import RegularizationSchedule
    W = k.window.half_width
    return RegularizationSchedule(((W, 1e-2), (W, 1e-3), (W, 1e-4)))


def cmd_ibp_test(args):
    from .logderiv import STANDARD_PSI, RegularizationSchedule, ibp_battery
    k = _kernel(args)
    sched = RegularizationSchedule.parse(args.schedule) if args.schedule else _default_schedule(k)
    psis = STANDARD_PSI if args.psi == "all" else {args.psi: STANDARD_PSI[args.psi]}
    support = tuple(float(v) for v in args.support.split(":"))
    res = ibp_battery(k, psis, sched, args.samples, args.seed, support=support,
                      n_nodes=args.n_nodes)
    recs = [{"name": r.name, "lhs": estimate_dict(r.lhs), "rhs": estimate_dict(r.rhs),
             "z_score": r.z_score, "n": r.n, "nonconverged_fraction": r.nonconverged_fraction}
            for r in res]
    with _output(args.out) as out:
        write_jsonl(out, _meta(args), recs)
    return EXIT_OK


def cmd_rn_check(args):
    from .functionals import CutoffSpec
    from .logderiv import dlnC_derivative, rn_difference_quotient_check
    k = _kernel(args)
    R = args.R if args.R is not None else k.window.half_width
    spec = CutoffSpec(R, args.delta, args.a)
    samples = _draw(args, k, args.samples, [args.a])
    eps = _floats(args.eps)
    rows = [(f"l2_gap[eps={e:.17g}]", g, 0.0, len(samples))
            for e, g in rn_difference_quotient_check(k, args.a, eps, spec, samples)]
    d0 = dlnC_derivative(k, args.a, spec, samples)
    rows.append(("dlnC[eps=0]", d0.value, d0.stderr, d0.n))
    with _output(args.out) as out:
        write_csv(out, _meta(args), ("name", "value", "stderr", "n"), rows)
    return EXIT_OK


def cmd_diffuse(args):
    from .dynamics import DiffusionConfig, evolve, initial_ensemble, stationarity_report
    from .logderiv import RegularizationSchedule
    k = _kernel(args)
    sched = None
    if args.drift == "estimated":
        sched = RegularizationSchedule.parse(args.schedule) if args.schedule else _default_schedule(k)
    cfg = DiffusionConfig(dt=args.dt, T=args.T, drift_mode=args.drift, schedule=sched,
                          confinement=args.confinement)
    rng = np.random.default_rng(args.seed)
    x0 = initial_ensemble(k, args.trajectories, rng, args.n_nodes)
    every = args.snapshot_every if args.snapshots else None
    xT, failed, snaps = evolve(x0, k, cfg, rng, snapshot_every=every)
    rep = stationarity_report(x0, xT, k, cfg.T, failed=failed)
    if args.snapshots:
        with open(args.snapshots, "w") as fh:
            write_jsonl(fh, _meta(args), ({"time": t, "positions": x} for t, x in snaps))
    with _output(args.out) as out:
        write_json(out, _meta(args), {"report": rep.to_dict()})
    return EXIT_OK if rep.collision_rate <= 0.01 else EXIT_PRECONDITION


def cmd_acceptance(args):
    from .acceptance import run_acceptance
    only = [int(v) for v in args.only.split(",")] if args.only else None
    results = run_acceptance(quick=args.quick, only=only, seed=args.seed,
                             log=lambda line: print(line, flush=True))
    if args.out:
        with open(args.out, "w") as fh:
            write_json(fh, _meta(args), {"criteria": [r.to_dict() for r in results]})
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


COMMANDS = {
    "check-kernel": cmd_check_kernel, "sample": cmd_sample, "intensity": cmd_intensity,
    "logderiv": cmd_logderiv, "ibp-test": cmd_ibp_test, "rn-check": cmd_rn_check,
    "diffuse": cmd_diffuse, "acceptance": cmd_acceptance,
}


def run_subcommand(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        sys.stderr.write(f"dpplog: {exc}\n")
        return EXIT_PRECONDITION
    try:
        return COMMANDS[args.command](args)
    except PRECONDITION_ERRORS as exc:
        sys.stderr.write(f"dpplog {args.command}: {type(exc).__name__}: {exc}\n")
        return EXIT_PRECONDITION


def main():
    sys.exit(run_subcommand())
