"""Command-line interface: ``restartdfo <subcommand> ...``.

Exit codes: 0 success, 1 runtime failure (or an invalid trace for
``validate-trace``), 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import bench
from .problems import NOISE_KINDS, NoiseModel, NoisyObjective, get_problem, problem_names, random_start, registry_manifest
from .solver import SolverOptions, minimize

__all__ = ["main", "build_parser", "DEMOS"]

WIDTH = 88
DEMOS = ("ackley", "goldstein-price", "ackley-scaling")
DEMO_VARIANTS = (("none", "none", "fixed"), ("fixed", "soft", "fixed"), ("adaptive", "soft", "adaptive"))


class UsageError(Exception):
    pass


def _formatter(prog):
    return argparse.HelpFormatter(prog, width=WIDTH, max_help_position=32)


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers, got %r" % text) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="restartdfo", formatter_class=_formatter,
                                     description="Derivative-free trust-region solver with multiple restarts.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("solve", formatter_class=_formatter, help="minimize one registered problem")
    p.add_argument("--problem", required=True, help="registered problem name")
    p.add_argument("--n", type=int, help="dimension for scalable problems")
    p.add_argument("--x0", type=_floats, help="start point, comma separated (default: random in the box)")
    p.add_argument("--restarts", choices=("none", "hard", "soft"), default="soft", help="restart mode")
    p.add_argument("--radius", choices=("fixed", "adaptive"), default="fixed", help="restart radius mode")
    p.add_argument("--budget", type=int, help="evaluation budget (default 1000(n+1))")
    p.add_argument("--seed", type=int, default=0, help="seed for the start point, noise and solver")
    p.add_argument("--noise", choices=NOISE_KINDS, default="smooth", help="noise model")
    p.add_argument("--sigma", type=float, default=1e-2, help="noise level")
    p.add_argument("--npt", type=int, help="number of interpolation points")
    p.add_argument("--no-scale", action="store_true", help="do not rescale the box to the unit cube")
    p.add_argument("--trace", type=Path, help="write the evaluation trace to this file")

    p = sub.add_parser("run", formatter_class=_formatter, help="run an experiment config, writing a trace archive")
    p.add_argument("config", type=Path, help="JSON experiment config")
    p.add_argument("--output-dir", type=Path, help="override the config's output_dir")
    p.add_argument("--workers", type=int, help="parallel worker processes")

    p = sub.add_parser("profile", formatter_class=_formatter, help="data profiles from a trace archive")
    p.add_argument("archive", type=Path, help="archive directory written by 'run'")
    p.add_argument("--output-dir", type=Path, required=True, help="directory for profile CSVs")
    p.add_argument("--tau", type=float, action="append", help="accuracy level (repeatable; default 1e-2 and 1e-5)")
    p.add_argument("--tau-max", type=float, default=0.1, help="cap on the noise-floored accuracy")

    p = sub.add_parser("demo", formatter_class=_formatter, help="regenerate the demonstration data as CSV")
    p.add_argument("name", choices=DEMOS, help="which demonstration")
    p.add_argument("--output-dir", type=Path, required=True, help="directory for CSV output")
    p.add_argument("--seed", type=int, default=0, help="seed for the solver's random directions")

    p = sub.add_parser("list-problems", formatter_class=_formatter, help="list registered problems")
    p.add_argument("--json", action="store_true", help="print the registry manifest as JSON")

    p = sub.add_parser("validate-trace", formatter_class=_formatter, help="check a trace file against the schema")
    p.add_argument("path", type=Path, help="trace file")
    p.add_argument("--strict", action="store_true", help="treat best-so-far mismatches as errors")
    return parser


# -- subcommands -----------------------------------------------------------

def _lookup(name, n=None):
    try:
        return get_problem(name, n)
    except KeyError:
        raise UsageError("unknown problem %r; valid names: %s" % (name, ", ".join(problem_names()))) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_solve(args) -> int:
    spec = _lookup(args.problem, args.n)
    x0 = random_start(spec, args.seed) if args.x0 is None else args.x0
    if x0.size != spec.n:
        raise UsageError("--x0 has %d entries but %s has n=%d" % (x0.size, spec.name, spec.n))
    noise = NoiseModel(args.noise, args.sigma, args.seed)
    opts = SolverOptions(p=args.npt, max_evals=args.budget, restart_mode=args.restarts,
                         restart_radius_mode=args.radius, rng_seed=args.seed, noise_aware=not noise.is_smooth,
                         scale_to_unit_box=False if args.no_scale else None)
    try:
        result = minimize(NoisyObjective(spec, noise), x0, spec.bounds, opts)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print("problem %s (n=%d), start %s" % (spec.name, spec.n, np.array2string(x0, precision=6)))
    print(result)
    for i, r in enumerate(result.restarts, 1):
        print("  restart %d at eval %d: %s/%s, delta_reset=%.4g, best %.6g -> %.6g"
              % (i, r.eval_index, r.kind, r.trigger, r.delta_reset, r.f_before, r.f_after))
    if args.trace is not None:
        trace = result.to_trace("%s-%s" % (args.restarts, args.radius), spec.name, 0, args.seed,
                                budget=opts.max_evals or 1000 * (spec.n + 1), noise=noise.kind,
                                sigma=noise.sigma.hex())
        bench.write_trace(trace, args.trace)
        print("trace written to %s" % args.trace)
    return 0


def cmd_run(args) -> int:
    try:
        cfg = bench.load_config(args.config)
    except (OSError, bench.ConfigError) as exc:
        raise UsageError(str(exc)) from None
    if args.workers is not None:
        cfg.workers = args.workers
    path = bench.run_experiment(cfg, args.output_dir)
    print("wrote %s" % path)
    return 0


def cmd_profile(args) -> int:
    taus = args.tau or [1e-2, 1e-5]
    try:
        result = bench.profile_archive(args.archive, args.output_dir, taus, args.tau_max)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    for tau, profs in result.items():
        for solver, prof in sorted(profs.items()):
            print("tau=%g %-14s solved %d/%d" % (tau, solver, np.isfinite(prof.counts).sum(), prof.counts.size))
    print("profiles written to %s" % args.output_dir)
    return 0


def cmd_list(args) -> int:
    if args.json:
        print(registry_manifest())
        return 0
    for name in problem_names():
        spec = get_problem(name)
        print("%-16s n=%-3d f*=%.8g" % (name, spec.n, spec.f_star))
    return 0


def cmd_validate(args) -> int:
    try:
        issues = bench.validate_trace_file(args.path)
    except OSError as exc:
        raise UsageError(str(exc)) from None
    errors = [m for m in issues if m.startswith("error")]
    for m in issues:
        print("%s: %s" % (args.path, m))
    if errors or (args.strict and issues):
        return 1
    print("%s: ok" % args.path)
    return 0


# -- demos -------------------------------------------------------------------

def _write_csv(path: Path, header, rows):
    lines = [",".join(header)] + [",".join(_fmt(v) for v in row) for row in rows]
    bench._atomic_write(path, "\n".join(lines) + "\n")


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def _run_demo_variant(spec, x0, budget, mode, radius, seed):
    opts = SolverOptions(max_evals=budget, restart_mode=mode, restart_radius_mode=radius, rng_seed=seed)
    return minimize(spec, x0, spec.bounds, opts)


def _trace_rows(result):
    starts = [r.eval_index for r in result.restarts]
    restarts = np.searchsorted(np.array(starts, dtype=int), np.arange(result.nf), side="right")
    best = result.best_so_far
    return [(k + 1, result.fs[k], best[k], int(restarts[k])) + tuple(result.xs[k]) for k in range(result.nf)]


def _two_d_demo(out: Path, tag: str, problem: str, x0, budget: int, seed: int):
    spec = get_problem(problem)
    summary = []
    for label, mode, radius in DEMO_VARIANTS:
        res = _run_demo_variant(spec, np.asarray(x0, float), budget, mode, radius, seed)
        xcols = ["x%d" % (i + 1) for i in range(spec.n)]
        _write_csv(out / ("%s_%s_trace.csv" % (tag, label)), ["k", "f", "best", "restarts"] + xcols,
                   _trace_rows(res))
        iterates = set(res.iterate_indices)
        _write_csv(out / ("%s_%s_points.csv" % (tag, label)), ["k"] + xcols + ["f", "is_iterate"],
                   [(k + 1,) + tuple(res.xs[k]) + (res.fs[k], int(k in iterates)) for k in range(res.nf)])
        summary.append((label, res))
        print("%-9s best f = %.6g at %s after %d evals, %d restarts (%s)"
              % (label, res.f, np.array2string(res.x, precision=6), res.nf, len(res.restarts), res.reason))
    _write_csv(out / ("%s_summary.csv" % tag), ["variant", "best_f", "evals", "restarts"] + ["x%d" % (i + 1) for i in range(spec.n)],
               [(label, r.f, r.nf, len(r.restarts)) + tuple(r.x) for label, r in summary])
    return summary


def _scaling_demo(out: Path, seed: int):
    for n in (5, 10, 20, 50):
        spec = get_problem("ackley_pi", n)
        res = _run_demo_variant(spec, np.full(n, 3.0), 2000, "soft", "adaptive", seed)
        _write_csv(out / ("ackley_scaling_n%d.csv" % n), ["k", "f", "best", "restarts"],
                   [row[:4] for row in _trace_rows(res)])
        print("n=%-3d f(x0)=%.6g best f=%.6g after %d evals, %d restarts"
              % (n, spec(np.full(n, 3.0)), res.f, res.nf, len(res.restarts)))


PLOT_STUB = '''"""Plot the CSVs in this directory (needs matplotlib, which the package does not require)."""
import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
for path in sorted(glob.glob(os.path.join(here, "*_trace.csv")) + glob.glob(os.path.join(here, "ackley_scaling_n*.csv"))):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    k = [int(r["k"]) for r in rows]
    best = [float(r["best"]) for r in rows]
    plt.semilogy(k, [max(b, 1e-16) for b in best], label=os.path.basename(path)[:-4])
plt.xlabel("objective evaluations")
plt.ylabel("best value so far")
plt.legend()
plt.savefig(os.path.join(here, "best_so_far.png"), dpi=150)
'''


def cmd_demo(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.name == "ackley":
        _two_d_demo(out, "ackley", "ackley2d", (20.0, 20.0), 3000, args.seed)
    elif args.name == "goldstein-price":
        _two_d_demo(out, "goldstein_price", "goldstein_price", (1.0, 1.0), 1000, args.seed)
    else:
        _scaling_demo(out, args.seed)
    bench._atomic_write(out / "plot.py", PLOT_STUB)
    print("CSV written to %s (plot with: python3 %s)" % (out, out / "plot.py"))
    return 0


COMMANDS = {"solve": cmd_solve, "run": cmd_run, "profile": cmd_profile, "demo": cmd_demo,
            "list-problems": cmd_list, "validate-trace": cmd_validate}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.exit(2, "restartdfo %s: error: %s\n" % (args.command, exc))
    except Exception as exc:  # runtime failure
        print("restartdfo %s: failed: %s" % (args.command, exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
