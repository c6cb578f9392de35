"""Desk-scale comparison of restart variants.

Runs the experiment in desk_config.json (or a config given on the command
line), then prints per-problem solve counts at each accuracy level and
writes data-profile CSVs next to the archive.

    python3 scripts/variant_ordering.py [config.json] [--workers 4]
"""
import argparse
from pathlib import Path

from restartdfo.bench import AccuracySpec, evals_to_solve, load_config, profile_archive, read_archive, run_experiment

HERE = Path(__file__).resolve().parent


def solve_table(groups, tau):
    table = {}
    for variant, traces in groups.items():
        for tr in traces:
            hit = evals_to_solve(tr, AccuracySpec.for_trace(tr, tau)) <= int(tr.metadata["budget"])
            table.setdefault(tr.problem, {}).setdefault(variant, 0)
            table[tr.problem][variant] += int(hit)
    return table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", nargs="?", type=Path, default=HERE / "desk_config.json")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--output-dir", type=Path)
    args = ap.parse_args()
    cfg = load_config(args.config)
    cfg.workers = args.workers
    archive = run_experiment(cfg, args.output_dir)
    groups = read_archive(archive)
    for tau in cfg.tau_levels:
        table = solve_table(groups, tau)
        print("\ntau = %g (solved out of %d)" % (tau, cfg.instances))
        print("%-16s" % "problem" + "".join("%15s" % v for v in cfg.variants))
        for problem in cfg.problems:
            print("%-16s" % problem + "".join("%15d" % table[problem].get(v, 0) for v in cfg.variants))
    profile_archive(archive, archive.parent / "profiles", cfg.tau_levels)
    print("\nprofiles written to %s" % (archive.parent / "profiles"))


if __name__ == "__main__":
    main()
