"""End-to-end double-lane-change experiment through the command-line tool.

Generates the mixed training corpus, trains the ensemble, runs the default
scenario with the compensator off and on, and prints the comparison.  All
artefacts (with their run manifests) land in ``--workdir``.

Usage: python3 scripts/run_dlc_comparison.py [--workdir runs/dlc] [--seed 0] [--seeds 0 1 2]
"""

import argparse
import csv
import sys
from pathlib import Path

from steercomp.cli import main as steercomp


def run(argv):
    print("$ steercomp " + " ".join(argv), file=sys.stderr)
    if steercomp(argv) != 0:
        sys.exit(f"step failed: {' '.join(argv)}")


def improvements(path):
    with open(path, newline="") as fh:
        return {r["metric"]: r["improvement_pct"] for r in csv.DictReader(fh) if r["improvement_pct"]}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--workdir", default="runs/dlc")
    p.add_argument("--seed", type=int, default=0, help="corpus and training seed")
    p.add_argument("--seeds", type=int, nargs="+", default=[0], help="simulation seeds to compare")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--restarts", type=int, default=10)
    args = p.parse_args()

    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    corpus, model = work / "mixed.csv", work / "model.txt"
    run(["generate", "--excitation", "mixed", "--seed", str(args.seed), "--out", str(corpus)])
    run(["train", "--input", str(corpus), "--restarts", str(args.restarts), "--epochs", str(args.epochs),
         "--seed", str(args.seed), "--out", str(model)])

    print("seed,max_tracking_error_pct,oscillation_index_pct")
    for seed in args.seeds:
        off, on = work / f"off_{seed}.csv", work / f"on_{seed}.csv"
        run(["simulate", "--compensator", "off", "--seed", str(seed), "--out", str(off)])
        run(["simulate", "--compensator", "on", "--model", str(model), "--seed", str(seed), "--out", str(on)])
        report = work / f"compare_{seed}.csv"
        run(["compare", str(off), str(on), "--out", str(report)])
        imp = improvements(report)
        print(f"{seed},{imp['max_tracking_error']},{imp['oscillation_index']}")


if __name__ == "__main__":
    main()
