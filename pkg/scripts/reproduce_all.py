"""Run every canonical experiment through the command line driver.

Usage: python scripts/reproduce_all.py [--out DIR] [--seed S] [--quick]

``--quick`` cuts trials to 10 so the whole set finishes in well under a minute.
"""

import argparse
import sys
from pathlib import Path

from netadapt.cli import CASES, main


def run(out: Path, seed: int, quick: bool) -> int:
    for case in CASES:
        argv = ["reproduce", case, "--seed", str(seed), "--out", str(out / case), "--emit-config"]
        if quick and case != "eta_sweep":
            argv += ["--trials", "10"]
        code = main(argv)
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results")
    p.add_argument("--seed", type=int, default=2015)
    p.add_argument("--quick", action="store_true")
    args = p.parse_args()
    sys.exit(run(Path(args.out), args.seed, args.quick))
