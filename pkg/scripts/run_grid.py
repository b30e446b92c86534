#!/usr/bin/env python3
"""Produce one augmented dataset per (data-mixup, label-mixup) grid cell.

Runs the CLI once per cell into out/<gfeat>_<glabel>/, sharing the seed so
the mixup-parameter draws coincide across cells.  Pass --evaluate to score
every cell (plus the unaugmented baseline) with the GIN harness afterwards,
if the harness package is installed.

Example:
    python scripts/run_grid.py --data-dir data --name SYN100 --out grid_out
"""

import argparse
import subprocess
import sys

DATA_FUNCTIONS = ("linear", "clusterpath")
LABEL_FUNCTIONS = ("linear", "sigmoid", "logit", "clusterpath")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data-dir", required=True)
    ap.add_argument("--name", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--resolution", type=int, default=12)
    ap.add_argument("--num-new", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--evaluate", action="store_true")
    ap.add_argument("--folds", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=150)
    args = ap.parse_args()

    for gfeat in DATA_FUNCTIONS:
        for glabel in LABEL_FUNCTIONS:
            cell_out = f"{args.out}/{gfeat}_{glabel}"
            cmd = [
                sys.executable, "-m", "graphmad.cli", "augment",
                "--data-dir", args.data_dir,
                "--name", args.name,
                "--out", cell_out,
                "--resolution", str(args.resolution),
                "--gfeat", gfeat,
                "--glabel", glabel,
                "--seed", str(args.seed),
            ]
            if args.num_new is not None:
                cmd += ["--num-new", str(args.num_new)]
            print(f"=== {gfeat}/{glabel} ===", flush=True)
            subprocess.run(cmd, check=True)

    if args.evaluate:
        cmd = [
            sys.executable, "-m", "graphmad_harness.cli",
            "--data-dir", args.data_dir,
            "--name", args.name,
            "--grid-dir", args.out,
            "--results", f"{args.out}/results.csv",
            "--folds", str(args.folds),
            "--epochs", str(args.epochs),
            "--seed", str(args.seed),
        ]
        subprocess.run(cmd, check=True)


if __name__ == "__main__":
    main()
