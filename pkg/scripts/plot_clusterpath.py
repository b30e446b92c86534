#!/usr/bin/env python3
"""Plot branch mixing levels from a clusterpath CSV export.

Reads the (lambda, branch, g_cp, cluster_count) table written by
``graphmad clusterpath`` and draws, for a chosen branch pair (k, k'), the
mixing level from branch k into fusion (alpha in [0, 1]) and back out to
branch k' (alpha in [1, 2]), plus the cluster-count curve.

Example:
    python scripts/plot_clusterpath.py SYN100_clusterpath.csv --branches 0 1
"""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv_path")
    ap.add_argument("--branches", type=int, nargs=2, default=(0, 1), metavar=("K", "KP"))
    ap.add_argument("--out", default="clusterpath.png")
    args = ap.parse_args()

    rates = defaultdict(list)
    counts = {}
    with open(args.csv_path) as fh:
        for row in csv.DictReader(fh):
            lam = float(row["lambda"])
            rates[int(row["branch"])].append((lam, float(row["g_cp"])))
            counts[lam] = int(row["cluster_count"])

    k, kp = args.branches
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 7), sharex=False)

    lams_k = [lam for lam, _ in sorted(rates[k])]
    g_k = [g for _, g in sorted(rates[k])]
    g_kp = [g for _, g in sorted(rates[kp])]
    alpha_fwd = [lam for lam in lams_k]
    ax1.plot(alpha_fwd, [0.5 * g for g in g_k], label=f"branch {k} to fusion")
    ax1.plot([1.0 + (1.0 - lam) for lam in reversed(lams_k)],
             [1.0 - 0.5 * g for g in reversed(g_kp)],
             label=f"fusion to branch {kp}")
    ax1.set_xlabel("alpha")
    ax1.set_ylabel("mixing level")
    ax1.legend()
    ax1.set_title("Mixing level across the branch pair")

    lam_sorted = sorted(counts)
    ax2.step(lam_sorted, [counts[lam] for lam in lam_sorted], where="post")
    ax2.set_xlabel("lambda")
    ax2.set_ylabel("cluster count")
    ax2.set_yscale("log")

    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
