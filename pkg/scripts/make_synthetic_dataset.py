#!/usr/bin/env python3
"""Write a synthetic TUDataset-format dataset of SBM graphs.

Each class draws graphs from its own 2-block generator, so the classes are
separable in graphon space without being trivial.  Useful for exercising
the full pipeline when no benchmark data is on disk.

Example:
    python scripts/make_synthetic_dataset.py --out data --name SYN100 \\
        --per-class 50 --nodes 20 30 --seed 1
"""

import argparse

import numpy as np

from graphmad import Dataset, Graphon, LabeledGraph, sample_graph, write_augmented_dataset

GENERATORS = [
    np.array([[0.70, 0.20], [0.20, 0.45]]),
    np.array([[0.50, 0.25], [0.25, 0.30]]),
    np.array([[0.85, 0.15], [0.15, 0.55]]),
    np.array([[0.40, 0.10], [0.10, 0.25]]),
    np.array([[0.65, 0.35], [0.35, 0.20]]),
    np.array([[0.30, 0.05], [0.05, 0.60]]),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--name", default="SYN")
    ap.add_argument("--classes", type=int, default=2, choices=range(1, 7))
    ap.add_argument("--per-class", type=int, default=50)
    ap.add_argument("--nodes", type=int, nargs=2, default=(15, 30), metavar=("LO", "HI"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    graphs = []
    for cls in range(args.classes):
        gen = Graphon(GENERATORS[cls])
        for _ in range(args.per_class):
            n = int(rng.integers(args.nodes[0], args.nodes[1] + 1))
            edges = sample_graph(gen, n, rng)
            label = np.zeros(args.classes)
            label[cls] = 1.0
            graphs.append(LabeledGraph(node_count=n, edges=edges, label=label))
    dataset = Dataset(graphs=tuple(graphs), class_count=args.classes, name=args.name)
    write_augmented_dataset(
        args.out, args.name, dataset, [], manifest={"seed": args.seed, "synthetic": True}
    )
    print(f"wrote {args.out}/{args.name}: {len(graphs)} graphs, {args.classes} classes")


if __name__ == "__main__":
    main()
