"""Command-line pipeline: ingest, estimate, trace, branch, generate, write.

Subcommands:

* ``augment``     — full pipeline, writes the augmented TUDataset + manifest
* ``clusterpath`` — trace only, exports JSON/CSV diagnostics for plotting
* ``estimate``    — per-graph graphon JSON files
* ``sample``      — draw graphs from a stored graphon JSON

Errors print one machine-parseable line ``GRAPHMAD_ERROR code=... message=...``
on stderr and exit nonzero; partial outputs are removed.  The environment
variable ``GRAPHMAD_THREADS`` caps internal data parallelism.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import shutil
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from . import __version__
from .cvxclust import LambdaGrid, build_weights, trace_clusterpath
from .errors import ConfigError, GraphmadError, LockError
from .graph_io import Dataset, LabeledGraph, load_tudataset, write_augmented_dataset
from .graphon import (
    build_descriptor_set,
    estimate_graphon,
    load_graphon,
    sample_graph,
    save_graphon,
)
from .mixpath import (
    CONSISTENT_ORIENTATION,
    ORIENTATIONS,
    build_extended_path,
    build_label_paths,
)
from .mixup import DATA_FUNCTIONS, LABEL_FUNCTIONS, MixupSpec, estimate_class_graphons, generate

CHECKPOINT_LAMBDAS = (0.0, 0.25, 0.5, 0.75, 0.99, 1.0)


@dataclass
class AugmentationConfig:
    """All user-tunable knobs of the pipeline."""

    data_dir: str
    name: str
    out_dir: str
    resolution: int = 12
    epsilon: float = 0.01
    a: float = 5.0
    grid_size: int = 101
    tol: float = 1e-6
    delta_fuse: float = 1e-4
    num_new: int | None = None
    data_fn: str = "clusterpath"
    label_fn: str = "clusterpath"
    label_orientation: str = CONSISTENT_ORIENTATION
    seed: int = 0
    export_centroids: bool = False

    def __post_init__(self):
        if self.resolution < 1:
            raise ConfigError(f"resolution must be >= 1, got {self.resolution}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.a > 0.0:
            raise ConfigError(f"a must be positive, got {self.a}")
        if self.grid_size < 1:
            raise ConfigError(f"grid size must be >= 1, got {self.grid_size}")
        if not self.tol > 0.0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if not self.delta_fuse > 0.0:
            raise ConfigError(f"delta_fuse must be positive, got {self.delta_fuse}")
        if self.num_new is not None and self.num_new < 0:
            raise ConfigError(f"num_new must be nonnegative, got {self.num_new}")
        if self.data_fn not in DATA_FUNCTIONS:
            raise ConfigError(f"unknown data mixup {self.data_fn!r}")
        if self.label_fn not in LABEL_FUNCTIONS:
            raise ConfigError(f"unknown label mixup {self.label_fn!r}")
        if self.label_orientation not in ORIENTATIONS:
            raise ConfigError(f"unknown label orientation {self.label_orientation!r}")

    def echo(self) -> dict:
        d = asdict(self)
        d["data_dir"] = str(d["data_dir"])
        d["out_dir"] = str(d["out_dir"])
        return d


def _workers() -> int:
    raw = os.environ.get("GRAPHMAD_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"GRAPHMAD_THREADS must be an integer, got {raw!r}")


def _lock(out_dir: Path) -> FileLock:
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(out_dir / ".graphmad.lock"))
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise LockError(f"output directory {out_dir} is locked by another run")
    return lock


def _checkpoint_counts(grid: LambdaGrid, counts: np.ndarray) -> list[str]:
    lams = grid.values
    parts = []
    for target in CHECKPOINT_LAMBDAS:
        idx = int(np.argmin(np.abs(lams - target)))
        parts.append(f"{lams[idx]:.2f}:{int(counts[idx])}")
    return parts


def _compute_clusterpath(cfg: AugmentationConfig, dataset: Dataset):
    desc = build_descriptor_set(dataset, cfg.resolution)
    weights = build_weights(desc.labels, cfg.epsilon)
    grid = LambdaGrid.default(cfg.grid_size)
    path = trace_clusterpath(
        desc.descriptors,
        weights,
        grid,
        tol=cfg.tol,
        delta_fuse=cfg.delta_fuse,
        workers=_workers(),
    )
    ext = build_extended_path(path, dataset.class_count)
    labels = build_label_paths(ext, cfg.label_orientation)
    return desc, weights, path, ext, labels


def cmd_augment(cfg: AugmentationConfig) -> int:
    out_dir = Path(cfg.out_dir)
    lock = _lock(out_dir)
    staging = out_dir / f"{cfg.name}.partial"
    try:
        dataset = load_tudataset(cfg.data_dir, cfg.name)
        t = len(dataset)
        k = dataset.class_count
        t_new = cfg.num_new if cfg.num_new is not None else math.ceil(0.2 * t)

        needs_path = cfg.data_fn == "clusterpath" or cfg.label_fn == "clusterpath"
        ext = label_paths = path = None
        class_ids = None
        if needs_path:
            _, weights, path, ext, label_paths = _compute_clusterpath(cfg, dataset)
            class_ids = weights.class_ids
        class_set = None
        if cfg.data_fn == "linear":
            class_set = estimate_class_graphons(dataset, cfg.resolution)

        spec = MixupSpec(data_fn=cfg.data_fn, label_fn=cfg.label_fn, a=cfg.a)
        rng = np.random.default_rng(cfg.seed)
        record: dict = {}
        new_graphs = generate(
            dataset,
            ext,
            label_paths,
            class_set,
            spec,
            t_new,
            None,
            rng,
            class_ids=class_ids,
            record=record,
        )

        manifest = {
            "toolkit_version": __version__,
            "config": cfg.echo(),
            "seed": cfg.seed,
            "label_orientation": cfg.label_orientation,
            "generation": record,
        }
        if ext is not None:
            manifest["lambda_star"] = float(ext.lambda_star)
            manifest["branch_index_sets"] = [list(s) for s in ext.branch_index_sets]
            manifest["label_clamped_branches"] = list(label_paths.clamped_branches)

        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir(parents=True)
        try:
            write_augmented_dataset(staging, cfg.name, dataset, new_graphs, manifest)
            final = out_dir / cfg.name
            if final.exists():
                shutil.rmtree(final)
            os.replace(staging / cfg.name, final)
        finally:
            if staging.exists():
                shutil.rmtree(staging)

        print(f"dataset={cfg.name} T={t} K={k} T_new={t_new}")
        print(f"data_fn={cfg.data_fn} label_fn={cfg.label_fn} seed={cfg.seed}")
        if ext is not None:
            print(f"lambda_star={ext.lambda_star!r}")
            print(
                "cluster_counts "
                + " ".join(_checkpoint_counts(path.grid, path.cluster_counts))
            )
        print(f"wrote {out_dir / cfg.name}")
        return 0
    finally:
        lock.release()


def cmd_clusterpath(cfg: AugmentationConfig) -> int:
    out_dir = Path(cfg.out_dir)
    lock = _lock(out_dir)
    written: list[Path] = []
    try:
        dataset = load_tudataset(cfg.data_dir, cfg.name)
        _, _, path, ext, label_paths = _compute_clusterpath(cfg, dataset)

        path_json = path.to_json_dict(include_centroids=cfg.export_centroids)
        ext_json = ext.to_json_dict(include_branches=cfg.export_centroids)
        ext_json["g_cp"] = label_paths.rates.tolist()
        ext_json["label_orientation"] = label_paths.orientation
        ext_json["label_values"] = label_paths.values.tolist()
        ext_json["clamped_branches"] = list(label_paths.clamped_branches)

        try:
            target = out_dir / f"{cfg.name}_clusterpath.json"
            written.append(target)
            with open(target, "w") as fh:
                json.dump(path_json, fh, sort_keys=True)
                fh.write("\n")
            target = out_dir / f"{cfg.name}_extended_clusterpath.json"
            written.append(target)
            with open(target, "w") as fh:
                json.dump(ext_json, fh, sort_keys=True)
                fh.write("\n")
            target = out_dir / f"{cfg.name}_clusterpath.csv"
            written.append(target)
            with open(target, "w") as fh:
                fh.write("lambda,branch,g_cp,cluster_count\n")
                for m, lam in enumerate(path.grid.values):
                    for b in range(ext.branch_count):
                        fh.write(
                            f"{float(lam)!r},{b},{float(label_paths.rates[b, m])!r},"
                            f"{int(path.cluster_counts[m])}\n"
                        )
        except Exception:
            for p in written:
                p.unlink(missing_ok=True)
            raise

        print(f"dataset={cfg.name} T={len(dataset)} K={dataset.class_count}")
        print(f"lambda_star={ext.lambda_star!r} branches={ext.branch_count}")
        print(
            "cluster_counts "
            + " ".join(_checkpoint_counts(path.grid, path.cluster_counts))
        )
        print(f"wrote {written[0]} {written[1]} {written[2]}")
        return 0
    finally:
        lock.release()


def cmd_estimate(cfg: AugmentationConfig) -> int:
    out_dir = Path(cfg.out_dir)
    lock = _lock(out_dir)
    try:
        dataset = load_tudataset(cfg.data_dir, cfg.name)
        target = out_dir / f"{cfg.name}_graphons"
        staging = out_dir / f"{cfg.name}_graphons.partial"
        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir(parents=True)
        try:
            for i, graph in enumerate(dataset.graphs):
                w = estimate_graphon(graph, cfg.resolution)
                save_graphon(w, staging / f"{cfg.name}_graphon_{i:05d}.json")
            if target.exists():
                shutil.rmtree(target)
            os.replace(staging, target)
        finally:
            if staging.exists():
                shutil.rmtree(staging)
        print(f"dataset={cfg.name} T={len(dataset)} resolution={cfg.resolution}")
        print(f"wrote {target}")
        return 0
    finally:
        lock.release()


def cmd_sample(
    cfg: AugmentationConfig, graphon_path: str, nodes: int, count: int
) -> int:
    if nodes < 1:
        raise ConfigError(f"--nodes must be >= 1, got {nodes}")
    if count < 1:
        raise ConfigError(f"--count must be >= 1, got {count}")
    out_dir = Path(cfg.out_dir)
    lock = _lock(out_dir)
    staging = out_dir / f"{cfg.name}.partial"
    try:
        graphon = load_graphon(graphon_path)
        rng = np.random.default_rng(cfg.seed)
        label = np.array([1.0])
        graphs = []
        for _ in range(count):
            edges = sample_graph(graphon, nodes, rng)
            graphs.append(LabeledGraph(node_count=nodes, edges=edges, label=label))
        dataset = Dataset(graphs=tuple(graphs), class_count=1, name=cfg.name)
        manifest = {
            "toolkit_version": __version__,
            "seed": cfg.seed,
            "graphon": str(graphon_path),
            "nodes": nodes,
        }
        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir(parents=True)
        try:
            write_augmented_dataset(staging, cfg.name, dataset, [], manifest)
            final = out_dir / cfg.name
            if final.exists():
                shutil.rmtree(final)
            os.replace(staging / cfg.name, final)
        finally:
            if staging.exists():
                shutil.rmtree(staging)
        print(f"sampled {count} graphs of {nodes} nodes from {graphon_path}")
        print(f"wrote {out_dir / cfg.name}")
        return 0
    finally:
        lock.release()


def _add_common_flags(parser: argparse.ArgumentParser, need_data: bool = True):
    parser.add_argument("--data-dir", default=".", help="directory holding <name>/")
    parser.add_argument("--name", required=True, help="dataset identifier")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--resolution", type=int, default=12)
    parser.add_argument("--epsilon", type=float, default=0.01)
    parser.add_argument("--a", type=float, default=5.0)
    parser.add_argument("--grid-size", type=int, default=101)
    parser.add_argument("--tol", type=float, default=1e-6)
    parser.add_argument("--delta-fuse", type=float, default=1e-4)
    parser.add_argument("--num-new", type=int, default=None)
    parser.add_argument("--gfeat", choices=list(DATA_FUNCTIONS), default="clusterpath")
    parser.add_argument("--glabel", choices=list(LABEL_FUNCTIONS), default="clusterpath")
    parser.add_argument(
        "--label-orientation", choices=list(ORIENTATIONS), default=CONSISTENT_ORIENTATION
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--export-centroids", action="store_true")


def _config_from_args(args) -> AugmentationConfig:
    return AugmentationConfig(
        data_dir=args.data_dir,
        name=args.name,
        out_dir=args.out,
        resolution=args.resolution,
        epsilon=args.epsilon,
        a=args.a,
        grid_size=args.grid_size,
        tol=args.tol,
        delta_fuse=args.delta_fuse,
        num_new=args.num_new,
        data_fn=args.gfeat,
        label_fn=args.glabel,
        label_orientation=args.label_orientation,
        seed=args.seed,
        export_centroids=args.export_centroids,
    )


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="graphmad", description="Graph data augmentation via clusterpath mixup"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("augment", "clusterpath", "estimate"):
        p = sub.add_parser(name)
        _add_common_flags(p)
    p = sub.add_parser("sample")
    _add_common_flags(p)
    p.add_argument("--graphon", required=True, help="graphon JSON to sample from")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--count", type=int, required=True)

    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "augment":
            return cmd_augment(cfg)
        if args.command == "clusterpath":
            return cmd_clusterpath(cfg)
        if args.command == "estimate":
            return cmd_estimate(cfg)
        return cmd_sample(cfg, args.graphon, args.nodes, args.count)
    except GraphmadError as exc:
        message = " ".join(str(exc).split())
        print(f"GRAPHMAD_ERROR code={exc.code} message={message!r}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
