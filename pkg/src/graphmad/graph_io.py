"""TUDataset-format ingestion and augmented-dataset serialization.

The on-disk format is the plain-text one used by the TUDataset collection:

* ``{name}_A.txt`` — one edge per line, ``"i, j"`` with 1-indexed global
  node ids (undirected graphs usually list both directions),
* ``{name}_graph_indicator.txt`` — line ``n`` holds the 1-indexed graph id
  of node ``n``,
* ``{name}_graph_labels.txt`` — line ``g`` holds the raw integer class
  label of graph ``g``.

Augmented datasets add ``{name}_graph_soft_labels.txt`` (one line per
graph, K comma-separated floats at 9 significant digits) and a
``manifest.json`` describing the run.  All functions are pure and safe to
call concurrently.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, LoadError, ValidityError, WriteError

logger = logging.getLogger(__name__)

SOFT_LABEL_FORMAT = "%.9g"
SOFT_LABEL_SUM_TOL = 1e-9
# Sidecar files round soft labels to 9 significant digits, so a reloaded
# K-vector can miss the simplex by up to K ulps of that precision.
SIDECAR_SUM_TOL = 1e-6


def _format_float(x: float) -> str:
    return SOFT_LABEL_FORMAT % float(x)


@dataclass(frozen=True)
class LabeledGraph:
    """Undirected simple graph with a one-hot class label.

    ``edges`` holds 0-based unordered pairs ``(i, j)`` with ``i < j``; the
    label is a length-K vector with exactly one entry equal to 1.
    """

    node_count: int
    edges: frozenset[tuple[int, int]]
    label: np.ndarray

    def __post_init__(self):
        if self.node_count < 1:
            raise ValidityError(f"graph must have at least one node, got {self.node_count}")
        for i, j in self.edges:
            if i == j:
                raise ValidityError(f"self-loop ({i}, {i}) is not allowed")
            if not (0 <= i < j < self.node_count):
                raise ValidityError(
                    f"edge ({i}, {j}) out of range for {self.node_count} nodes"
                )
        label = np.asarray(self.label, dtype=float)
        if label.ndim != 1 or not np.all((label == 0.0) | (label == 1.0)) or label.sum() != 1.0:
            raise ValidityError("label must be a one-hot vector")
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "label_index", int(np.argmax(label)))

    @staticmethod
    def from_edge_list(node_count, edge_list, label):
        """Build a graph from possibly-unsorted (i, j) pairs."""
        edges = frozenset((min(i, j), max(i, j)) for i, j in edge_list)
        return LabeledGraph(node_count=node_count, edges=edges, label=np.asarray(label, float))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.node_count, self.node_count), dtype=np.uint8)
        for i, j in self.edges:
            a[i, j] = 1
            a[j, i] = 1
        return a


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of labeled graphs sharing one label space."""

    graphs: tuple[LabeledGraph, ...]
    class_count: int
    name: str

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        seen = set()
        for g in self.graphs:
            if len(g.label) != self.class_count:
                raise ValidityError(
                    f"graph label length {len(g.label)} != class count {self.class_count}"
                )
            seen.add(g.label_index)
        if self.graphs and seen != set(range(self.class_count)):
            missing = sorted(set(range(self.class_count)) - seen)
            raise ValidityError(f"classes {missing} have no graphs")

    def __len__(self) -> int:
        return len(self.graphs)

    def labels_matrix(self) -> np.ndarray:
        return np.stack([g.label for g in self.graphs])

    def node_counts(self) -> np.ndarray:
        return np.array([g.node_count for g in self.graphs], dtype=np.int64)


@dataclass(frozen=True)
class SoftLabeledGraph:
    """Graph topology paired with a probability vector over classes."""

    graph: LabeledGraph
    soft_label: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.soft_label, dtype=float)
        validate_soft_label(y)
        object.__setattr__(self, "soft_label", y)


def validate_soft_label(y: np.ndarray, sum_tol: float = SOFT_LABEL_SUM_TOL) -> None:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValidityError("soft label must be a vector")
    if np.any(y < 0.0) or np.any(y > 1.0):
        raise ValidityError(f"soft label entries outside [0, 1]: {y}")
    if abs(float(y.sum()) - 1.0) > sum_tol:
        raise ValidityError(f"soft label sums to {y.sum()!r}, not 1")


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise LoadError(f"missing dataset file: {path}")
    with open(path) as fh:
        return [line.strip() for line in fh if line.strip()]


def _parse_int_pair(line: str, path: Path, lineno: int) -> tuple[int, int]:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) != 2:
        raise FormatError(f"{path}:{lineno}: expected 'i, j', got {line!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise FormatError(f"{path}:{lineno}: non-integer edge entry {line!r}") from exc


def load_tudataset(data_dir, name: str) -> Dataset:
    """Load ``data_dir/name/{name}_*.txt`` into a :class:`Dataset`.

    Duplicate directed edge entries collapse to one undirected edge,
    self-loops are dropped (their count is logged as a warning), and raw
    integer class labels are remapped to contiguous ``0..K-1`` in sorted
    order of the distinct raw values.
    """
    base = Path(data_dir) / name
    a_path = base / f"{name}_A.txt"
    ind_path = base / f"{name}_graph_indicator.txt"
    lab_path = base / f"{name}_graph_labels.txt"

    indicator = []
    for lineno, line in enumerate(_read_lines(ind_path), 1):
        try:
            indicator.append(int(line))
        except ValueError as exc:
            raise FormatError(f"{ind_path}:{lineno}: non-integer graph id {line!r}") from exc
    if not indicator:
        raise FormatError(f"{ind_path}: empty indicator file")

    raw_labels = []
    for lineno, line in enumerate(_read_lines(lab_path), 1):
        try:
            raw_labels.append(int(line))
        except ValueError as exc:
            raise FormatError(f"{lab_path}:{lineno}: non-integer label {line!r}") from exc
    graph_count = len(raw_labels)

    # Node n (1-indexed) belongs to graph indicator[n-1]; node ids must be
    # local-contiguous per graph for the TUDataset convention to hold.
    node_graph = np.asarray(indicator, dtype=np.int64)
    if node_graph.min() < 1 or node_graph.max() > graph_count:
        raise FormatError(
            f"{ind_path}: graph ids span {node_graph.min()}..{node_graph.max()} "
            f"but labels file has {graph_count} graphs"
        )
    nodes_per_graph = np.bincount(node_graph, minlength=graph_count + 1)[1:]
    if np.any(nodes_per_graph == 0):
        empty = int(np.argmin(nodes_per_graph)) + 1
        raise FormatError(f"graph {empty} has 0 nodes")

    # Map each global node id to (graph, local index).
    local_index = np.empty(len(indicator) + 1, dtype=np.int64)
    counters = np.zeros(graph_count + 1, dtype=np.int64)
    for node_id, g_id in enumerate(indicator, 1):
        local_index[node_id] = counters[g_id]
        counters[g_id] += 1

    edge_sets: list[set[tuple[int, int]]] = [set() for _ in range(graph_count)]
    self_loops = 0
    total_nodes = len(indicator)
    for lineno, line in enumerate(_read_lines(a_path), 1):
        u, v = _parse_int_pair(line, a_path, lineno)
        if not (1 <= u <= total_nodes) or not (1 <= v <= total_nodes):
            raise FormatError(
                f"{a_path}:{lineno}: node id out of range 1..{total_nodes}: {line!r}"
            )
        gu, gv = indicator[u - 1], indicator[v - 1]
        if gu != gv:
            raise FormatError(
                f"{a_path}:{lineno}: edge joins nodes of graphs {gu} and {gv}"
            )
        if u == v:
            self_loops += 1
            continue
        i, j = int(local_index[u]), int(local_index[v])
        edge_sets[gu - 1].add((min(i, j), max(i, j)))
    if self_loops:
        logger.warning("%s: dropped %d self-loop entries", name, self_loops)

    distinct = sorted(set(raw_labels))
    class_count = len(distinct)
    remap = {raw: k for k, raw in enumerate(distinct)}

    graphs = []
    for g in range(graph_count):
        label = np.zeros(class_count)
        label[remap[raw_labels[g]]] = 1.0
        graphs.append(
            LabeledGraph(
                node_count=int(nodes_per_graph[g]),
                edges=frozenset(edge_sets[g]),
                label=label,
            )
        )
    return Dataset(graphs=tuple(graphs), class_count=class_count, name=name)


def load_soft_labels(path) -> np.ndarray:
    """Read a soft-label sidecar file into a (graphs x K) array."""
    path = Path(path)
    rows = []
    for lineno, line in enumerate(_read_lines(path), 1):
        try:
            row = np.array([float(p.strip()) for p in line.split(",")], dtype=float)
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-numeric soft label {line!r}") from exc
        validate_soft_label(row, sum_tol=SIDECAR_SUM_TOL)
        rows.append(row)
    if not rows:
        raise FormatError(f"{path}: empty soft-label file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise FormatError(f"{path}: inconsistent soft-label widths {sorted(widths)}")
    return np.stack(rows)


def write_augmented_dataset(
    out_dir,
    name: str,
    originals: Dataset,
    new_graphs: list[SoftLabeledGraph],
    manifest: dict | None = None,
) -> None:
    """Write originals plus generated graphs in TUDataset format.

    Originals get their one-hot labels as soft labels; generated graphs get
    hard labels by arg-max of their soft label.  A ``manifest.json`` echoes
    whatever run metadata the caller supplies.
    """
    for sg in new_graphs:
        if len(sg.soft_label) != originals.class_count:
            raise ConfigError(
                f"generated soft label has length {len(sg.soft_label)}, "
                f"dataset has {originals.class_count} classes"
            )
    out = Path(out_dir) / name
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise WriteError(f"cannot create output directory {out}: {exc}") from exc

    topologies = [g for g in originals.graphs]
    hard_labels = [g.label_index for g in originals.graphs]
    soft_labels = [g.label for g in originals.graphs]
    for sg in new_graphs:
        topologies.append(sg.graph)
        hard_labels.append(int(np.argmax(sg.soft_label)))
        soft_labels.append(sg.soft_label)

    a_lines = []
    indicator_lines = []
    offset = 0
    for g_idx, g in enumerate(topologies, 1):
        directed = []
        for i, j in g.sorted_edges():
            directed.append((i + 1 + offset, j + 1 + offset))
            directed.append((j + 1 + offset, i + 1 + offset))
        for u, v in sorted(directed):
            a_lines.append(f"{u}, {v}")
        indicator_lines.extend([str(g_idx)] * g.node_count)
        offset += g.node_count

    label_lines = [str(k) for k in hard_labels]
    soft_lines = [", ".join(_format_float(x) for x in y) for y in soft_labels]

    files = {
        f"{name}_A.txt": a_lines,
        f"{name}_graph_indicator.txt": indicator_lines,
        f"{name}_graph_labels.txt": label_lines,
        f"{name}_graph_soft_labels.txt": soft_lines,
    }
    try:
        for fname, lines in files.items():
            with open(out / fname, "w") as fh:
                fh.write("\n".join(lines))
                fh.write("\n")
        payload = dict(manifest or {})
        payload.setdefault("name", name)
        payload.setdefault("counts", {})
        payload["counts"].setdefault("original", len(originals))
        payload["counts"].setdefault("new", len(new_graphs))
        payload["counts"].setdefault("classes", originals.class_count)
        with open(out / "manifest.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise WriteError(f"failed writing dataset files under {out}: {exc}") from exc
