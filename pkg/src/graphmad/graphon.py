"""Piecewise-constant graphon descriptors: estimation, sampling, vectorization.

A graphon is stored as a D x D symmetric matrix of edge probabilities.  The
estimator is the sorting-and-smoothing histogram: sort nodes by degree,
split them into D near-equal contiguous bins, and average the adjacency
over each block.  Sampling inverts the model: draw one uniform latent per
node and connect each pair with the probability of its latent block.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EstimationError, LoadError, ShapeError, ValidityError, WriteError
from .graph_io import Dataset, LabeledGraph

BOUNDS_SLACK = 1e-9
SYMMETRY_TOL = 1e-6


@dataclass(frozen=True)
class Graphon:
    """D x D symmetric matrix with entries in [0, 1]."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"graphon matrix must be square, got shape {m.shape}")
        if not np.array_equal(m, m.T):
            raise ValidityError("graphon matrix must be exactly symmetric")
        if m.min() < 0.0 or m.max() > 1.0:
            raise ValidityError(
                f"graphon entries must lie in [0, 1], got range "
                f"[{m.min()}, {m.max()}]"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def resolution(self) -> int:
        return self.matrix.shape[0]

    @staticmethod
    def constant(value: float, resolution: int = 1) -> "Graphon":
        return Graphon(np.full((resolution, resolution), float(value)))


def clip_unit(matrix: np.ndarray, slack: float = BOUNDS_SLACK) -> np.ndarray:
    """Clip floating-point spill outside [0, 1]; reject anything larger."""
    m = np.asarray(matrix, dtype=float)
    if m.min() < -slack or m.max() > 1.0 + slack:
        raise ValidityError(
            f"values exceed [0, 1] beyond slack {slack}: range [{m.min()}, {m.max()}]"
        )
    return np.clip(m, 0.0, 1.0)


def degree_sorted_bins(graph: LabeledGraph, resolution: int) -> list[np.ndarray]:
    """Split nodes into ``resolution`` contiguous bins by descending degree.

    Ties break by original node index so the split is deterministic.  Bin
    sizes differ by at most one, larger bins first.
    """
    if resolution < 1:
        raise EstimationError(f"resolution must be >= 1, got {resolution}")
    if resolution > graph.node_count:
        raise EstimationError(
            f"resolution {resolution} exceeds node count {graph.node_count}; "
            "bins would be empty"
        )
    deg = graph.degrees()
    order = np.lexsort((np.arange(graph.node_count), -deg))
    return np.array_split(order, resolution)


def estimate_graphon(graph: LabeledGraph, resolution: int) -> Graphon:
    """Histogram (SAS-style) graphon estimate of a single graph.

    Entry (a, b) is the edge density between degree bins a and b; diagonal
    blocks divide by the number of unordered within-bin pairs so that the
    estimate matches a sampler that never draws self-loops.
    """
    bins = degree_sorted_bins(graph, resolution)
    d = resolution
    bin_of = np.empty(graph.node_count, dtype=np.int64)
    for b, members in enumerate(bins):
        bin_of[members] = b

    counts = np.zeros((d, d), dtype=np.int64)
    for i, j in graph.edges:
        a, b = bin_of[i], bin_of[j]
        lo, hi = min(a, b), max(a, b)
        counts[lo, hi] += 1

    sizes = np.array([len(b) for b in bins], dtype=np.int64)
    matrix = np.zeros((d, d), dtype=float)
    for a in range(d):
        for b in range(a, d):
            if a == b:
                pairs = sizes[a] * (sizes[a] - 1) // 2
            else:
                pairs = sizes[a] * sizes[b]
            density = counts[a, b] / pairs if pairs > 0 else 0.0
            matrix[a, b] = density
            matrix[b, a] = density
    return Graphon(matrix)


def latent_bins(z: np.ndarray, resolution: int) -> np.ndarray:
    """Map latent positions in [0, 1] to block indices; z == 1 maps to the last."""
    z = np.asarray(z, dtype=float)
    return np.minimum(np.floor(z * resolution).astype(np.int64), resolution - 1)


def sample_graph(
    graphon: Graphon, node_count: int, rng: np.random.Generator
) -> frozenset[tuple[int, int]]:
    """Sample an undirected simple-graph topology from a graphon.

    Returns the edge set over nodes ``0..node_count-1``: one uniform latent
    per node, then an independent Bernoulli per unordered pair with the
    probability of the pair's latent block.
    """
    if node_count < 1:
        raise ValidityError(f"node_count must be >= 1, got {node_count}")
    z = rng.random(node_count)
    bins = latent_bins(z, graphon.resolution)
    iu, ju = np.triu_indices(node_count, k=1)
    probs = graphon.matrix[bins[iu], bins[ju]]
    mask = rng.random(len(probs)) < probs
    return frozenset(zip(iu[mask].tolist(), ju[mask].tolist()))


def vectorize(graphon: Graphon) -> np.ndarray:
    """Row-major flattening of the graphon matrix."""
    return graphon.matrix.reshape(-1).copy()


def devectorize(vector: np.ndarray, resolution: int | None = None) -> Graphon:
    """Inverse of :func:`vectorize`; symmetrizes by averaging.

    Asymmetry beyond ``SYMMETRY_TOL`` is rejected rather than silently
    averaged away.
    """
    v = np.asarray(vector, dtype=float).reshape(-1)
    if resolution is None:
        resolution = math.isqrt(len(v))
    if resolution * resolution != len(v):
        raise ShapeError(f"vector of length {len(v)} is not a square matrix")
    m = v.reshape(resolution, resolution)
    gap = float(np.max(np.abs(m - m.T))) if len(v) else 0.0
    if gap > SYMMETRY_TOL:
        raise ValidityError(f"matrix asymmetry {gap} exceeds {SYMMETRY_TOL}")
    m = (m + m.T) / 2.0
    return Graphon(clip_unit(m))


@dataclass(frozen=True)
class DescriptorSet:
    """Vectorized graphon descriptors with their one-hot labels."""

    descriptors: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.descriptors, dtype=float)
        labels = np.asarray(self.labels, dtype=float)
        if theta.ndim != 2 or labels.ndim != 2 or theta.shape[0] != labels.shape[0]:
            raise ShapeError(
                f"descriptors {theta.shape} and labels {labels.shape} disagree"
            )
        d = math.isqrt(theta.shape[1])
        if d * d != theta.shape[1]:
            raise ShapeError(f"descriptor length {theta.shape[1]} is not square")
        object.__setattr__(self, "descriptors", theta)
        object.__setattr__(self, "labels", labels)

    @property
    def sample_count(self) -> int:
        return self.descriptors.shape[0]

    @property
    def resolution(self) -> int:
        return math.isqrt(self.descriptors.shape[1])

    def class_indices(self) -> np.ndarray:
        return np.argmax(self.labels, axis=1)


def build_descriptor_set(dataset: Dataset, resolution: int) -> DescriptorSet:
    """Estimate one graphon per graph and stack the vectorized results."""
    rows = [vectorize(estimate_graphon(g, resolution)) for g in dataset.graphs]
    return DescriptorSet(descriptors=np.stack(rows), labels=dataset.labels_matrix())


def save_graphon(graphon: Graphon, path) -> None:
    payload = {"D": graphon.resolution, "W": vectorize(graphon).tolist()}
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh)
            fh.write("\n")
    except OSError as exc:
        raise WriteError(f"cannot write graphon JSON {path}: {exc}") from exc


def load_graphon(path) -> Graphon:
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"missing graphon JSON: {path}")
    with open(path) as fh:
        payload = json.load(fh)
    try:
        d = int(payload["D"])
        w = np.asarray(payload["W"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidityError(f"malformed graphon JSON {path}: {exc}") from exc
    return devectorize(w, d)
