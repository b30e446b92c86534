"""Data- and label-mixup functions and the generation loop.

Two data mixers are available: points along the extended clusterpath, and
linear interpolation between per-class graphons.  Labels can follow the
same clusterpath schedule or a linear / sigmoid / logit ramp between the
endpoint label vectors.  Generation draws use four independent seeded
streams (mixup parameter, branch or class-pair choice, node count, edge
sampling) so the parameter draws coincide across mixer variants run under
the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ValidityError
from .graph_io import Dataset, LabeledGraph, SoftLabeledGraph
from .graphon import Graphon, clip_unit, estimate_graphon, sample_graph, vectorize
from .mixpath import ExtendedClusterPath, LabelPath, branch_value_at, label_value_at

DATA_FUNCTIONS = ("clusterpath", "linear")
LABEL_FUNCTIONS = ("linear", "sigmoid", "logit", "clusterpath")
DEFAULT_SHARPNESS = 5.0


@dataclass(frozen=True)
class LambdaSource:
    """Distribution of the mixup parameter: uniform on [0, 1] or a constant."""

    kind: str = "uniform"
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "constant"):
            raise ConfigError(f"unknown lambda source {self.kind!r}")
        if self.kind == "constant":
            if self.value is None or not 0.0 <= self.value <= 1.0:
                raise ConfigError(f"constant lambda must lie in [0, 1], got {self.value}")

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == "constant":
            return float(self.value)
        return float(rng.random())


@dataclass(frozen=True)
class MixupSpec:
    """Which mixer runs on data and labels, with the ramp sharpness."""

    data_fn: str = "clusterpath"
    label_fn: str = "clusterpath"
    a: float = DEFAULT_SHARPNESS
    lambda_source: LambdaSource = field(default_factory=LambdaSource)

    def __post_init__(self):
        if self.data_fn not in DATA_FUNCTIONS:
            raise ConfigError(f"data_fn must be one of {DATA_FUNCTIONS}, got {self.data_fn!r}")
        if self.label_fn not in LABEL_FUNCTIONS:
            raise ConfigError(
                f"label_fn must be one of {LABEL_FUNCTIONS}, got {self.label_fn!r}"
            )
        if not self.a > 0.0:
            raise ConfigError(f"sharpness a must be positive, got {self.a}")


@dataclass(frozen=True)
class ClassGraphonSet:
    """One graphon per class, shared resolution."""

    graphons: tuple[Graphon, ...]

    def __post_init__(self):
        object.__setattr__(self, "graphons", tuple(self.graphons))
        if not self.graphons:
            raise ConfigError("class graphon set must not be empty")
        resolutions = {g.resolution for g in self.graphons}
        if len(resolutions) != 1:
            raise ConfigError(f"class graphons disagree on resolution: {resolutions}")

    @property
    def class_count(self) -> int:
        return len(self.graphons)


def estimate_class_graphons(dataset: Dataset, resolution: int) -> ClassGraphonSet:
    """Entry-wise mean of the per-graph estimates within each class."""
    sums = [None] * dataset.class_count
    counts = [0] * dataset.class_count
    for g in dataset.graphs:
        w = estimate_graphon(g, resolution).matrix
        k = g.label_index
        sums[k] = w if sums[k] is None else sums[k] + w
        counts[k] += 1
    for k, n in enumerate(counts):
        if n == 0:
            raise ConfigError(f"class {k} has no graphs to estimate from")
    return ClassGraphonSet(
        graphons=tuple(Graphon(clip_unit(s / n)) for s, n in zip(sums, counts))
    )


def linear_graphon_mix(
    class_set: ClassGraphonSet, k: int, k_prime: int, lam: float
) -> Graphon:
    """Entry-wise interpolation between two class graphons."""
    if k == k_prime:
        raise ConfigError(f"class pair must be distinct, got ({k}, {k_prime})")
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"mixup parameter must lie in [0, 1], got {lam}")
    w_k = class_set.graphons[k].matrix
    w_kp = class_set.graphons[k_prime].matrix
    return Graphon(clip_unit(lam * w_k + (1.0 - lam) * w_kp))


def linear_label_mix(y_i: np.ndarray, y_j: np.ndarray, lam: float) -> np.ndarray:
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"mixup parameter must lie in [0, 1], got {lam}")
    return lam * np.asarray(y_i, float) + (1.0 - lam) * np.asarray(y_j, float)


def sigmoid_weight(lam: float, a: float) -> float:
    """Smooth ramp 1 / (1 + exp(-a(2x - 1))); equals 1/2 at x = 1/2."""
    return 1.0 / (1.0 + math.exp(-a * (2.0 * lam - 1.0)))


def logit_weight(lam: float, a: float) -> float:
    """Ramp log(x / (1 - x)) / (2a) + 1/2, clamped to [0, 1].

    The endpoints take their limit values 0 and 1.
    """
    if lam <= 0.0:
        return 0.0
    if lam >= 1.0:
        return 1.0
    return float(np.clip(math.log(lam / (1.0 - lam)) / (2.0 * a) + 0.5, 0.0, 1.0))


def sigmoid_label_mix(y_i, y_j, lam: float, a: float) -> np.ndarray:
    w = sigmoid_weight(lam, a)
    return w * np.asarray(y_i, float) + (1.0 - w) * np.asarray(y_j, float)


def logit_label_mix(y_i, y_j, lam: float, a: float) -> np.ndarray:
    w = logit_weight(lam, a)
    return w * np.asarray(y_i, float) + (1.0 - w) * np.asarray(y_j, float)


def _endpoint_weight(label_fn: str, lam: float, a: float) -> float:
    if label_fn == "linear":
        return float(lam)
    if label_fn == "sigmoid":
        return sigmoid_weight(lam, a)
    if label_fn == "logit":
        return logit_weight(lam, a)
    raise ConfigError(f"label_fn {label_fn!r} has no endpoint weight")


def majority_branch_map(ext: ExtendedClusterPath, weights_class_ids: np.ndarray) -> dict:
    """Class index -> branch holding the majority of that class's samples."""
    mapping = {}
    n_classes = ext.anchors_start.shape[1]
    for k in range(n_classes):
        best, best_count = 0, -1
        for b, members in enumerate(ext.branch_index_sets):
            count = int(np.sum(weights_class_ids[list(members)] == k))
            if count > best_count:
                best, best_count = b, count
        mapping[k] = best
    return mapping


def generate(
    dataset: Dataset,
    extended_path: ExtendedClusterPath | None,
    label_paths: LabelPath | None,
    class_set: ClassGraphonSet | None,
    spec: MixupSpec,
    count: int,
    node_count_source: np.ndarray | None,
    rng: np.random.Generator,
    class_ids: np.ndarray | None = None,
    record: dict | None = None,
) -> list[SoftLabeledGraph]:
    """Draw ``count`` new labeled graphs according to ``spec``.

    ``node_count_source`` is the pool of node counts sampled with
    replacement (defaults to the training-set sizes).  ``class_ids`` carries
    the per-sample class of the clusterpath inputs and is required for the
    linear-data / clusterpath-label cross combination.  When ``record`` is a
    dict it is filled with the per-draw parameter, branch/pair, and node
    count choices for the run manifest.
    """
    if count < 0:
        raise ConfigError(f"count must be nonnegative, got {count}")
    needs_path = spec.data_fn == "clusterpath" or spec.label_fn == "clusterpath"
    if needs_path and (extended_path is None or label_paths is None):
        raise ConfigError(
            f"mixup spec ({spec.data_fn}/{spec.label_fn}) needs the extended "
            "clusterpath and label paths"
        )
    if spec.data_fn == "linear" and class_set is None:
        raise ConfigError("linear data mixup needs per-class graphons")
    if spec.data_fn == "linear" and class_set.class_count < 2:
        raise ConfigError("linear data mixup needs at least two classes")

    sizes = (
        np.asarray(node_count_source, dtype=np.int64)
        if node_count_source is not None
        else dataset.node_counts()
    )
    if len(sizes) == 0 or np.any(sizes < 1):
        raise ConfigError("node count pool must hold positive sizes")

    lam_rng, choice_rng, size_rng, edge_rng = rng.spawn(4)
    n_classes = dataset.class_count
    eye = np.eye(n_classes)

    class_to_branch = None
    if spec.data_fn == "linear" and spec.label_fn == "clusterpath":
        if class_ids is None:
            raise ConfigError(
                "linear data with clusterpath labels needs the sample class ids"
            )
        class_to_branch = majority_branch_map(extended_path, np.asarray(class_ids))

    lam_draws: list[float] = []
    choices: list = []
    node_counts: list[int] = []
    out: list[SoftLabeledGraph] = []
    for _ in range(count):
        lam = spec.lambda_source.draw(lam_rng)
        lam_draws.append(lam)
        if spec.data_fn == "clusterpath":
            branch = int(choice_rng.integers(extended_path.branch_count))
            choices.append(branch)
            theta_new = branch_value_at(extended_path, branch, lam)
            d = extended_path.branches.shape[2]
            side = math.isqrt(d)
            graphon_new = Graphon(clip_unit(theta_new.reshape(side, side)))
            if spec.label_fn == "clusterpath":
                y_new = label_value_at(label_paths, extended_path, branch, lam)
            else:
                w = _endpoint_weight(spec.label_fn, lam, spec.a)
                y_new = w * extended_path.anchors_start[branch] + (1.0 - w) * (
                    extended_path.anchors_end[branch]
                )
        else:
            pair = choice_rng.choice(class_set.class_count, size=2, replace=False)
            k, k_prime = int(pair[0]), int(pair[1])
            choices.append((k, k_prime))
            graphon_new = linear_graphon_mix(class_set, k, k_prime, lam)
            if spec.label_fn == "clusterpath":
                branch = class_to_branch[k]
                y_new = label_value_at(label_paths, extended_path, branch, lam)
            else:
                w = _endpoint_weight(spec.label_fn, lam, spec.a)
                y_new = w * eye[k] + (1.0 - w) * eye[k_prime]

        n = int(size_rng.choice(sizes))
        node_counts.append(n)
        edges = sample_graph(graphon_new, n, edge_rng)
        hard = np.zeros(n_classes)
        hard[int(np.argmax(y_new))] = 1.0
        graph = LabeledGraph(node_count=n, edges=edges, label=hard)
        out.append(SoftLabeledGraph(graph=graph, soft_label=np.asarray(y_new, float)))

    if record is not None:
        record["lambdas"] = [float(x) for x in lam_draws]
        record["choices"] = [
            list(c) if isinstance(c, tuple) else int(c) for c in choices
        ]
        record["node_counts"] = [int(n) for n in node_counts]
    return out
