"""Branch-level view of the clusterpath and the label schedules along it.

The T per-sample trajectories collapse into one branch per class-level
cluster by averaging over the index sets found at the branching point
``lambda_star``.  Each branch then carries a soft-label path: a convex
combination of the branch's class-proportion vector at 0 and the global
class proportions at full fusion, scheduled by the branch's normalized
rate of change.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cvxclust import ClusterPath, LambdaGrid, assignments_from_centroids, solve_at
from .errors import ConfigError, PartitionError, ValidityError

RATE_DENOM_FLOOR = 1e-12
MAX_REFINEMENTS = 20

PAPER_ORIENTATION = "paper"
CONSISTENT_ORIENTATION = "endpoint-consistent"
ORIENTATIONS = (PAPER_ORIENTATION, CONSISTENT_ORIENTATION)


@dataclass(frozen=True)
class ExtendedClusterPath:
    """K branch trajectories with their label anchor vectors."""

    grid: LambdaGrid
    branches: np.ndarray  # (K, grid, p)
    branch_index_sets: tuple[tuple[int, ...], ...]
    lambda_star: float
    anchors_start: np.ndarray  # (K, classes): class proportions within branch
    anchors_end: np.ndarray  # (K, classes): global class proportions

    @property
    def branch_count(self) -> int:
        return self.branches.shape[0]

    def to_json_dict(self, include_branches: bool = False) -> dict:
        out = {
            "lambda_star": float(self.lambda_star),
            "index_sets": [list(s) for s in self.branch_index_sets],
            "anchors_start": self.anchors_start.tolist(),
            "anchors_end": self.anchors_end.tolist(),
        }
        if include_branches:
            out["branches"] = self.branches.tolist()
        return out


@dataclass(frozen=True)
class LabelPath:
    """Per-branch soft labels and rate values on the grid."""

    grid: LambdaGrid
    values: np.ndarray  # (K, grid, classes)
    rates: np.ndarray  # (K, grid)
    orientation: str
    clamped_branches: tuple[int, ...]


def _canonical_index_sets(labels: np.ndarray) -> tuple[tuple[int, ...], ...]:
    sets = []
    for c in range(labels.max() + 1):
        sets.append(tuple(int(i) for i in np.nonzero(labels == c)[0]))
    return tuple(sets)


def _split_largest(index_sets, reference: np.ndarray, target: int):
    """Grow the partition to ``target`` cells by bisecting the largest cell.

    A deterministic 2-means on the reference centroids (farthest-pair init,
    Lloyd updates) splits each cell; identical rows fall back to an index
    split so the partition always reaches the target size.
    """
    cells = [list(s) for s in index_sets]
    while len(cells) < target:
        order = max(range(len(cells)), key=lambda i: (len(cells[i]), -i))
        members = np.array(cells.pop(order), dtype=np.int64)
        pts = reference[members]
        diffs = np.abs(pts[:, None, :] - pts[None, :, :]).max(axis=2)
        i0, j0 = np.unravel_index(np.argmax(diffs), diffs.shape)
        if diffs[i0, j0] == 0.0:
            half = max(1, len(members) // 2)
            first, second = members[:half], members[half:]
        else:
            centers = np.stack([pts[i0], pts[j0]])
            assign = np.full(len(members), -1, dtype=np.int64)
            for _ in range(20):
                d = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2)
                new_assign = np.argmin(d, axis=1)
                if np.array_equal(new_assign, assign):
                    break
                assign = new_assign
                for c in (0, 1):
                    if np.any(assign == c):
                        centers[c] = pts[assign == c].mean(axis=0)
            first, second = members[assign == 0], members[assign == 1]
            if len(first) == 0 or len(second) == 0:
                half = max(1, len(members) // 2)
                first, second = members[:half], members[half:]
        cells.append(sorted(int(i) for i in first))
        cells.append(sorted(int(i) for i in second))
    cells.sort(key=lambda s: s[0])
    return tuple(tuple(s) for s in cells)


def select_branch_lambda(path: ClusterPath, branch_count: int):
    """Smallest grid value whose cluster count equals ``branch_count``.

    Falls back to bisection between the bracketing grid values when the
    count jumps past the target, and to splitting the largest cluster when
    even refinement cannot land on it.
    Returns ``(lambda_star, index_sets)``.
    """
    t = path.sample_count
    if branch_count < 1:
        raise ConfigError(f"branch count must be >= 1, got {branch_count}")
    if branch_count > t:
        raise ConfigError(f"branch count {branch_count} exceeds sample count {t}")

    counts = path.cluster_counts
    lams = path.grid.values
    hits = np.nonzero(counts == branch_count)[0]
    if len(hits):
        m = int(hits[0])
        return float(lams[m]), _canonical_index_sets(path.assignments[m])

    threshold = path.delta_fuse * float(
        path.descriptors.max() - path.descriptors.min()
    )
    bracket = None
    for m in range(len(lams) - 1):
        if counts[m] > branch_count and counts[m + 1] < branch_count:
            bracket = m
            break
    if bracket is not None:
        lo, hi = float(lams[bracket]), float(lams[bracket + 1])
        warm = path.centroids[bracket]
        for _ in range(MAX_REFINEMENTS):
            mid = (lo + hi) / 2.0
            u = solve_at(path.descriptors, path.weights, mid, warm_start=warm, tol=path.tol)
            labels = assignments_from_centroids(u, threshold)
            count = labels.max() + 1
            if count == branch_count:
                return float(mid), _canonical_index_sets(labels)
            if count > branch_count:
                lo, warm = mid, u
            else:
                hi = mid

    below = np.nonzero(counts <= branch_count)[0]
    m = int(below[0])
    reference = path.centroids[m - 1] if m > 0 else path.centroids[0]
    sets = _split_largest(
        _canonical_index_sets(path.assignments[m]), reference, branch_count
    )
    return float(lams[m]), sets


def collapse_branches(
    path: ClusterPath, index_sets, lambda_star: float = 0.0
) -> ExtendedClusterPath:
    """Average per-sample trajectories over each index set (one branch per set)."""
    t = path.sample_count
    seen: set[int] = set()
    sets = []
    for s in index_sets:
        members = tuple(int(i) for i in s)
        if len(members) == 0:
            raise PartitionError("empty branch index set")
        if any(not 0 <= i < t for i in members):
            raise PartitionError(f"index set {members} out of range for {t} samples")
        if seen & set(members):
            raise PartitionError("branch index sets overlap")
        seen.update(members)
        sets.append(members)
    if seen != set(range(t)):
        raise PartitionError("branch index sets do not cover all samples")

    branches = np.stack(
        [path.centroids[:, list(s), :].mean(axis=1) for s in sets]
    )
    # All samples sit at the grand mean at full fusion; reuse that exact
    # vector rather than re-averaging identical rows.
    branches[:, -1, :] = path.centroids[-1, 0, :]

    class_ids = path.weights.class_ids
    n_classes = path.weights.class_count
    anchors_start = np.stack(
        [
            np.bincount(class_ids[list(s)], minlength=n_classes) / len(s)
            for s in sets
        ]
    )
    global_props = np.bincount(class_ids, minlength=n_classes) / t
    anchors_end = np.tile(global_props, (len(sets), 1))
    return ExtendedClusterPath(
        grid=path.grid,
        branches=branches,
        branch_index_sets=tuple(sets),
        lambda_star=float(lambda_star),
        anchors_start=anchors_start,
        anchors_end=anchors_end,
    )


def build_extended_path(path: ClusterPath, branch_count: int) -> ExtendedClusterPath:
    """Select the branching point for ``branch_count`` branches and collapse."""
    lambda_star, sets = select_branch_lambda(path, branch_count)
    return collapse_branches(path, sets, lambda_star=lambda_star)


def compute_rate(branch: np.ndarray, grid) -> np.ndarray:
    """Normalized progress of a branch from its origin to full fusion.

    Uses the squared-norm identity for the path integral, so the value is
    exact on the grid: 0 at the origin and 1 at fusion.  A branch whose
    endpoint norms coincide (stationary branch) progresses linearly.
    """
    lams = grid.values if isinstance(grid, LambdaGrid) else np.asarray(grid, float)
    branch = np.asarray(branch, dtype=float)
    if branch.shape[0] != len(lams):
        raise ConfigError(
            f"branch has {branch.shape[0]} grid points, grid has {len(lams)}"
        )
    norms = np.einsum("gp,gp->g", branch, branch)
    denom = norms[-1] - norms[0]
    if abs(denom) < RATE_DENOM_FLOOR:
        return lams.copy()
    # + 0.0 normalizes the -0.0 produced by a negative denominator.
    return np.clip((norms - norms[0]) / denom, 0.0, 1.0) + 0.0


def rate_at(ext: ExtendedClusterPath, branch: int, lam: float) -> float:
    """Rate value at an off-grid mixup parameter via the interpolated branch."""
    u = branch_value_at(ext, branch, lam)
    traj = ext.branches[branch]
    n0 = float(traj[0] @ traj[0])
    n1 = float(traj[-1] @ traj[-1])
    denom = n1 - n0
    if abs(denom) < RATE_DENOM_FLOOR:
        return float(lam)
    return float(np.clip((float(u @ u) - n0) / denom, 0.0, 1.0))


def branch_value_at(ext: ExtendedClusterPath, branch: int, lam: float) -> np.ndarray:
    """Piecewise-linear interpolation of a branch trajectory between grid points."""
    lams = ext.grid.values
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"mixup parameter must lie in [0, 1], got {lam}")
    traj = ext.branches[branch]
    idx = int(np.searchsorted(lams, lam, side="right")) - 1
    if idx >= len(lams) - 1:
        return traj[-1].copy()
    if lams[idx] == lam:
        return traj[idx].copy()
    left, right = lams[idx], lams[idx + 1]
    frac = (lam - left) / (right - left)
    return (1.0 - frac) * traj[idx] + frac * traj[idx + 1]


def label_at(anchor_start: np.ndarray, anchor_end: np.ndarray, g: float) -> np.ndarray:
    """Convex combination ``g * anchor_start + (1 - g) * anchor_end``."""
    if not 0.0 <= g <= 1.0:
        raise ValidityError(f"rate value must lie in [0, 1], got {g}")
    a0 = np.asarray(anchor_start, dtype=float)
    a1 = np.asarray(anchor_end, dtype=float)
    return g * a0 + (1.0 - g) * a1


def _orientation_weight(g: float, orientation: str) -> float:
    if orientation == PAPER_ORIENTATION:
        return g
    if orientation == CONSISTENT_ORIENTATION:
        return 1.0 - g
    raise ConfigError(f"unknown label orientation {orientation!r}")


def build_label_paths(
    ext: ExtendedClusterPath, orientation: str = CONSISTENT_ORIENTATION
) -> LabelPath:
    """Evaluate each branch's soft-label schedule on the grid.

    With the endpoint-consistent orientation the label at 0 is the branch's
    own class mix and the label at 1 the global class mix, matching the data
    path's endpoints; the paper orientation swaps the two.
    """
    if orientation not in ORIENTATIONS:
        raise ConfigError(f"unknown label orientation {orientation!r}")
    k = ext.branch_count
    n_grid = len(ext.grid)
    rates = np.stack([compute_rate(ext.branches[b], ext.grid) for b in range(k)])
    clamped = []
    values = np.empty((k, n_grid, ext.anchors_start.shape[1]))
    for b in range(k):
        traj = ext.branches[b]
        norms = np.einsum("gp,gp->g", traj, traj)
        denom = norms[-1] - norms[0]
        if abs(denom) >= RATE_DENOM_FLOOR:
            raw = (norms - norms[0]) / denom
            if np.any(raw < 0.0) or np.any(raw > 1.0):
                clamped.append(b)
        for m in range(n_grid):
            w = _orientation_weight(float(rates[b, m]), orientation)
            values[b, m] = label_at(ext.anchors_start[b], ext.anchors_end[b], w)
    return LabelPath(
        grid=ext.grid,
        values=values,
        rates=rates,
        orientation=orientation,
        clamped_branches=tuple(clamped),
    )


def label_value_at(
    label_path: LabelPath, ext: ExtendedClusterPath, branch: int, lam: float
) -> np.ndarray:
    """Soft label of a branch at an off-grid mixup parameter."""
    g = rate_at(ext, branch, lam)
    w = _orientation_weight(g, label_path.orientation)
    return label_at(ext.anchors_start[branch], ext.anchors_end[branch], w)
