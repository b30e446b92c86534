"""Weighted convex clustering over a mixup-parameter grid.

The problem solved at each grid value lam in (0, 1) is

    minimize_u  sum_i ||u_i - theta_i||_2^2
                + (lam / (1 - lam)) * sum_{i<j} w_ij ||u_i - u_j||_1

whose solution path runs from the data (lam = 0) to the grand mean
(lam = 1).  With a squared-l2 fidelity and l1 fusion the objective is
separable across the descriptor coordinates, so the solver runs an ADMM
scheme on blocks of coordinates (closed-form primal update on the complete
fusion graph via the Sherman-Morrison identity), then polishes the iterate
by solving the per-coordinate stationarity equations exactly for the
detected grouping pattern.  Convergence is certified by an explicit
subgradient-selection residual, never by iteration counts alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist, squareform

from .errors import ConfigError, ShapeError, SolverError, ValidityError

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 10_000
DEFAULT_DELTA_FUSE = 1e-4
DEFAULT_GRID_SIZE = 101
GRID_UPPER = 0.99

# Memory cap for the per-chunk edge arrays (floats per array).
_CHUNK_EDGE_FLOATS = 4_000_000


def lambda_to_gamma(lam: float) -> float:
    """Map the mixup parameter in [0, 1) to the fusion penalty scale."""
    if not 0.0 <= lam < 1.0:
        raise ConfigError(f"lambda must lie in [0, 1), got {lam}")
    return lam / (1.0 - lam)


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class FusionWeights:
    """Pairwise fusion multipliers: 1 within a class, epsilon across.

    The class partition implied by the matrix is recovered at construction
    so the solver can use rank-based sign sums instead of dense pair loops.
    """

    matrix: np.ndarray
    epsilon: float

    def __post_init__(self):
        w = np.asarray(self.matrix, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ShapeError(f"weight matrix must be square, got {w.shape}")
        if not np.array_equal(w, w.T):
            raise ValidityError("weight matrix must be symmetric")
        if np.any(np.diag(w) != 0.0):
            raise ValidityError("weight matrix must have a zero diagonal")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        t = w.shape[0]
        off = w[~np.eye(t, dtype=bool)]
        if off.size and not np.all((off == 1.0) | (off == self.epsilon)):
            raise ValidityError("off-diagonal weights must equal 1 or epsilon")
        # Recover class ids from the "weight == 1" relation.
        class_ids = np.full(t, -1, dtype=np.int64)
        next_id = 0
        for i in range(t):
            if class_ids[i] >= 0:
                continue
            same = np.nonzero(w[i] == 1.0)[0]
            class_ids[i] = next_id
            class_ids[same] = next_id
            next_id += 1
        same_mask = class_ids[:, None] == class_ids[None, :]
        expected = np.where(same_mask, 1.0, self.epsilon)
        np.fill_diagonal(expected, 0.0)
        if not np.array_equal(w, expected):
            raise ValidityError("weights are not class-consistent (1 within, epsilon across)")
        object.__setattr__(self, "matrix", w)
        object.__setattr__(self, "class_ids", class_ids)
        object.__setattr__(self, "class_count", int(next_id))

    @property
    def sample_count(self) -> int:
        return self.matrix.shape[0]


def build_weights(labels: np.ndarray, epsilon: float) -> FusionWeights:
    """Fusion weights from one-hot labels: 1 for same class, epsilon across."""
    if not 0.0 < epsilon < 1.0:
        raise ConfigError(f"epsilon must lie in (0, 1), got {epsilon}")
    labels = np.asarray(labels, dtype=float)
    if labels.ndim != 2:
        raise ShapeError(f"labels must be a T x K matrix, got shape {labels.shape}")
    classes = np.argmax(labels, axis=1)
    same = classes[:, None] == classes[None, :]
    w = np.where(same, 1.0, float(epsilon))
    np.fill_diagonal(w, 0.0)
    return FusionWeights(matrix=w, epsilon=float(epsilon))


@dataclass(frozen=True)
class LambdaGrid:
    """Strictly increasing mixup-parameter values 0 = l_0 < ... < 1."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if len(v) < 2:
            raise ConfigError("grid needs at least the two endpoints 0 and 1")
        if v[0] != 0.0 or v[-1] != 1.0:
            raise ConfigError("grid must start at 0 and end at 1")
        if np.any(np.diff(v) <= 0.0):
            raise ConfigError("grid values must be strictly increasing")
        if np.any((v < 0.0) | (v > 1.0)):
            raise ConfigError("grid values must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @staticmethod
    def default(size: int = DEFAULT_GRID_SIZE, upper: float = GRID_UPPER) -> "LambdaGrid":
        if size < 1:
            raise ConfigError(f"grid size must be >= 1, got {size}")
        if not 0.0 < upper < 1.0:
            raise ConfigError(f"grid upper bound must lie in (0, 1), got {upper}")
        body = np.linspace(0.0, upper, size)
        return LambdaGrid(np.concatenate([body, [1.0]]))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class FusionEvent:
    """Clusters that merged when moving to grid value ``lam``."""

    lam: float
    merged: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class ClusterPath:
    """Per-sample centroid trajectories with cluster assignments per grid point."""

    grid: LambdaGrid
    centroids: np.ndarray  # (grid, T, p)
    assignments: np.ndarray  # (grid, T) first-occurrence-canonical ids
    cluster_counts: np.ndarray  # (grid,)
    fusion_events: tuple[FusionEvent, ...]
    monotonicity_violations: tuple[tuple[float, float, int, int], ...]
    descriptors: np.ndarray
    weights: FusionWeights
    tol: float
    delta_fuse: float

    @property
    def sample_count(self) -> int:
        return self.descriptors.shape[0]

    def index_sets(self, grid_index: int) -> list[np.ndarray]:
        labels = self.assignments[grid_index]
        return [np.nonzero(labels == c)[0] for c in range(labels.max() + 1)]

    def to_json_dict(self, include_centroids: bool = False) -> dict:
        out = {
            "lambda_grid": self.values_list(),
            "cluster_counts": [int(c) for c in self.cluster_counts],
            "fusion_events": [
                {"lambda": ev.lam, "merged": [list(part) for part in ev.merged]}
                for ev in self.fusion_events
            ],
            "monotonicity_violations": [
                {"lambda_prev": a, "lambda": b, "count_prev": ca, "count": cb}
                for a, b, ca, cb in self.monotonicity_violations
            ],
        }
        if include_centroids:
            out["centroids"] = self.centroids.tolist()
        return out

    def values_list(self) -> list[float]:
        return [float(x) for x in self.grid.values]


# ---------------------------------------------------------------------------
# Per-coordinate grouping, polishing, and subgradient machinery


def _column_groups(col: np.ndarray, gap: float = 0.0):
    """Group samples by value along one coordinate.

    With ``gap == 0`` groups are exact-equality classes; otherwise values are
    chained single-linkage style whenever consecutive sorted values differ by
    at most ``gap``.  Groups come back in ascending value order.
    """
    order = np.argsort(col, kind="stable")
    sv = col[order]
    if len(col) == 0:
        return []
    if gap > 0.0:
        cuts = np.nonzero(np.diff(sv) > gap)[0]
    else:
        cuts = np.nonzero(np.diff(sv) != 0.0)[0]
    starts = np.concatenate([[0], cuts + 1])
    ends = np.concatenate([cuts + 1, [len(col)]])
    return [order[s:e] for s, e in zip(starts, ends)]


def _snap_column(col: np.ndarray, gap: float) -> np.ndarray:
    """Collapse near-equal values to their group mean (exact ties stay put)."""
    out = col.copy()
    for members in _column_groups(col, gap):
        if len(members) > 1:
            out[members] = col[members].mean()
    return out


def _group_sign_stats(groups, class_ids: np.ndarray, class_count: int):
    """Class-resolved counts of strictly-lower minus strictly-higher samples.

    Returns (sizes, class_counts, diff) where ``diff[a, k]`` is the number of
    class-k samples in groups strictly below group ``a`` minus those strictly
    above.  Everything is O(T + m*K).
    """
    m = len(groups)
    counts = np.zeros((m, class_count), dtype=np.int64)
    for a, members in enumerate(groups):
        counts[a] = np.bincount(class_ids[members], minlength=class_count)
    prefix = np.cumsum(counts, axis=0)
    total = prefix[-1]
    below = prefix - counts
    above = total[None, :] - prefix
    sizes = np.array([len(g) for g in groups], dtype=np.int64)
    return sizes, counts, below - above


def _polish_column(
    col: np.ndarray,
    theta_col: np.ndarray,
    class_ids: np.ndarray,
    class_count: int,
    epsilon: float,
    gamma: float,
) -> np.ndarray:
    """Exact stationary values for the grouping/ordering pattern of ``col``.

    Summing the stationarity conditions over a fused group cancels the
    intra-group subgradient terms, leaving an explicit formula for each
    group value.  The polished column is kept only if it preserves the
    strict group ordering it was derived from.
    """
    groups = _column_groups(col)
    if len(groups) == 0:
        return col
    sizes, counts, diff = _group_sign_stats(groups, class_ids, class_count)
    weighted = epsilon * sizes * diff.sum(axis=1) + (1.0 - epsilon) * (counts * diff).sum(axis=1)
    means = np.array([theta_col[g].mean() for g in groups])
    values = means - gamma * weighted / (2.0 * sizes)
    if len(values) > 1 and np.any(np.diff(values) <= 0.0):
        return col
    if not np.all(np.isfinite(values)):
        return col
    out = np.empty_like(col)
    for a, members in enumerate(groups):
        out[members] = values[a]
    return out


def _group_minimax_selection(
    b: np.ndarray, member_classes: np.ndarray, gamma: float, epsilon: float
) -> float:
    """Exact minimal worst-case residual over intra-group selections.

    By LP duality the optimum equals the tightest cut bound
    (|sum_S b| - capacity(S)) / |S| over subsets S of the group.  Capacities
    depend only on the endpoint classes, so the worst S for fixed per-class
    counts takes each class's largest entries; maximizing over count
    vectors is a max-plus DP over classes, O(g^2) total.  (Cross-validated
    against the direct LP; see the solver tests.)
    """
    g = len(b)
    classes = np.unique(member_classes)
    t_star = 0.0
    for sign in (1.0, -1.0):
        bb = sign * b
        dp = np.zeros(1)
        for c in classes:
            vals = np.sort(bb[member_classes == c])[::-1]
            n_c = len(vals)
            prefix = np.concatenate([[0.0], np.cumsum(vals)])
            ks = np.arange(n_c + 1)
            gain = prefix - gamma * (1.0 - epsilon) * ks * (n_c - ks)
            m_old = len(dp)
            new = np.full(m_old + n_c, -np.inf)
            for k in range(n_c + 1):
                new[k : k + m_old] = np.maximum(new[k : k + m_old], dp + gain[k])
            dp = new
        m = np.arange(1, g + 1)
        cut = gamma * epsilon * m * (g - m)
        t_star = max(t_star, float(((dp[1:] - cut) / m).max()))
    return max(t_star, 0.0)


def _group_minimax_lp(
    b: np.ndarray, member_classes: np.ndarray, gamma: float, epsilon: float
) -> float:
    """Minimal worst-case residual over intra-group subgradient selections.

    LP: minimize t subject to |b_i + gamma * sum_j w_ij s_ij| <= t with
    antisymmetric s in [-1, 1].
    """
    g = len(b)
    iu, ju = np.triu_indices(g, k=1)
    n_s = len(iu)
    w_pair = np.where(member_classes[iu] == member_classes[ju], 1.0, epsilon)
    coef = gamma * w_pair

    rows, cols, vals = [], [], []
    for e in range(n_s):
        rows.extend([iu[e], ju[e]])
        cols.extend([e, e])
        vals.extend([coef[e], -coef[e]])
    sel = sp.coo_matrix((vals, (rows, cols)), shape=(g, n_s + 1)).tocsr()
    t_col = sp.coo_matrix(
        (np.full(g, -1.0), (np.arange(g), np.full(g, n_s))), shape=(g, n_s + 1)
    ).tocsr()
    upper = sel + t_col  #  b + S s - t <= 0
    lower = -sel + t_col  # -b - S s - t <= 0
    a_ub = sp.vstack([upper, lower]).tocsc()
    b_ub = np.concatenate([-b, b])
    c = np.zeros(n_s + 1)
    c[-1] = 1.0
    bounds = [(-1.0, 1.0)] * n_s + [(0.0, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        return float(np.abs(b).max())
    return float(res.x[-1])


def _column_residual(
    col: np.ndarray,
    theta_col: np.ndarray,
    class_ids: np.ndarray,
    class_count: int,
    epsilon: float,
    gamma: float,
    cutoff: float | None = None,
) -> float:
    """Max-norm subgradient residual for a single coordinate.

    Signs are fixed for strictly distinct values; within exact-equality
    groups the worst-case-minimizing selection is computed exactly by the
    cut DP.  ``cutoff`` allows an early exit once the column already
    exceeds the caller's budget.
    """
    groups = _column_groups(col)
    sizes, counts, diff = _group_sign_stats(groups, class_ids, class_count)
    worst = 0.0
    for a, members in enumerate(groups):
        cross = epsilon * diff[a].sum() + (1.0 - epsilon) * diff[a, class_ids[members]]
        b = 2.0 * (col[members] - theta_col[members]) + gamma * cross
        if sizes[a] == 1:
            r = abs(float(b[0]))
        elif gamma == 0.0:
            r = float(np.abs(b).max())
        else:
            member_classes = class_ids[members]
            same = counts[a, member_classes]
            cap = gamma * ((same - 1) + epsilon * (sizes[a] - same))
            lb = max(abs(float(b.mean())), float(np.max(np.abs(b) - cap)), 0.0)
            if cutoff is not None and lb > cutoff:
                worst = max(worst, lb)
                return worst
            r = _group_minimax_selection(b, member_classes, gamma, epsilon)
        worst = max(worst, r)
        if cutoff is not None and worst > cutoff:
            return worst
    return worst


def optimality_residual(
    descriptors: np.ndarray,
    weights: FusionWeights,
    lam: float,
    centroids: np.ndarray,
) -> float:
    """Verifiable first-order stationarity gap of ``centroids``.

    Returns the max over samples and coordinates of the best achievable
    subgradient-selection residual; an exact minimizer scores 0 up to
    floating point and LP tolerance.
    """
    theta = np.asarray(descriptors, dtype=float)
    u = np.asarray(centroids, dtype=float)
    if theta.shape != u.shape:
        raise ShapeError(f"descriptors {theta.shape} and centroids {u.shape} disagree")
    if weights.sample_count != theta.shape[0]:
        raise ShapeError("weight matrix size does not match sample count")
    gamma = lambda_to_gamma(lam)
    class_ids = weights.class_ids
    k = weights.class_count
    worst = 0.0
    for c in range(theta.shape[1]):
        worst = max(
            worst,
            _column_residual(u[:, c], theta[:, c], class_ids, k, weights.epsilon, gamma),
        )
    return worst


# ---------------------------------------------------------------------------
# ADMM solver


@dataclass
class _ChunkState:
    u: np.ndarray
    v: np.ndarray
    z: np.ndarray
    rho: float


class _EdgeSolver:
    """ADMM worker for one block of coordinates on the complete fusion graph."""

    def __init__(self, theta_chunk, weights: FusionWeights, lo, hi):
        self.theta = theta_chunk
        self.t, self.q = theta_chunk.shape
        self.weights = weights
        self.iu, self.ju = np.triu_indices(self.t, k=1)
        self.w_edge = weights.matrix[self.iu, self.ju]
        e = len(self.iu)
        if e:
            rows = np.repeat(np.arange(e), 2)
            cols = np.empty(2 * e, dtype=np.int64)
            cols[0::2] = self.iu
            cols[1::2] = self.ju
            vals = np.tile([1.0, -1.0], e)
            self.dt = sp.coo_matrix((vals, (rows, cols)), shape=(e, self.t)).T.tocsr()
        else:
            self.dt = None
        self.lo = lo  # per-coordinate lower bounds of theta
        self.hi = hi
        # Snap gaps span the plausible iterate-noise decades relative to the
        # data range; every candidate is verified by the residual, so an
        # over-generous gap can only be rejected, never accepted wrongly.
        scale = float(hi.max() - lo.min()) if hi.size else 0.0
        self.snap_ladder = tuple(scale * s for s in (0.0, 1e-8, 1e-6, 1e-4, 1e-3, 1e-2))

    def _diff(self, u):
        return u[self.iu] - u[self.ju]

    def fresh_state(self, warm_u=None) -> _ChunkState:
        u = self.theta.copy() if warm_u is None else np.array(warm_u, dtype=float)
        v = self._diff(u)
        z = np.zeros_like(v)
        return _ChunkState(u=u, v=v, z=z, rho=1.0)

    def _finalize(self, u_raw, gamma, tol_abs, best, best_res):
        """Clamp, snap, polish, and verify; keeps the best candidate per column.

        Single-linkage snaps coarsen monotonically with the gap, so a rung
        producing the same group count as the previous one is the identical
        partition and is skipped.
        """
        w = self.weights
        u = np.clip(u_raw, self.lo, self.hi)
        prev_counts = np.full(self.q, -1, dtype=np.int64)
        for gap in self.snap_ladder:
            for c in range(self.q):
                if best_res[c] <= tol_abs:
                    continue
                n_groups = len(_column_groups(u[:, c], gap))
                if n_groups == prev_counts[c]:
                    continue
                prev_counts[c] = n_groups
                col = _snap_column(u[:, c], gap) if gap > 0.0 else u[:, c]
                col = _polish_column(
                    col, self.theta[:, c], w.class_ids, w.class_count, w.epsilon, gamma
                )
                col = np.clip(col, self.lo[0, c], self.hi[0, c])
                r = _column_residual(
                    col,
                    self.theta[:, c],
                    w.class_ids,
                    w.class_count,
                    w.epsilon,
                    gamma,
                    cutoff=best_res[c],
                )
                if r < best_res[c]:
                    best_res[c] = r
                    best[:, c] = col
        return float(best_res.max())

    def solve(self, gamma, tol, max_iter, state: _ChunkState | None = None):
        """Returns (solution, state, residual); raises SolverError on failure.

        ADMM iterations interleave with finalize attempts (snap + exact
        pattern polish + residual check) on a geometric schedule: the polish
        reaches an exact stationary point as soon as the iterate identifies
        the right grouping pattern, long before the raw iterate itself meets
        the tolerance.
        """
        tol_abs = tol * (1.0 + float(np.abs(self.theta).max(initial=0.0)))
        if self.dt is None or gamma == 0.0:
            u = self.theta.copy()
            st = state or self.fresh_state()
            st.u = u.copy()
            return u, st, 0.0

        st = state or self.fresh_state()
        u, v, z, rho = st.u, st.v, st.z, st.rho
        thresh = gamma * self.w_edge
        scale = 1.0 + float(np.abs(self.theta).max())
        loose = 1e-3 * scale

        best_u = np.empty_like(u)
        best_res = np.full(self.q, np.inf)
        it = 0
        block = 25
        next_attempt = 0
        while True:
            res = self._finalize(u, gamma, tol_abs, best_u, best_res)
            if res <= tol_abs:
                st.u, st.v, st.z, st.rho = u, v, z, rho
                return best_u.copy(), st, res
            if it >= max_iter:
                break
            next_attempt = min(max(2 * max(next_attempt, block), it + block), max_iter)
            loose *= 0.3
            while it < next_attempt:
                cut = thresh[:, None] / rho
                a = 2.0 + rho * self.t
                end = min(it + block, next_attempt)
                while it < end:
                    rhs = 2.0 * self.theta + self.dt @ (rho * (v - z))
                    u = rhs / a + (rho / (2.0 * a)) * rhs.sum(axis=0, keepdims=True)
                    du = self._diff(u)
                    x = du + z
                    v_new = np.sign(x) * np.maximum(np.abs(x) - cut, 0.0)
                    z = z + du - v_new
                    v_prev, v = v, v_new
                    it += 1
                pri = float(np.linalg.norm(du - v)) / np.sqrt(v.size)
                dual = rho * float(np.linalg.norm(self.dt @ (v - v_prev))) / np.sqrt(u.size)
                if pri <= loose and dual <= loose:
                    break  # already in the polish basin; attempt early
                if pri > 10.0 * dual:
                    rho *= 2.0
                    z = z / 2.0
                elif dual > 10.0 * pri:
                    rho /= 2.0
                    z = z * 2.0

        st.u, st.v, st.z, st.rho = u, v, z, rho
        res = float(best_res.max())
        raise SolverError(
            f"no convergence within {max_iter} iterations "
            f"(residual {res:.3e} > {tol_abs:.3e})",
            residual=res,
        )


def _chunk_bounds(p: int, t: int) -> list[tuple[int, int]]:
    edges = max(t * (t - 1) // 2, 1)
    width = max(1, min(p, _CHUNK_EDGE_FLOATS // edges))
    return [(s, min(s + width, p)) for s in range(0, p, width)]


def solve_at(
    descriptors: np.ndarray,
    weights: FusionWeights,
    lam: float,
    warm_start: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """Solve the fusion problem at one mixup-parameter value.

    The returned matrix satisfies ``optimality_residual(...) <=
    tol * (1 + max|theta|)``, or a :class:`SolverError` carrying the best
    residual is raised.
    """
    theta = np.asarray(descriptors, dtype=float)
    if theta.ndim != 2:
        raise ShapeError(f"descriptors must be T x p, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValidityError("descriptors must be finite")
    if weights.sample_count != theta.shape[0]:
        raise ShapeError("weight matrix size does not match sample count")
    if not 0.0 < lam < 1.0:
        raise ConfigError(f"solve_at requires 0 < lambda < 1, got {lam}")
    gamma = lambda_to_gamma(lam)
    t, p = theta.shape
    lo = theta.min(axis=0, keepdims=True)
    hi = theta.max(axis=0, keepdims=True)
    out = np.empty_like(theta)
    for s, e in _chunk_bounds(p, t):
        solver = _EdgeSolver(theta[:, s:e], weights, lo[:, s:e], hi[:, s:e])
        warm = None if warm_start is None else np.asarray(warm_start, float)[:, s:e]
        u, _, _ = solver.solve(gamma, tol, max_iter, solver.fresh_state(warm))
        out[:, s:e] = u
    return out


# ---------------------------------------------------------------------------
# Path tracing


def assignments_from_centroids(centroids: np.ndarray, threshold: float) -> np.ndarray:
    """Connected components of the max-norm proximity graph, first-occurrence ids."""
    t = centroids.shape[0]
    if t == 1:
        return np.zeros(1, dtype=np.int64)
    close = squareform(pdist(centroids, metric="chebyshev")) <= threshold
    n_comp, raw = connected_components(sp.csr_matrix(close), directed=False)
    canon = {}
    labels = np.empty(t, dtype=np.int64)
    for i, r in enumerate(raw):
        if r not in canon:
            canon[r] = len(canon)
        labels[i] = canon[r]
    return labels


def _snap_clusters(centroids: np.ndarray, labels: np.ndarray) -> np.ndarray:
    out = centroids.copy()
    for c in range(labels.max() + 1):
        members = np.nonzero(labels == c)[0]
        if len(members) > 1:
            out[members] = centroids[members].mean(axis=0)
    return out


def _merge_events(prev_labels, labels, lam) -> list[FusionEvent]:
    events = []
    for c in range(labels.max() + 1):
        members = np.nonzero(labels == c)[0]
        prev_cells = {}
        for i in members:
            prev_cells.setdefault(int(prev_labels[i]), []).append(int(i))
        if len(prev_cells) > 1:
            parts = tuple(tuple(sorted(v)) for _, v in sorted(prev_cells.items()))
            events.append(FusionEvent(lam=float(lam), merged=parts))
    return events


def trace_clusterpath(
    descriptors: np.ndarray,
    weights: FusionWeights,
    grid: LambdaGrid,
    tol: float = DEFAULT_TOL,
    delta_fuse: float = DEFAULT_DELTA_FUSE,
    max_iter: int = DEFAULT_MAX_ITER,
    workers: int = 1,
) -> ClusterPath:
    """Solve along the grid with warm starts and detect fusion structure.

    Endpoints are analytic: the data at 0 and the grand mean at 1.  Interior
    solves reuse the previous grid point's primal/dual state.  Fused groups
    (max-norm distance within ``delta_fuse`` of the descriptor range) are
    snapped to their common mean in the exported centroids.  ``workers``
    caps the threads running independent coordinate blocks.
    """
    theta = np.asarray(descriptors, dtype=float)
    if theta.ndim != 2:
        raise ShapeError(f"descriptors must be T x p, got shape {theta.shape}")
    t, p = theta.shape
    lams = grid.values
    n_grid = len(lams)
    value_range = float(theta.max() - theta.min()) if theta.size else 0.0
    threshold = delta_fuse * value_range

    centroids = np.empty((n_grid, t, p))
    centroids[0] = theta
    centroids[-1] = np.tile(theta.mean(axis=0, keepdims=True), (t, 1))

    lo = theta.min(axis=0, keepdims=True)
    hi = theta.max(axis=0, keepdims=True)

    def run_chunk(bounds):
        s, e = bounds
        solver = _EdgeSolver(theta[:, s:e], weights, lo[:, s:e], hi[:, s:e])
        state = solver.fresh_state()
        for m in range(1, n_grid - 1):
            gamma = lambda_to_gamma(float(lams[m]))
            try:
                u, state, _ = solver.solve(gamma, tol, max_iter, state)
            except SolverError as exc:
                raise SolverError(str(exc), residual=exc.residual, lam=float(lams[m]))
            centroids[m, :, s:e] = u

    chunks = _chunk_bounds(p, t)
    if workers > 1 and len(chunks) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(run_chunk, chunks):
                pass
    else:
        for bounds in chunks:
            run_chunk(bounds)

    assignments = np.empty((n_grid, t), dtype=np.int64)
    counts = np.empty(n_grid, dtype=np.int64)
    events: list[FusionEvent] = []
    violations: list[tuple[float, float, int, int]] = []
    for m in range(n_grid):
        labels = assignments_from_centroids(centroids[m], threshold)
        if 0 < m < n_grid - 1:
            centroids[m] = _snap_clusters(centroids[m], labels)
        assignments[m] = labels
        counts[m] = labels.max() + 1
        if m > 0:
            events.extend(_merge_events(assignments[m - 1], labels, lams[m]))
            if counts[m] > counts[m - 1]:
                violations.append(
                    (float(lams[m - 1]), float(lams[m]), int(counts[m - 1]), int(counts[m]))
                )
    return ClusterPath(
        grid=grid,
        centroids=centroids,
        assignments=assignments,
        cluster_counts=counts,
        fusion_events=tuple(events),
        monotonicity_violations=tuple(violations),
        descriptors=theta,
        weights=weights,
        tol=tol,
        delta_fuse=delta_fuse,
    )
