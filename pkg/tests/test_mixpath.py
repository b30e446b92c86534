import numpy as np
import pytest

from graphmad import (
    LambdaGrid,
    build_extended_path,
    build_label_paths,
    build_weights,
    collapse_branches,
    compute_rate,
    label_at,
    select_branch_lambda,
    trace_clusterpath,
)
from graphmad.errors import ConfigError, PartitionError, ValidityError
from graphmad.mixpath import branch_value_at, label_value_at, rate_at

from conftest import fusion_objective


def uniform_weights(t):
    return build_weights(np.ones((t, 1)), 0.5)


@pytest.fixture(scope="module")
def three_point_path():
    theta = np.array([[0.0], [1.0], [5.0]])
    return trace_clusterpath(theta, uniform_weights(3), LambdaGrid.default(101))


class TestSelectBranchLambda:
    def test_k_equals_t_gives_origin(self, three_point_path):
        lam, sets = select_branch_lambda(three_point_path, 3)
        assert lam == 0.0
        assert sets == ((0,), (1,), (2,))

    def test_k_one_gives_first_full_fusion(self, three_point_path):
        lam, sets = select_branch_lambda(three_point_path, 1)
        counts = three_point_path.cluster_counts
        lams = three_point_path.grid.values
        first_full = lams[np.nonzero(counts == 1)[0][0]]
        assert lam == first_full
        assert sets == ((0, 1, 2),)

    def test_pair_fuses_first(self, three_point_path):
        lam, sets = select_branch_lambda(three_point_path, 2)
        assert sets == ((0, 1), (2,))
        assert 0.0 < lam < 1.0

    def test_k_exceeds_t(self, three_point_path):
        with pytest.raises(ConfigError):
            select_branch_lambda(three_point_path, 4)

    def test_skipped_count_falls_back_to_split(self):
        # Symmetric pairs fuse simultaneously: counts 4 -> 2 -> 1, K=3 skipped.
        theta = np.array([[0.0], [1.0], [10.0], [11.0]])
        path = trace_clusterpath(theta, uniform_weights(4), LambdaGrid.default(51))
        counts = set(path.cluster_counts.tolist())
        assert 3 not in counts
        lam, sets = select_branch_lambda(path, 3)
        assert len(sets) == 3
        assert sorted(len(s) for s in sets) == [1, 1, 2]

    def test_duplicate_descriptors_split_by_index(self):
        theta = np.array([[1.0], [1.0], [5.0]])
        path = trace_clusterpath(theta, uniform_weights(3), LambdaGrid.default(11))
        lam, sets = select_branch_lambda(path, 3)
        assert lam == 0.0
        assert sets == ((0,), (1,), (2,))


class TestCollapse:
    def test_singleton_branch_equals_sample_path(self, three_point_path):
        ext = collapse_branches(three_point_path, [(0, 1), (2,)], lambda_star=0.3)
        assert np.array_equal(ext.branches[1], three_point_path.centroids[:, 2, :])
        assert ext.lambda_star == 0.3

    def test_two_identical_paths_average_to_either(self):
        theta = np.array([[2.0], [2.0], [7.0]])
        path = trace_clusterpath(theta, uniform_weights(3), LambdaGrid.default(11))
        ext = collapse_branches(path, [(0, 1), (2,)])
        assert np.array_equal(ext.branches[0], path.centroids[:, 0, :])

    def test_class_count_anchor(self):
        theta = np.array([[0.0], [0.2], [5.0]])
        labels = np.array([[1, 0], [1, 0], [0, 1]], dtype=float)
        w = build_weights(labels, 0.2)
        path = trace_clusterpath(theta, w, LambdaGrid.default(11))
        ext = collapse_branches(path, [(0, 1, 2)])
        assert np.allclose(ext.anchors_start[0], [2 / 3, 1 / 3])
        assert np.allclose(ext.anchors_end[0], [2 / 3, 1 / 3])

    def test_global_proportions_at_fusion(self):
        theta = np.array([[0.0], [0.2], [5.0], [6.0]])
        labels = np.array([[1, 0], [1, 0], [1, 0], [0, 1]], dtype=float)
        w = build_weights(labels, 0.2)
        path = trace_clusterpath(theta, w, LambdaGrid.default(11))
        ext = collapse_branches(path, [(0, 1), (2, 3)])
        assert np.allclose(ext.anchors_end, [[0.75, 0.25], [0.75, 0.25]])
        assert np.allclose(ext.anchors_start[0], [1.0, 0.0])
        assert np.allclose(ext.anchors_start[1], [0.5, 0.5])

    def test_partition_errors(self, three_point_path):
        with pytest.raises(PartitionError):
            collapse_branches(three_point_path, [(0, 1), ()])
        with pytest.raises(PartitionError):
            collapse_branches(three_point_path, [(0, 1), (1, 2)])
        with pytest.raises(PartitionError):
            collapse_branches(three_point_path, [(0, 1)])

    def test_mass_conservation(self, three_point_path):
        ext = collapse_branches(three_point_path, [(0, 1), (2,)])
        sizes = np.array([len(s) for s in ext.branch_index_sets], dtype=float)
        weighted = np.einsum("k,kgp->gp", sizes, ext.branches)
        total = three_point_path.centroids.sum(axis=1)
        assert np.abs(weighted - total).max() < 1e-9

    def test_branches_coincide_at_full_fusion(self, three_point_path):
        ext = collapse_branches(three_point_path, [(0, 1), (2,)])
        grand = three_point_path.descriptors.mean(axis=0)
        assert np.array_equal(ext.branches[0, -1], grand)
        assert np.array_equal(ext.branches[1, -1], grand)


class TestRate:
    def test_endpoints_exact(self, three_point_path):
        ext = build_extended_path(three_point_path, 2)
        for b in range(2):
            g = compute_rate(ext.branches[b], ext.grid)
            assert g[0] == 0.0
            assert g[-1] == 1.0

    def test_linear_branch_closed_form(self):
        grid = LambdaGrid(np.array([0.0, 0.5, 1.0]))
        branch = (2.0 + 2.0 * grid.values).reshape(-1, 1)
        g = compute_rate(branch, grid)
        assert abs(g[1] - 5.0 / 12.0) < 1e-12

    def test_constant_branch_progresses_linearly(self):
        grid = LambdaGrid(np.array([0.0, 0.25, 0.5, 1.0]))
        branch = np.full((4, 2), 0.3)
        g = compute_rate(branch, grid)
        assert np.array_equal(g, grid.values)

    def test_rate_invariant_to_coordinate_permutation(self):
        grid = LambdaGrid(np.linspace(0, 1, 5))
        rng = np.random.default_rng(4)
        branch = rng.random((5, 4))
        g = compute_rate(branch, grid)
        g_perm = compute_rate(branch[:, [2, 0, 3, 1]], grid)
        assert np.array_equal(g, g_perm)

    def test_values_clamped(self):
        grid = LambdaGrid(np.array([0.0, 0.5, 1.0]))
        # norm dips below the origin norm mid-path: raw rate is negative
        branch = np.array([[1.0], [0.0], [1.5]])
        g = compute_rate(branch, grid)
        assert g.min() >= 0.0 and g.max() <= 1.0


class TestLabelAt:
    def test_endpoint_weights(self):
        y0 = np.array([1.0, 0.0])
        y1 = np.array([0.5, 0.5])
        assert np.array_equal(label_at(y0, y1, 1.0), y0)
        assert np.array_equal(label_at(y0, y1, 0.0), y1)
        assert np.allclose(label_at(y0, y1, 0.5), [0.75, 0.25])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValidityError):
            label_at(np.array([1.0]), np.array([1.0]), 1.5)


@pytest.fixture(scope="module")
def ext():
    theta = np.array([[0.0], [0.2], [5.0], [6.0]])
    labels = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=float)
    w = build_weights(labels, 0.05)
    path = trace_clusterpath(theta, w, LambdaGrid.default(51))
    return build_extended_path(path, 2)


class TestLabelPaths:
    def test_probability_vectors_everywhere(self, ext):
        for orientation in ("paper", "endpoint-consistent"):
            lp = build_label_paths(ext, orientation)
            assert lp.values.min() >= 0.0
            assert lp.values.max() <= 1.0
            sums = lp.values.sum(axis=2)
            assert np.abs(sums - 1.0).max() < 1e-9

    def test_consistent_orientation_endpoints(self, ext):
        lp = build_label_paths(ext, "endpoint-consistent")
        assert np.array_equal(lp.values[:, 0, :], ext.anchors_start)
        assert np.array_equal(lp.values[:, -1, :], ext.anchors_end)

    def test_paper_orientation_swaps_endpoints(self, ext):
        lp = build_label_paths(ext, "paper")
        assert np.array_equal(lp.values[:, 0, :], ext.anchors_end)
        assert np.array_equal(lp.values[:, -1, :], ext.anchors_start)

    def test_off_grid_evaluation_matches_grid(self, ext):
        lp = build_label_paths(ext)
        lams = ext.grid.values
        for b in range(ext.branch_count):
            for m in (0, 5, len(lams) - 1):
                assert rate_at(ext, b, float(lams[m])) == pytest.approx(
                    lp.rates[b, m], abs=1e-12
                )
                assert np.allclose(
                    label_value_at(lp, ext, b, float(lams[m])),
                    lp.values[b, m],
                    atol=1e-12,
                )

    def test_interpolation_is_piecewise_linear(self, ext):
        lams = ext.grid.values
        mid = (lams[3] + lams[4]) / 2.0
        expected = (ext.branches[0, 3] + ext.branches[0, 4]) / 2.0
        assert np.allclose(branch_value_at(ext, 0, float(mid)), expected, atol=1e-15)

    def test_unknown_orientation_rejected(self, ext):
        with pytest.raises(ConfigError):
            build_label_paths(ext, "sideways")
