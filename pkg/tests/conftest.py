"""Shared fixtures and test-side oracles.

The oracles here are deliberately independent of the package internals:
the convex-clustering oracle enumerates grouping patterns and compares raw
objective values, and the SBM sampler assigns block memberships directly
instead of going through the package's latent-variable sampler.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from graphmad import Dataset, LabeledGraph


def make_graph(node_count, edge_list, label):
    return LabeledGraph.from_edge_list(node_count, edge_list, np.asarray(label, float))


def density_graph(node_count, edge_count, label):
    """Deterministic graph with the first ``edge_count`` pairs present."""
    pairs = list(itertools.combinations(range(node_count), 2))
    return make_graph(node_count, pairs[:edge_count], label)


@pytest.fixture
def toy_dataset():
    graphs = (
        make_graph(3, [(0, 1), (1, 2)], [1, 0]),
        make_graph(2, [(0, 1)], [0, 1]),
        make_graph(4, [(0, 3), (1, 2)], [1, 0]),
    )
    return Dataset(graphs=graphs, class_count=2, name="TOY")


def fusion_objective(theta, w_matrix, gamma, u):
    """Objective value of the fusion problem, written from the definition."""
    theta = np.atleast_2d(np.asarray(theta, float))
    u = np.atleast_2d(np.asarray(u, float))
    if theta.shape[1] != u.shape[1]:
        theta, u = theta.T, u.T
    val = float(np.sum((u - theta) ** 2))
    t = theta.shape[0]
    for i in range(t):
        for j in range(i + 1, t):
            val += gamma * w_matrix[i, j] * float(np.sum(np.abs(u[i] - u[j])))
    return val


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield [[first]] + part


def oracle_solve_1d(theta, w_matrix, gamma):
    """Brute-force scalar solver: enumerate (partition, order) patterns.

    Summing the stationarity conditions over each hypothetical fused group
    gives every candidate in closed form; the true optimum is among them, so
    the objective arg-min over all candidates is exact.
    """
    theta = np.asarray(theta, float).reshape(-1)
    n = len(theta)
    best_val, best_u = np.inf, None
    for part in _set_partitions(list(range(n))):
        m = len(part)
        for order in itertools.permutations(range(m)):
            values = np.empty(m)
            for a, members in enumerate(part):
                s = 0.0
                for b, others in enumerate(part):
                    if a == b:
                        continue
                    sign = 1.0 if order[a] > order[b] else -1.0
                    s += sign * sum(w_matrix[i, j] for i in members for j in others)
                values[a] = np.mean(theta[list(members)]) - gamma * s / (2 * len(members))
            u = np.empty(n)
            for a, members in enumerate(part):
                u[list(members)] = values[a]
            val = fusion_objective(theta.reshape(-1, 1), w_matrix, gamma, u.reshape(-1, 1))
            if val < best_val:
                best_val, best_u = val, u
    return best_val, best_u


def oracle_solve(theta, w_matrix, gamma):
    """Coordinate-wise brute force for small multi-dimensional instances."""
    theta = np.atleast_2d(np.asarray(theta, float))
    u = np.empty_like(theta)
    total = 0.0
    for c in range(theta.shape[1]):
        val, col = oracle_solve_1d(theta[:, c], w_matrix, gamma)
        total += val
        u[:, c] = col
    return total, u


def sbm_fixed_blocks(sizes, probs, rng):
    """SBM sample with deterministic block memberships (test-side sampler)."""
    probs = np.asarray(probs, float)
    n = int(sum(sizes))
    member = np.repeat(np.arange(len(sizes)), sizes)
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < probs[member[i], member[j]]:
                edges.add((i, j))
    return member, edges


def empirical_block_densities(member, edges, blocks):
    counts = np.zeros((blocks, blocks))
    for i, j in edges:
        a, b = member[i], member[j]
        counts[min(a, b), max(a, b)] += 1
    sizes = np.bincount(member, minlength=blocks)
    dens = np.zeros((blocks, blocks))
    for a in range(blocks):
        for b in range(a, blocks):
            pairs = sizes[a] * (sizes[a] - 1) // 2 if a == b else sizes[a] * sizes[b]
            dens[a, b] = dens[b, a] = counts[a, b] / pairs if pairs else 0.0
    return dens


def write_raw_tudataset(base_dir, name, a_lines, indicator_lines, label_lines):
    """Write loader-test input files verbatim."""
    d = base_dir / name
    d.mkdir(parents=True, exist_ok=True)
    (d / f"{name}_A.txt").write_text("\n".join(a_lines) + "\n")
    (d / f"{name}_graph_indicator.txt").write_text("\n".join(indicator_lines) + "\n")
    (d / f"{name}_graph_labels.txt").write_text("\n".join(label_lines) + "\n")
    return d


def toy3_dataset_dir(base_dir, name="TOY3"):
    """Three 5-node graphs with densities 0.1 / 0.2 / 0.9 and classes (0, 0, 1).

    At resolution 1 the descriptors are the scalar densities {0.1, 0.2, 0.9},
    so the first two samples fuse strictly before full fusion.
    """
    graphs = [
        density_graph(5, 1, [1, 0]),
        density_graph(5, 2, [1, 0]),
        density_graph(5, 9, [0, 1]),
    ]
    a_lines, ind_lines, label_lines = [], [], []
    offset = 0
    for g_idx, g in enumerate(graphs, 1):
        for i, j in g.sorted_edges():
            a_lines.append(f"{i + 1 + offset}, {j + 1 + offset}")
            a_lines.append(f"{j + 1 + offset}, {i + 1 + offset}")
        ind_lines.extend([str(g_idx)] * g.node_count)
        label_lines.append(str(int(np.argmax(g.label))))
        offset += g.node_count
    return write_raw_tudataset(base_dir, name, a_lines, ind_lines, label_lines)
