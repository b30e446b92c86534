import json
import subprocess
import sys

import numpy as np
import pytest

from graphmad import load_soft_labels, load_tudataset
from graphmad.cli import run
from graphmad.graphon import load_graphon

from conftest import density_graph, toy3_dataset_dir, write_raw_tudataset


def six_class_dataset_dir(base_dir, name="SIX"):
    """Six classes, four identical 6-node graphs each, distinct densities."""
    edge_counts = [1, 4, 6, 9, 12, 14]
    a_lines, ind_lines, label_lines = [], [], []
    offset = 0
    g_idx = 0
    for cls, m in enumerate(edge_counts):
        for _ in range(4):
            g_idx += 1
            g = density_graph(6, m, [1.0])
            for i, j in g.sorted_edges():
                a_lines.append(f"{i + 1 + offset}, {j + 1 + offset}")
                a_lines.append(f"{j + 1 + offset}, {i + 1 + offset}")
            ind_lines.extend([str(g_idx)] * 6)
            label_lines.append(str(cls))
            offset += 6
    return write_raw_tudataset(base_dir, name, a_lines, ind_lines, label_lines)


def read_output_files(out_dir, name):
    files = sorted((out_dir / name).glob("*"))
    return {f.name: f.read_bytes() for f in files}


def test_augment_num_new_zero_round_trips(tmp_path):
    toy3_dataset_dir(tmp_path / "data")
    out = tmp_path / "out"
    code = run(
        [
            "augment",
            "--data-dir", str(tmp_path / "data"),
            "--name", "TOY3",
            "--out", str(out),
            "--resolution", "1",
            "--num-new", "0",
        ]
    )
    assert code == 0
    original = load_tudataset(tmp_path / "data", "TOY3")
    back = load_tudataset(out, "TOY3")
    assert len(back) == len(original)
    for a, b in zip(original.graphs, back.graphs):
        assert a.node_count == b.node_count
        assert a.edges == b.edges
        assert np.array_equal(a.label, b.label)
    soft = load_soft_labels(out / "TOY3" / "TOY3_graph_soft_labels.txt")
    assert np.array_equal(soft, original.labels_matrix())


def test_augment_deterministic_byte_identical(tmp_path):
    toy3_dataset_dir(tmp_path / "data")
    out = tmp_path / "out"
    outputs = []
    for _ in range(2):
        code = run(
            [
                "augment",
                "--data-dir", str(tmp_path / "data"),
                "--name", "TOY3",
                "--out", str(out),
                "--resolution", "1",
                "--num-new", "6",
                "--gfeat", "clusterpath",
                "--glabel", "clusterpath",
                "--seed", "7",
            ]
        )
        assert code == 0
        outputs.append(read_output_files(out, "TOY3"))
    assert outputs[0].keys() == outputs[1].keys()
    for name in outputs[0]:
        assert outputs[0][name] == outputs[1][name], name


def test_augment_toy3_manifest_index_sets(tmp_path):
    toy3_dataset_dir(tmp_path / "data")
    out = tmp_path / "out"
    code = run(
        [
            "augment",
            "--data-dir", str(tmp_path / "data"),
            "--name", "TOY3",
            "--out", str(out),
            "--resolution", "1",
            "--num-new", "2",
            "--seed", "1",
        ]
    )
    assert code == 0
    manifest = json.loads((out / "TOY3" / "manifest.json").read_text())
    assert manifest["branch_index_sets"] == [[0, 1], [2]]
    assert manifest["counts"] == {"original": 3, "new": 2, "classes": 2}
    assert 0.0 < manifest["lambda_star"] < 1.0
    assert len(manifest["generation"]["lambdas"]) == 2


def test_augment_linear_cells(tmp_path):
    toy3_dataset_dir(tmp_path / "data")
    for glabel in ("linear", "sigmoid", "logit"):
        out = tmp_path / f"out_{glabel}"
        code = run(
            [
                "augment",
                "--data-dir", str(tmp_path / "data"),
                "--name", "TOY3",
                "--out", str(out),
                "--resolution", "1",
                "--num-new", "4",
                "--gfeat", "linear",
                "--glabel", glabel,
                "--seed", "3",
            ]
        )
        assert code == 0
        soft = load_soft_labels(out / "TOY3" / "TOY3_graph_soft_labels.txt")
        assert soft.shape == (7, 2)


def test_clusterpath_export_csv_contract(tmp_path):
    toy3_dataset_dir(tmp_path / "data")
    out = tmp_path / "out"
    code = run(
        [
            "clusterpath",
            "--data-dir", str(tmp_path / "data"),
            "--name", "TOY3",
            "--out", str(out),
            "--resolution", "1",
        ]
    )
    assert code == 0
    rows = (out / "TOY3_clusterpath.csv").read_text().splitlines()
    assert rows[0] == "lambda,branch,g_cp,cluster_count"
    body = [r.split(",") for r in rows[1:]]
    first_lambda_rows = [r for r in body if float(r[0]) == 0.0]
    last_lambda_rows = [r for r in body if float(r[0]) == 1.0]
    assert first_lambda_rows and last_lambda_rows
    assert all(float(r[2]) == 0.0 for r in first_lambda_rows)
    assert all(float(r[2]) == 1.0 for r in last_lambda_rows)
    # distinct descriptors: the first grid point has T clusters
    assert all(int(r[3]) == 3 for r in first_lambda_rows)
    assert all(int(r[3]) == 1 for r in last_lambda_rows)


def test_clusterpath_six_class_export(tmp_path):
    six_class_dataset_dir(tmp_path / "data")
    out = tmp_path / "out"
    code = run(
        [
            "clusterpath",
            "--data-dir", str(tmp_path / "data"),
            "--name", "SIX",
            "--out", str(out),
            "--resolution", "1",
            "--grid-size", "26",
        ]
    )
    assert code == 0
    ext = json.loads((out / "SIX_extended_clusterpath.json").read_text())
    assert len(ext["index_sets"]) == 6
    assert len(ext["g_cp"]) == 6
    path = json.loads((out / "SIX_clusterpath.json").read_text())
    assert path["cluster_counts"][0] == 6  # duplicates pre-fuse per class
    assert path["cluster_counts"][-1] == 1
    assert "centroids" not in path  # not exported without the flag


def test_clusterpath_export_centroids_flag(tmp_path):
    toy3_dataset_dir(tmp_path / "data")
    out = tmp_path / "out"
    code = run(
        [
            "clusterpath",
            "--data-dir", str(tmp_path / "data"),
            "--name", "TOY3",
            "--out", str(out),
            "--resolution", "1",
            "--grid-size", "11",
            "--export-centroids",
        ]
    )
    assert code == 0
    path = json.loads((out / "TOY3_clusterpath.json").read_text())
    assert len(path["centroids"]) == 12
    ext = json.loads((out / "TOY3_extended_clusterpath.json").read_text())
    assert "branches" in ext


def test_estimate_empty_graph_zero_graphon(tmp_path):
    write_raw_tudataset(tmp_path / "data", "EMPTYD", [], ["1", "1", "1"], ["0"])
    out = tmp_path / "out"
    code = run(
        [
            "estimate",
            "--data-dir", str(tmp_path / "data"),
            "--name", "EMPTYD",
            "--out", str(out),
            "--resolution", "2",
        ]
    )
    assert code == 0
    w = load_graphon(out / "EMPTYD_graphons" / "EMPTYD_graphon_00000.json")
    assert np.array_equal(w.matrix, np.zeros((2, 2)))


def test_sample_complete_graph_from_constant_one(tmp_path):
    graphon_path = tmp_path / "one.json"
    graphon_path.write_text('{"D": 1, "W": [1.0]}\n')
    out = tmp_path / "out"
    code = run(
        [
            "sample",
            "--data-dir", str(tmp_path),
            "--name", "SAMPLED",
            "--out", str(out),
            "--graphon", str(graphon_path),
            "--nodes", "5",
            "--count", "3",
        ]
    )
    assert code == 0
    ds = load_tudataset(out, "SAMPLED")
    assert len(ds) == 3
    for g in ds.graphs:
        assert len(g.edges) == 10  # complete graph on 5 nodes


def test_sample_then_estimate_recovers_constant(tmp_path):
    graphon_path = tmp_path / "p03.json"
    graphon_path.write_text('{"D": 1, "W": [0.3]}\n')
    out = tmp_path / "out"
    code = run(
        [
            "sample",
            "--data-dir", str(tmp_path),
            "--name", "P03",
            "--out", str(out),
            "--graphon", str(graphon_path),
            "--nodes", "500",
            "--count", "1",
            "--seed", "5",
        ]
    )
    assert code == 0
    code = run(
        [
            "estimate",
            "--data-dir", str(out),
            "--name", "P03",
            "--out", str(out),
            "--resolution", "2",
        ]
    )
    assert code == 0
    w = load_graphon(out / "P03_graphons" / "P03_graphon_00000.json")
    assert np.abs(w.matrix - 0.3).max() < 0.05


def test_missing_dataset_reports_load_error(tmp_path, capsys):
    code = run(
        [
            "augment",
            "--data-dir", str(tmp_path),
            "--name", "NOPE",
            "--out", str(tmp_path / "out"),
        ]
    )
    assert code == 1
    err = capsys.readouterr().err
    assert err.count("\n") == 1
    assert "GRAPHMAD_ERROR code=LOAD_ERROR" in err
    assert "NOPE" in err


def test_bad_epsilon_reports_config_error(tmp_path, capsys):
    toy3_dataset_dir(tmp_path / "data")
    code = run(
        [
            "augment",
            "--data-dir", str(tmp_path / "data"),
            "--name", "TOY3",
            "--out", str(tmp_path / "out"),
            "--epsilon", "1.5",
        ]
    )
    assert code == 1
    assert "code=CONFIG_ERROR" in capsys.readouterr().err


def test_out_dir_lock(tmp_path, capsys):
    from filelock import FileLock

    toy3_dataset_dir(tmp_path / "data")
    out = tmp_path / "out"
    out.mkdir()
    held = FileLock(str(out / ".graphmad.lock"))
    held.acquire()
    try:
        code = run(
            [
                "augment",
                "--data-dir", str(tmp_path / "data"),
                "--name", "TOY3",
                "--out", str(out),
                "--resolution", "1",
            ]
        )
    finally:
        held.release()
    assert code == 1
    assert "code=LOCK_ERROR" in capsys.readouterr().err


def test_console_entry_point_subprocess(tmp_path):
    toy3_dataset_dir(tmp_path / "data")
    proc = subprocess.run(
        [
            sys.executable, "-m", "graphmad.cli",
            "augment",
            "--data-dir", str(tmp_path / "data"),
            "--name", "TOY3",
            "--out", str(tmp_path / "out"),
            "--resolution", "1",
            "--num-new", "1",
            "--seed", "2",
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "dataset=TOY3 T=3 K=2" in proc.stdout
    assert "lambda_star=" in proc.stdout
    assert (tmp_path / "out" / "TOY3" / "manifest.json").exists()


def test_failure_leaves_no_partial_outputs(tmp_path):
    # indicator references a graph with zero nodes -> load fails after lock
    write_raw_tudataset(tmp_path / "data", "ZERO", ["1, 2"], ["1", "1"], ["0", "1"])
    out = tmp_path / "out"
    code = run(
        [
            "augment",
            "--data-dir", str(tmp_path / "data"),
            "--name", "ZERO",
            "--out", str(out),
        ]
    )
    assert code == 1
    assert not (out / "ZERO").exists()
    assert not (out / "ZERO.partial").exists()
