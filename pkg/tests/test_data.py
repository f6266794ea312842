import numpy as np
import pytest

from specgconv.data import (
    MultiGraphDataset,
    SingleGraphDataset,
    load_matrix_csv,
    load_single_graph,
    load_tu_dataset,
    make_folds,
    save_matrix_csv,
)
from specgconv.graphs import random_graph


def write_single_graph(root, with_split=True, weight_col=False):
    (root / "features.csv").write_text("c0,c1\n1,0\n0,1\n0.5,0.5\n")
    if weight_col:
        (root / "edges.csv").write_text("src,dst,weight\n0,1,2.5\n1,2,1\n")
    else:
        (root / "edges.csv").write_text("src,dst\n0,1\n1,2\n1,0\n")
    (root / "labels.csv").write_text("label\n0\n1\n-1\n")
    if with_split:
        (root / "split.csv").write_text("node,role\n0,train\n1,val\n2,test\n")


def test_load_single_graph_toy(tmp_path):
    write_single_graph(tmp_path)
    ds = load_single_graph(tmp_path)
    assert ds.graph.n == 3
    assert np.array_equal(ds.graph.adjacency, [[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    assert np.array_equal(ds.labels, [0, 1, -1])
    assert ds.masks["train"].tolist() == [True, False, False]
    assert ds.masks["test"].tolist() == [False, False, True]


def test_reciprocal_edges_collapse(tmp_path):
    write_single_graph(tmp_path)  # edges include both 0,1 and 1,0
    ds = load_single_graph(tmp_path)
    assert ds.graph.adjacency[0, 1] == 1.0 and ds.graph.adjacency[1, 0] == 1.0


def test_edge_weights(tmp_path):
    write_single_graph(tmp_path, weight_col=True)
    ds = load_single_graph(tmp_path)
    assert ds.graph.adjacency[0, 1] == 2.5


def test_missing_split_defaults_to_train(tmp_path):
    write_single_graph(tmp_path, with_split=False)
    (tmp_path / "labels.csv").write_text("label\n0\n1\n1\n")
    with pytest.warns(UserWarning, match="split.csv"):
        ds = load_single_graph(tmp_path)
    assert ds.masks["train"].all()


def test_self_loop_rejected(tmp_path):
    write_single_graph(tmp_path)
    (tmp_path / "edges.csv").write_text("src,dst\n0,0\n")
    with pytest.raises(ValueError, match="self-loop"):
        load_single_graph(tmp_path)


def test_out_of_range_node(tmp_path):
    write_single_graph(tmp_path)
    (tmp_path / "edges.csv").write_text("src,dst\n0,9\n")
    with pytest.raises(ValueError, match="out of range"):
        load_single_graph(tmp_path)


def test_overlapping_roles_rejected(tmp_path):
    write_single_graph(tmp_path)
    (tmp_path / "split.csv").write_text("node,role\n0,train\n0,test\n")
    with pytest.raises(ValueError, match="two roles"):
        load_single_graph(tmp_path)


def test_unlabeled_train_node_rejected(tmp_path):
    write_single_graph(tmp_path)
    (tmp_path / "split.csv").write_text("node,role\n2,train\n")
    with pytest.raises(ValueError, match="class label"):
        load_single_graph(tmp_path)


def test_loading_is_pure(tmp_path):
    write_single_graph(tmp_path)
    a = load_single_graph(tmp_path)
    b = load_single_graph(tmp_path)
    assert np.array_equal(a.graph.adjacency, b.graph.adjacency)
    assert np.array_equal(a.graph.features, b.graph.features)
    assert np.array_equal(a.labels, b.labels)


def write_tu_fixture(root):
    """Three tiny graphs: a triangle, one edge, one 4-path."""
    d = root / "TOY"
    d.mkdir()
    edges = [
        (1, 2), (2, 1), (2, 3), (3, 2), (1, 3), (3, 1),   # graph 1: triangle
        (4, 5), (5, 4),                                   # graph 2: edge
        (6, 7), (7, 6), (7, 8), (8, 7), (8, 9), (9, 8),   # graph 3: path
    ]
    (d / "TOY_A.txt").write_text("\n".join(f"{a}, {b}" for a, b in edges) + "\n")
    indicator = [1, 1, 1, 2, 2, 3, 3, 3, 3]
    (d / "TOY_graph_indicator.txt").write_text("\n".join(map(str, indicator)) + "\n")
    (d / "TOY_graph_labels.txt").write_text("5\n7\n5\n")
    (d / "TOY_node_labels.txt").write_text("0\n1\n0\n2\n2\n1\n1\n0\n2\n")
    (d / "TOY_node_attributes.txt").write_text("\n".join(f"{i}.5, {-i}.25" for i in range(9)) + "\n")
    return d


def test_tu_fixture_adjacency(tmp_path):
    ds = load_tu_dataset(write_tu_fixture(tmp_path))
    assert len(ds) == 3
    tri = np.ones((3, 3)) - np.eye(3)
    assert np.array_equal(ds.graphs[0].adjacency, tri)
    assert np.array_equal(ds.graphs[1].adjacency, [[0, 1], [1, 0]])
    path4 = np.zeros((4, 4))
    for i in range(3):
        path4[i, i + 1] = path4[i + 1, i] = 1
    assert np.array_equal(ds.graphs[2].adjacency, path4)


def test_tu_labels_remapped_and_onehot(tmp_path):
    ds = load_tu_dataset(write_tu_fixture(tmp_path))
    assert ds.n_classes == 2
    assert np.array_equal(ds.labels, [0, 1, 0])
    # node labels {0,1,2} one-hot encoded, width consistent across graphs
    assert all(g.features.shape[1] == 3 for g in ds.graphs)
    assert np.array_equal(ds.graphs[0].features, [[1, 0, 0], [0, 1, 0], [1, 0, 0]])


def test_tu_attributes_appended(tmp_path):
    d = write_tu_fixture(tmp_path)
    ds = load_tu_dataset(d, use_attributes=True)
    assert all(g.features.shape[1] == 5 for g in ds.graphs)
    assert ds.graphs[0].features[0, 3] == 0.5
    assert ds.graphs[0].features[1, 4] == -1.25


def test_tu_missing_node_labels_gives_constant_feature(tmp_path):
    d = write_tu_fixture(tmp_path)
    (d / "TOY_node_labels.txt").unlink()
    ds = load_tu_dataset(d)
    assert all(g.features.shape[1] == 1 for g in ds.graphs)
    assert all(np.all(g.features == 1.0) for g in ds.graphs)


def test_tu_self_loop_rows_dropped_with_warning(tmp_path):
    d = write_tu_fixture(tmp_path)
    content = (d / "TOY_A.txt").read_text()
    (d / "TOY_A.txt").write_text(content + "1, 1\n")
    with pytest.warns(UserWarning, match="self-loop"):
        ds = load_tu_dataset(d)
    assert ds.graphs[0].adjacency[0, 0] == 0.0


def test_tu_cross_graph_edge_rejected(tmp_path):
    d = write_tu_fixture(tmp_path)
    (d / "TOY_A.txt").write_text("1, 2\n2, 1\n3, 4\n4, 3\n6, 7\n7, 6\n")
    with pytest.raises(ValueError, match="crosses graphs"):
        load_tu_dataset(d)


def dataset_with_labels(labels):
    g = random_graph(5, 0.5, seed=0)
    labels = np.asarray(labels)
    return MultiGraphDataset(graphs=tuple([g] * labels.size), labels=labels,
                             n_classes=int(labels.max()) + 1)


def test_make_folds_one_per_fold():
    ds = dataset_with_labels(np.zeros(10, int))
    folds = make_folds(ds, k=10, seed=1)
    assert sorted(folds.tolist()) == list(range(10))


def test_make_folds_balanced_and_stratified():
    labels = np.repeat(np.arange(6), 100)  # 600 graphs, 6 classes
    ds = dataset_with_labels(labels)
    folds = make_folds(ds, k=10, seed=3)
    sizes = np.bincount(folds, minlength=10)
    assert np.all(sizes == 60)
    for c in range(6):
        per_fold = np.bincount(folds[labels == c], minlength=10)
        assert np.all(per_fold == 10)


def test_make_folds_deterministic():
    labels = np.repeat(np.arange(3), 20)
    ds = dataset_with_labels(labels)
    assert np.array_equal(make_folds(ds, 10, seed=5), make_folds(ds, 10, seed=5))
    assert not np.array_equal(make_folds(ds, 10, seed=5), make_folds(ds, 10, seed=6))


def test_make_folds_small_class_fallback():
    labels = np.array([0] * 17 + [1] * 3)
    ds = dataset_with_labels(labels)
    with pytest.warns(UserWarning, match="not stratified"):
        folds = make_folds(ds, k=10, seed=0)
    assert np.all(np.bincount(folds, minlength=10) == 2)


def test_make_folds_too_few_graphs():
    ds = dataset_with_labels(np.zeros(4, int))
    with pytest.raises(ValueError):
        make_folds(ds, k=10, seed=0)


def test_symmetrization_idempotent(tmp_path):
    # writing the already-symmetrized edge list back reproduces the adjacency
    write_single_graph(tmp_path)
    first = load_single_graph(tmp_path).graph.adjacency
    rows = ["src,dst,weight"]
    for i in range(3):
        for j in range(3):
            if first[i, j]:
                rows.append(f"{i},{j},{first[i, j]}")
    (tmp_path / "edges.csv").write_text("\n".join(rows) + "\n")
    second = load_single_graph(tmp_path).graph.adjacency
    assert np.array_equal(first, second)


def test_matrix_csv_roundtrip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    m = rng.standard_normal((7, 3)) * np.exp(rng.uniform(-30, 30, size=(7, 3)))
    path = tmp_path / "m.csv"
    save_matrix_csv(path, m)
    back = load_matrix_csv(path)
    assert np.array_equal(back, m)


def test_dataset_invariants():
    g = random_graph(4, 0.5, seed=0)
    with pytest.raises(ValueError, match="disjoint"):
        SingleGraphDataset(
            graph=g, labels=np.zeros(4, int),
            masks={"train": np.ones(4, bool), "val": np.ones(4, bool),
                   "test": np.zeros(4, bool)},
        )
    g2 = random_graph(4, 0.5, seed=1, features_dim=2)
    with pytest.raises(ValueError, match="feature widths"):
        MultiGraphDataset(graphs=(g, g2), labels=np.zeros(2, int), n_classes=1)
