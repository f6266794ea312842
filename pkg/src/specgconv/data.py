"""Dataset ingestion and canonical on-disk formats.

Two dataset layouts are supported:

* single-graph directories with ``edges.csv`` / ``features.csv`` /
  ``labels.csv`` / ``split.csv`` (transductive node classification), and
* the TU graph-kernel text format (``DS_A.txt``, ``DS_graph_indicator.txt``,
  ...) for multi-graph classification.

All CSV files carry a header row, are comma separated, UTF-8 and line-feed
terminated. Floats are written with 17 significant digits so that a write /
read round trip is bitwise lossless.
"""
from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass
import numpy as np

from .graphs import Graph

FLOAT_FMT = "%.17g"


# ---------------------------------------------------------------------------
# generic CSV matrix format (also used by the eigendecomposition cache)
# ---------------------------------------------------------------------------

def save_matrix_csv(path, m: np.ndarray) -> None:
    """Write a 1-D or 2-D float array as CSV with a c0,c1,... header."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(f"c{j}" for j in range(m.shape[1])) + "\n")
        for row in m:
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    """Read a matrix written by save_matrix_csv; always returns a 2-D array."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty CSV")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        return np.zeros((0, len(header)))
    return np.array(rows, dtype=np.float64)


def save_vector_csv(path, v: np.ndarray, name: str = "value") -> None:
    v = np.asarray(v, dtype=np.float64).ravel()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(name + "\n")
        for x in v:
            fh.write(FLOAT_FMT % x + "\n")


def load_vector_csv(path) -> np.ndarray:
    return load_matrix_csv(path).ravel()


# ---------------------------------------------------------------------------
# single-graph datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingleGraphDataset:
    """One graph plus per-node labels and disjoint train/val/test masks."""

    graph: Graph
    labels: np.ndarray          # (n,) class index, -1 for unlabeled
    masks: dict                 # name -> boolean (n,) array

    def __post_init__(self):
        n = self.graph.n
        if self.labels.shape != (n,):
            raise ValueError("labels must be one class index per node")
        stacked = np.zeros(n, dtype=int)
        for name, m in self.masks.items():
            if m.shape != (n,) or m.dtype != np.bool_:
                raise ValueError(f"mask {name!r} must be a boolean (n,) array")
            stacked += m.astype(int)
        if np.any(stacked > 1):
            raise ValueError("split masks must be disjoint")
        train = self.masks.get("train")
        if train is not None and np.any(self.labels[train] < 0):
            bad = int(np.flatnonzero(train & (self.labels < 0))[0])
            raise ValueError(f"training node {bad} has no valid class label")

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1


def _read_rows(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        return [row for row in reader if row]


def load_single_graph(directory) -> SingleGraphDataset:
    """Load a single-graph dataset directory.

    Expected files: ``edges.csv`` (src,dst[,weight]), ``features.csv``
    (one row per node), ``labels.csv`` (one class index per node, -1 for
    unlabeled) and ``split.csv`` (node,role with role in train/val/test).
    A missing split.csv defaults to an all-train split with a warning.
    """
    directory = os.fspath(directory)
    features = load_matrix_csv(os.path.join(directory, "features.csv"))
    n = features.shape[0]

    adjacency = np.zeros((n, n))
    for lineno, row in enumerate(_read_rows(os.path.join(directory, "edges.csv")), start=2):
        src, dst = int(row[0]), int(row[1])
        w = float(row[2]) if len(row) > 2 else 1.0
        if src == dst:
            raise ValueError(f"edges.csv line {lineno}: self-loop on node {src}")
        if not (0 <= src < n and 0 <= dst < n):
            raise ValueError(f"edges.csv line {lineno}: node index out of range")
        adjacency[src, dst] = w
        adjacency[dst, src] = w

    labels = np.array(
        [int(float(row[0])) for row in _read_rows(os.path.join(directory, "labels.csv"))]
    )
    if labels.shape != (n,):
        raise ValueError(f"labels.csv must have {n} rows, got {labels.shape[0]}")

    split_path = os.path.join(directory, "split.csv")
    masks = {name: np.zeros(n, dtype=bool) for name in ("train", "val", "test")}
    if os.path.exists(split_path):
        assigned = np.zeros(n, dtype=bool)
        for lineno, row in enumerate(_read_rows(split_path), start=2):
            node, role = int(row[0]), row[1].strip()
            if role not in masks:
                raise ValueError(f"split.csv line {lineno}: unknown role {role!r}")
            if assigned[node]:
                raise ValueError(f"split.csv line {lineno}: node {node} has two roles")
            masks[role][node] = True
            assigned[node] = True
    else:
        warnings.warn(f"{split_path} missing; defaulting every node to train")
        masks["train"][:] = True

    graph = Graph(adjacency=adjacency, features=features, labels=labels, splits=masks)
    return SingleGraphDataset(graph=graph, labels=labels, masks=masks)


# ---------------------------------------------------------------------------
# multi-graph datasets (TU graph-kernel text format)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiGraphDataset:
    graphs: tuple
    labels: np.ndarray          # (n_graphs,) class index in 0..n_classes-1
    n_classes: int

    def __post_init__(self):
        widths = {g.features.shape[1] for g in self.graphs}
        if len(widths) > 1:
            raise ValueError(f"inconsistent feature widths across graphs: {sorted(widths)}")

    def __len__(self) -> int:
        return len(self.graphs)


def _tu_lines(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip()]


def load_tu_dataset(directory, use_attributes: bool = False) -> MultiGraphDataset:
    """Parse a TU-format dataset directory (DS_A.txt and friends).

    Node labels are one-hot encoded into the feature matrix; continuous node
    attributes are appended only when use_attributes is set. Graph labels are
    remapped to contiguous 0..n_classes-1 in sorted order.
    """
    directory = os.fspath(directory)
    name = os.path.basename(os.path.normpath(directory))
    p = lambda suffix: os.path.join(directory, f"{name}_{suffix}.txt")

    indicator = np.array([int(x) for x in _tu_lines(p("graph_indicator"))])
    n_nodes = indicator.size
    n_graphs = indicator.max()
    if np.any(np.diff(indicator) < 0):
        raise ValueError("graph_indicator must be non-decreasing")
    offsets = np.searchsorted(indicator, np.arange(1, n_graphs + 1))
    sizes = np.bincount(indicator)[1:]

    raw_graph_labels = np.array([int(float(x)) for x in _tu_lines(p("graph_labels"))])
    if raw_graph_labels.size != n_graphs:
        raise ValueError("graph_labels row count does not match graph_indicator")
    classes = np.unique(raw_graph_labels)
    labels = np.searchsorted(classes, raw_graph_labels)

    adjacencies = [np.zeros((s, s)) for s in sizes]
    dropped_loops = 0
    for lineno, line in enumerate(_tu_lines(p("A")), start=1):
        a, b = (int(v) for v in line.replace(",", " ").split())
        ga, gb = indicator[a - 1], indicator[b - 1]
        if ga != gb:
            raise ValueError(f"{name}_A.txt line {lineno}: edge crosses graphs {ga} and {gb}")
        i, j = a - 1 - offsets[ga - 1], b - 1 - offsets[ga - 1]
        if i == j:
            dropped_loops += 1
            continue
        adjacencies[ga - 1][i, j] = 1.0
        adjacencies[ga - 1][j, i] = 1.0
    if dropped_loops:
        warnings.warn(f"{name}: dropped {dropped_loops} self-loop edge rows")

    node_label_path = p("node_labels")
    if os.path.exists(node_label_path):
        node_labels = np.array([int(float(x)) for x in _tu_lines(node_label_path)])
        if node_labels.size != n_nodes:
            raise ValueError("node_labels row count does not match graph_indicator")
        values = np.unique(node_labels)
        onehot = np.zeros((n_nodes, values.size))
        onehot[np.arange(n_nodes), np.searchsorted(values, node_labels)] = 1.0
        features = onehot
    else:
        features = np.ones((n_nodes, 1))

    if use_attributes:
        attr_path = p("node_attributes")
        if not os.path.exists(attr_path):
            raise ValueError(f"use_attributes set but {attr_path} is missing")
        attrs = np.array(
            [[float(v) for v in ln.replace(",", " ").split()] for ln in _tu_lines(attr_path)]
        )
        if attrs.shape[0] != n_nodes:
            raise ValueError("node_attributes row count does not match graph_indicator")
        features = np.hstack([features, attrs])

    graphs = []
    for k in range(n_graphs):
        lo = offsets[k]
        graphs.append(Graph(adjacency=adjacencies[k], features=features[lo : lo + sizes[k]]))
    return MultiGraphDataset(graphs=tuple(graphs), labels=labels, n_classes=int(classes.size))


def make_folds(dataset: MultiGraphDataset, k: int = 10, seed: int = 0) -> np.ndarray:
    """Seeded, class-stratified fold assignment with near-equal fold sizes.

    Returns an integer array of fold ids in 0..k-1, one per graph. A class
    with fewer members than k triggers a warning and an unstratified
    fallback (plain seeded shuffle dealt round-robin).
    """
    n = len(dataset)
    if k > n:
        raise ValueError(f"cannot make {k} folds out of {n} graphs")
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=int)
    counts = np.bincount(dataset.labels, minlength=dataset.n_classes)
    if np.any(counts < k):
        small = int(np.flatnonzero(counts < k)[0])
        warnings.warn(
            f"class {small} has {counts[small]} < {k} members; folds are not stratified"
        )
        order = rng.permutation(n)
        folds[order] = np.arange(n) % k
        return folds

    fill = np.zeros(k, dtype=int)
    for c in range(dataset.n_classes):
        members = np.flatnonzero(dataset.labels == c)
        members = members[rng.permutation(members.size)]
        for g in members:
            target = int(np.argmin(fill))
            folds[g] = target
            fill[target] += 1
    return folds
