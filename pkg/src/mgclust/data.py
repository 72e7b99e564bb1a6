"""Multilayer graph datasets: loading, validation, and preprocessing.

On-disk dataset format
----------------------
A dataset is a directory with a ``manifest.json`` and the files it names::

    manifest.json
    {
      "n_nodes": 3025,
      "k_classes": 3,
      "shared_attributes": true,        # one attribute matrix reused by all layers
      "attributes": "features.csv",     # only when shared_attributes is true
      "layers": [
        {"edges": "view0.edges"},       # per-layer "attributes" otherwise
        {"edges": "view1.edges"}
      ],
      "labels": "labels.txt",           # optional, evaluation only
      "similarity_view": false          # append a cosine-similarity attribute view
    }

* Edge lists: whitespace-separated ``src dst`` pairs, 0-indexed, one per line.
  Blank lines and ``#`` comments are ignored. Duplicate and reversed edges are
  merged; explicit self-loops are dropped (self-loops are added during
  normalization, not stored).
* Attributes: dense CSV (``.csv`` extension) or sparse triplet text (any other
  extension) whose first data line is a ``rows cols`` header followed by
  ``row col value`` lines.
* Labels: one integer per line, length ``n_nodes``, values in
  ``[0, k_classes)``.

With ``"similarity_view": true`` the loader appends one extra layer that
reuses layer 0's edges and carries the pairwise cosine-similarity matrix of
layer 0's attributes (an N-wide attribute view), which is how single-graph
datasets with a derived second attribute view are represented.
"""

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .autodiff import EdgeSet
from .errors import DatasetError


@dataclass(frozen=True)
class GraphLayer:
    """One layer: a symmetric 0/1 adjacency plus that view's node attributes."""

    adjacency: sp.csr_matrix
    attributes: np.ndarray

    @property
    def n_edges(self):
        """Undirected edge count (each pair counted once)."""
        return self.adjacency.nnz // 2


@dataclass(frozen=True)
class MultilayerGraph:
    """A fixed node set observed through m adjacency structures and attribute views."""

    n_nodes: int
    layers: list
    k_classes: int
    labels: np.ndarray = None
    shared_attributes: bool = False

    @property
    def n_layers(self):
        return len(self.layers)

    def validate(self):
        if self.n_nodes < 1:
            raise DatasetError("graph needs at least one node")
        if not self.layers:
            raise DatasetError("graph needs at least one layer")
        for idx, layer in enumerate(self.layers):
            a = layer.adjacency
            if a.shape != (self.n_nodes, self.n_nodes):
                raise DatasetError(f"layer {idx}: adjacency shape {a.shape} does not match n_nodes={self.n_nodes}")
            if a.diagonal().any():
                raise DatasetError(f"layer {idx}: adjacency must have a zero diagonal")
            if (a != a.T).nnz != 0:
                raise DatasetError(f"layer {idx}: adjacency must be symmetric")
            x = layer.attributes
            if x.ndim != 2 or x.shape[0] != self.n_nodes:
                raise DatasetError(f"layer {idx}: attribute rows {x.shape} do not match n_nodes={self.n_nodes}")
        if self.labels is not None:
            if self.labels.shape != (self.n_nodes,):
                raise DatasetError(f"label count {self.labels.shape} does not match n_nodes={self.n_nodes}")
            if self.labels.min() < 0 or self.labels.max() >= self.k_classes:
                raise DatasetError(f"labels must lie in [0, {self.k_classes})")
        return self


@dataclass(frozen=True)
class NormalizedLayer:
    """Self-looped, symmetrically degree-normalized adjacency of one layer."""

    a_hat: sp.csr_matrix
    edge_set: EdgeSet = field(compare=False)

    @property
    def neighbors(self):
        """Per-node sorted neighbor arrays, self included."""
        return self.edge_set.neighbor_list()


def l2_normalize_rows(x):
    """Row-wise L2 normalization; all-zero rows are left at zero."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.sqrt((x * x).sum(axis=1, keepdims=True))
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def normalize_layer(adjacency):
    """Add self-loops and rescale entries by inverse square-root degrees.

    Entry (i, j) of the result is A_ij / sqrt(deg_i * deg_j) where A includes
    the self-loops and deg is the self-looped row sum, so no degree is zero.
    """
    a = sp.csr_matrix(adjacency, dtype=np.float64)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    n = a.shape[0]
    looped = (a + sp.identity(n, format="csr", dtype=np.float64)).tocsr()
    looped.sort_indices()
    inv_sqrt_deg = 1.0 / np.sqrt(np.asarray(looped.sum(axis=1)).ravel())
    d = sp.diags(inv_sqrt_deg)
    a_hat = (d @ looped @ d).tocsr()
    a_hat.sort_indices()
    return NormalizedLayer(a_hat=a_hat, edge_set=EdgeSet.from_adjacency(a_hat))


def build_second_attribute_view(x):
    """Pairwise cosine similarities of attribute rows, as an N x N attribute view.

    All-zero rows get zero similarity to every other node (diagonal stays 1)
    and trigger a warning.
    """
    x = np.asarray(x, dtype=np.float64)
    norms = np.sqrt((x * x).sum(axis=1))
    zero_rows = norms == 0
    if zero_rows.any():
        warnings.warn(f"{int(zero_rows.sum())} all-zero attribute rows; their similarities are set to 0")
    xn = l2_normalize_rows(x)
    s = np.clip(xn @ xn.T, -1.0, 1.0)
    s = (s + s.T) / 2.0
    np.fill_diagonal(s, 1.0)
    return s


def with_similarity_view(g, source_layer=0):
    """Append a layer reusing ``source_layer``'s edges with cosine-similarity attributes."""
    src = g.layers[source_layer]
    extra = GraphLayer(adjacency=src.adjacency, attributes=build_second_attribute_view(src.attributes))
    return replace(g, layers=list(g.layers) + [extra], shared_attributes=False)


def drop_layer(g, layer_index):
    """Copy of the graph with one layer (its adjacency and attribute view) removed."""
    if not 0 <= layer_index < g.n_layers:
        raise IndexError(f"layer index {layer_index} out of range for {g.n_layers} layers")
    if g.n_layers < 2:
        raise ValueError("cannot drop the last remaining layer")
    kept = [layer for i, layer in enumerate(g.layers) if i != layer_index]
    return replace(g, layers=kept)


# ---------------------------------------------------------------------------
# Reading and writing the on-disk format
# ---------------------------------------------------------------------------


def _data_lines(path):
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def read_edge_list(path, n_nodes):
    """Read, deduplicate, and symmetrize a 0-indexed edge list into a CSR adjacency."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"edge list not found: {path}")
    rows, cols = [], []
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 2:
            raise DatasetError(f"{path}:{lineno}: expected 'src dst', got {line!r}")
        try:
            src, dst = int(parts[0]), int(parts[1])
        except ValueError:
            raise DatasetError(f"{path}:{lineno}: non-integer node index in {line!r}")
        if not (0 <= src < n_nodes and 0 <= dst < n_nodes):
            raise DatasetError(f"{path}:{lineno}: node index out of range [0, {n_nodes}) in {line!r}")
        if src == dst:
            continue
        rows.append(src)
        cols.append(dst)
    a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_nodes, n_nodes))
    a = a.maximum(a.T)
    a.data[:] = 1.0
    a.sort_indices()
    return a


def read_attributes(path, n_nodes):
    """Read a dense CSV or sparse triplet attribute matrix."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"attribute file not found: {path}")
    if path.suffix.lower() == ".csv":
        rows = []
        width = None
        for lineno, line in _data_lines(path):
            values = line.split(",")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise DatasetError(f"{path}:{lineno}: ragged row ({len(values)} values, expected {width})")
            try:
                rows.append([float(v) for v in values])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-numeric attribute value")
        x = np.asarray(rows, dtype=np.float64)
        if x.shape[0] != n_nodes:
            raise DatasetError(f"{path}: {x.shape[0]} attribute rows, expected {n_nodes}")
        return x
    return _read_triplet_attributes(path, n_nodes)


def _read_triplet_attributes(path, n_nodes):
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise DatasetError(f"{path}: empty attribute file")
    parts = header.split()
    if len(parts) != 2:
        raise DatasetError(f"{path}:{lineno}: triplet files start with a 'rows cols' header")
    n_rows, n_cols = int(parts[0]), int(parts[1])
    if n_rows != n_nodes:
        raise DatasetError(f"{path}: header declares {n_rows} rows, expected {n_nodes}")
    x = np.zeros((n_rows, n_cols), dtype=np.float64)
    for lineno, line in lines:
        parts = line.split()
        if len(parts) != 3:
            raise DatasetError(f"{path}:{lineno}: expected 'row col value', got {line!r}")
        r, c = int(parts[0]), int(parts[1])
        if not (0 <= r < n_rows and 0 <= c < n_cols):
            raise DatasetError(f"{path}:{lineno}: index out of range in {line!r}")
        x[r, c] = float(parts[2])
    return x


def read_labels(path, n_nodes, k_classes):
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"label file not found: {path}")
    values = [int(line) for _, line in _data_lines(path)]
    labels = np.asarray(values, dtype=np.int64)
    if labels.shape[0] != n_nodes:
        raise DatasetError(f"{path}: {labels.shape[0]} labels, expected {n_nodes}")
    if labels.size and (labels.min() < 0 or labels.max() >= k_classes):
        raise DatasetError(f"{path}: labels must lie in [0, {k_classes})")
    return labels


def load_multilayer_graph(dir_path, manifest=None):
    """Load and validate a dataset directory (see module docstring for the format)."""
    dir_path = Path(dir_path)
    if manifest is None:
        manifest_path = dir_path / "manifest.json"
        if not manifest_path.is_file():
            raise DatasetError(f"manifest not found: {manifest_path}")
        manifest = json.loads(manifest_path.read_text())
    try:
        n_nodes = int(manifest["n_nodes"])
        k_classes = int(manifest["k_classes"])
        layer_entries = manifest["layers"]
    except KeyError as exc:
        raise DatasetError(f"manifest missing required field: {exc}")
    if not layer_entries:
        raise DatasetError("manifest lists no layers")

    shared = bool(manifest.get("shared_attributes", False))
    shared_x = None
    if shared:
        if "attributes" not in manifest:
            raise DatasetError("shared_attributes requires a top-level 'attributes' path")
        shared_x = read_attributes(dir_path / manifest["attributes"], n_nodes)

    layers = []
    for idx, entry in enumerate(layer_entries):
        if "edges" not in entry:
            raise DatasetError(f"layer {idx}: missing 'edges' path")
        adjacency = read_edge_list(dir_path / entry["edges"], n_nodes)
        if shared:
            x = shared_x
        else:
            if "attributes" not in entry:
                raise DatasetError(f"layer {idx}: missing 'attributes' path (or set shared_attributes)")
            x = read_attributes(dir_path / entry["attributes"], n_nodes)
        layers.append(GraphLayer(adjacency=adjacency, attributes=x))

    labels = None
    if manifest.get("labels"):
        labels = read_labels(dir_path / manifest["labels"], n_nodes, k_classes)

    g = MultilayerGraph(
        n_nodes=n_nodes,
        layers=layers,
        k_classes=k_classes,
        labels=labels,
        shared_attributes=shared,
    ).validate()
    if manifest.get("similarity_view", False):
        g = with_similarity_view(g)
    return g


def save_multilayer_graph(g, dir_path):
    """Write a graph in the on-disk format; loading it back is bit-identical.

    Attributes are written as dense CSV with 17 significant digits, which
    round-trips float64 exactly. Shared attributes are stored once.
    """
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "n_nodes": g.n_nodes,
        "k_classes": g.k_classes,
        "shared_attributes": g.shared_attributes,
        "layers": [],
    }
    if g.shared_attributes:
        manifest["attributes"] = "attributes.csv"
        _write_attributes(dir_path / "attributes.csv", g.layers[0].attributes)
    for idx, layer in enumerate(g.layers):
        entry = {"edges": f"layer{idx}.edges"}
        _write_edge_list(dir_path / entry["edges"], layer.adjacency)
        if not g.shared_attributes:
            entry["attributes"] = f"layer{idx}.csv"
            _write_attributes(dir_path / entry["attributes"], layer.attributes)
        manifest["layers"].append(entry)
    if g.labels is not None:
        manifest["labels"] = "labels.txt"
        (dir_path / "labels.txt").write_text("".join(f"{v}\n" for v in g.labels))
    (dir_path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return dir_path


def _write_edge_list(path, adjacency):
    coo = sp.triu(adjacency, k=1).tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [f"{coo.row[i]} {coo.col[i]}\n" for i in order]
    Path(path).write_text("".join(lines))


def _write_attributes(path, x):
    with open(path, "w") as fh:
        for row in x:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")
