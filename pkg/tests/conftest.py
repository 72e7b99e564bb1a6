import json
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from mgclust.data import GraphLayer, MultilayerGraph


@pytest.fixture
def tiny_dataset_dir(tmp_path):
    """A 2-node, 1-layer labeled dataset on disk in the documented format."""
    d = tmp_path / "tiny"
    d.mkdir()
    (d / "manifest.json").write_text(json.dumps({
        "n_nodes": 2,
        "k_classes": 2,
        "layers": [{"edges": "g.edges", "attributes": "x.csv"}],
        "labels": "labels.txt",
    }))
    (d / "g.edges").write_text("0 1\n")
    (d / "x.csv").write_text("1,0\n0,1\n")
    (d / "labels.txt").write_text("0\n1\n")
    return d


def make_graph(adjacencies, attributes, k_classes=2, labels=None):
    """Build a validated in-memory multilayer graph from dense arrays."""
    layers = [
        GraphLayer(adjacency=sp.csr_matrix(np.asarray(a, dtype=np.float64)),
                   attributes=np.asarray(x, dtype=np.float64))
        for a, x in zip(adjacencies, attributes)
    ]
    n = layers[0].adjacency.shape[0]
    return MultilayerGraph(
        n_nodes=n, layers=layers, k_classes=k_classes,
        labels=None if labels is None else np.asarray(labels),
    ).validate()


@pytest.fixture
def path_graph_layer():
    """Normalized 3-node path 0-1-2."""
    from mgclust.data import normalize_layer
    a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    return normalize_layer(sp.csr_matrix(a))
