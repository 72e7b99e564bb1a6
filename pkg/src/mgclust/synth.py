"""Synthetic multilayer graphs for demos, sanity checks, and gradient checking."""

import numpy as np
import scipy.sparse as sp

from .data import GraphLayer, MultilayerGraph


def _random_symmetric(rng, n, edge_prob):
    upper = np.triu(rng.random((n, n)) < edge_prob, k=1)
    dense = (upper | upper.T).astype(np.float64)
    return sp.csr_matrix(dense)


def random_multilayer(seed, n_nodes=12, attr_width=7, n_views=2, edge_prob=0.35, k_classes=3):
    """Independent random layers with standard-normal attributes; no labels."""
    rng = np.random.default_rng(seed)
    layers = []
    for _ in range(n_views):
        adjacency = _random_symmetric(rng, n_nodes, edge_prob)
        attributes = rng.standard_normal((n_nodes, attr_width))
        layers.append(GraphLayer(adjacency=adjacency, attributes=attributes))
    return MultilayerGraph(n_nodes=n_nodes, layers=layers, k_classes=k_classes).validate()


def two_clique_graph(block_size=20, n_views=2):
    """Two disconnected cliques with block one-hot attributes; trivially separable."""
    n = 2 * block_size
    dense = np.zeros((n, n))
    dense[:block_size, :block_size] = 1.0
    dense[block_size:, block_size:] = 1.0
    np.fill_diagonal(dense, 0.0)
    adjacency = sp.csr_matrix(dense)
    attributes = np.zeros((n, 2))
    attributes[:block_size, 0] = 1.0
    attributes[block_size:, 1] = 1.0
    labels = np.repeat([0, 1], block_size)
    layers = [GraphLayer(adjacency=adjacency, attributes=attributes) for _ in range(n_views)]
    return MultilayerGraph(n_nodes=n, layers=layers, k_classes=2, labels=labels).validate()


def sbm_multilayer(seed, block_sizes=(30, 30, 30), p_in=0.3, p_out=0.02,
                   n_views=2, attr_width=12, attr_noise=0.5):
    """Stochastic block model layers plus noisy block-indicator attributes."""
    rng = np.random.default_rng(seed)
    n = int(sum(block_sizes))
    labels = np.repeat(np.arange(len(block_sizes)), block_sizes)
    layers = []
    for _ in range(n_views):
        probs = np.where(labels[:, None] == labels[None, :], p_in, p_out)
        upper = np.triu(rng.random((n, n)) < probs, k=1)
        adjacency = sp.csr_matrix((upper | upper.T).astype(np.float64))
        base = np.zeros((n, attr_width))
        cols = np.arange(attr_width) % len(block_sizes)
        for b in range(len(block_sizes)):
            base[np.ix_(labels == b, cols == b)] = 1.0
        attributes = base + attr_noise * rng.standard_normal((n, attr_width))
        layers.append(GraphLayer(adjacency=adjacency, attributes=attributes))
    return MultilayerGraph(n_nodes=n, layers=layers, k_classes=len(block_sizes),
                           labels=labels).validate()
