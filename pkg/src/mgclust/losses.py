"""Objective terms: structure preservation, reconstruction, contrastive fusion,
weighted embedding fusion, and self-supervised clustering.

All terms are built from recorded ops, so one backward pass through the total
yields exact gradients for every parameter.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad


@dataclass(frozen=True)
class FusionWeights:
    """Nonnegative per-view combination coefficients, at least one positive."""

    beta: tuple

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        if any(b < 0 for b in beta):
            raise ValueError("fusion weights must be nonnegative")
        if not any(b > 0 for b in beta):
            raise ValueError("at least one fusion weight must be positive")
        object.__setattr__(self, "beta", beta)

    def __len__(self):
        return len(self.beta)


def structure_loss(z, layer):
    """Negative log-sigmoid affinity summed over all neighbor pairs (self included).

    Penalizes neighboring nodes whose embedding dot products are small, which
    preserves graph structure without reconstructing the adjacency itself.
    """
    dots = ad.edge_dot(z, layer)
    return ad.scale(ad.sum_all(ad.log(ad.sigmoid(dots))), -1.0)


def reconstruction_loss(x_views, x_hat_views, z_views, layers, lambda1):
    """Squared Frobenius attribute error plus lambda1-weighted structure terms, over all views."""
    if not (len(x_views) == len(x_hat_views) == len(z_views) == len(layers)):
        raise ValueError("per-view argument lists must have equal length")
    tape = x_hat_views[0].tape
    total = None
    for x, x_hat in zip(x_views, x_hat_views):
        if x.shape != x_hat.data.shape:
            raise ValueError(f"reconstruction shape mismatch: {x.shape} vs {x_hat.data.shape}")
        term = ad.frobenius_sq(ad.sub(x_hat, tape.leaf(x)))
        total = term if total is None else ad.add(total, term)
    if lambda1 != 0.0:
        for z, layer in zip(z_views, layers):
            total = ad.add(total, ad.scale(structure_loss(z, layer), lambda1))
    return total


def _direction_sum(anchors_n, others_n, tau):
    """Sum over anchor nodes of the per-node contrastive term.

    The positive for anchor i is the other view's row i. The denominator holds
    all N cross-view similarities (positive included) plus the within-view
    similarities with the anchor's own self term excluded.
    """
    inter = ad.matmul(anchors_n, ad.transpose(others_n))
    intra = ad.matmul(anchors_n, ad.transpose(anchors_n))
    pos = ad.scale(ad.diag_part(inter), 1.0 / tau)
    inter_sum = ad.row_sum(ad.exp(ad.scale(inter, 1.0 / tau)))
    intra_sum = ad.sub(
        ad.row_sum(ad.exp(ad.scale(intra, 1.0 / tau))),
        ad.exp(ad.scale(ad.diag_part(intra), 1.0 / tau)),
    )
    denom = ad.add(inter_sum, intra_sum)
    return ad.sum_all(ad.sub(ad.log(denom), pos))


def pair_contrastive_loss(za, zb, tau):
    """Contrastive alignment of two views, averaged over both directions and nodes.

    Symmetric by construction: swapping the arguments performs the identical
    arithmetic, so the result is equal bit for bit.
    """
    if za.data.shape != zb.data.shape:
        raise ValueError(f"view shapes differ: {za.data.shape} vs {zb.data.shape}")
    if tau <= 0:
        raise ValueError("temperature must be positive")
    n = za.data.shape[0]
    za_n = ad.row_l2_normalize(za)
    zb_n = ad.row_l2_normalize(zb)
    forward = _direction_sum(za_n, zb_n, tau)
    reverse = _direction_sum(zb_n, za_n, tau)
    return ad.scale(ad.add(forward, reverse), 1.0 / (2.0 * n))


def contrastive_loss(z_views, tau):
    """Sum of pairwise contrastive terms over all ordered view pairs.

    With a single view there are no pairs; the loss is 0 (with a warning) so
    single-layer datasets still train.
    """
    if len(z_views) < 2:
        warnings.warn("contrastive loss needs at least two views; returning 0")
        return z_views[0].tape.leaf(np.zeros((1, 1)))
    total = None
    for s, za in enumerate(z_views):
        for t, zb in enumerate(z_views):
            if s == t:
                continue
            term = pair_contrastive_loss(za, zb, tau)
            total = term if total is None else ad.add(total, term)
    return total


def fuse(z_views, weights):
    """Weighted sum of per-view embeddings."""
    if len(weights) != len(z_views):
        raise ValueError(f"{len(weights)} fusion weights for {len(z_views)} views")
    total = None
    for z, b in zip(z_views, weights.beta):
        term = ad.scale(z, b)
        total = term if total is None else ad.add(total, term)
    return total


def soft_assignment(z, centroids):
    """Row-stochastic node-to-centroid memberships from a Student's-t kernel.

    q[i, j] is (1 + ||z_i - mu_j||^2)^-1 normalized over clusters;
    differentiable in both the embedding and the centroids.
    """
    if centroids.data.shape[0] < 2:
        raise ValueError("soft assignment needs at least two centroids")
    kernel = ad.reciprocal(ad.add_scalar(ad.pairwise_sqdist(z, centroids), 1.0))
    return ad.mul(kernel, ad.reciprocal(ad.row_sum(kernel)))


def target_distribution(q):
    """Sharpened, frequency-corrected target computed from a membership matrix.

    Plain numpy: the target is treated as a constant, so no gradient flows
    through it.
    """
    q = np.asarray(q, dtype=np.float64)
    weight = (q * q) / q.sum(axis=0, keepdims=True)
    return weight / weight.sum(axis=1, keepdims=True)


def clustering_loss(q, p):
    """Squared Frobenius gap between memberships and the constant target."""
    p = np.asarray(p, dtype=np.float64)
    if q.data.shape != p.shape:
        raise ValueError(f"shape mismatch: {q.data.shape} vs {p.shape}")
    return ad.frobenius_sq(ad.sub(q, q.tape.leaf(p)))


def total_loss(recon, contrast, cluster, lambda2, lambda3):
    """Joint objective: reconstruction + lambda2 * contrastive + lambda3 * clustering."""
    return ad.add(recon, ad.add(ad.scale(contrast, lambda2), ad.scale(cluster, lambda3)))
