"""Deterministic k-means with distance-weighted seeding and restarts.

Hand-rolled rather than delegated so that centroid initialization is bitwise
reproducible from a seed across runs: ties in assignment break to the lowest
index, restarts run in a fixed order, and the winner is the first restart
with the lowest within-cluster sum of squares.
"""

import numpy as np


def _sq_dists_to(points, centers):
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _plus_plus_init(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    centers[0] = points[rng.integers(n)]
    closest = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            # All remaining mass is zero: every point coincides with a chosen
            # center; fall back to uniform choice among all points.
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total))
            idx = min(idx, n - 1)
        centers[j] = points[idx]
        closest = np.minimum(closest, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(points, centers, max_iter=300, tol=1e-12):
    n, k = points.shape[0], centers.shape[0]
    labels = None
    for _ in range(max_iter):
        d = _sq_dists_to(points, centers)
        labels = d.argmin(axis=1)
        new_centers = centers.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centers[j] = points[members].mean(axis=0)
            else:
                # Re-seat an empty cluster at the point farthest from its center.
                farthest = int(d[np.arange(n), labels].argmax())
                new_centers[j] = points[farthest]
        shift = ((new_centers - centers) ** 2).sum()
        centers = new_centers
        if shift <= tol:
            break
    d = _sq_dists_to(points, centers)
    labels = d.argmin(axis=1)
    inertia = float(d[np.arange(n), labels].sum())
    return centers, labels, inertia


def kmeans(points, k, seed, restarts=10):
    """Best-of-``restarts`` k-means; returns (centers, labels, inertia)."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be positive")
    if n < k:
        raise ValueError(f"cannot place {k} centroids on {n} points")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        centers, labels, inertia = _lloyd(points, _plus_plus_init(points, k, rng))
        if best is None or inertia < best[2]:
            best = (centers, labels, inertia)
    return best
