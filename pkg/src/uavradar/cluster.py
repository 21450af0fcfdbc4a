"""Density-based clustering for radar point clouds.

Deterministic, order-independent DBSCAN: clusters are the connected
components of core points (points with at least `min_pts` neighbors within
`eps`, the point itself included), and each non-core point joins the
cluster of its nearest core neighbor within eps (ties to the lowest core
index) or is labeled noise (-1). This definition does not depend on
iteration order, unlike the textbook expansion, so two implementations can
be compared as exact partitions.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def dbscan(points, eps: float, min_pts: int) -> np.ndarray:
    """Cluster points; returns integer labels (noise = -1, clusters 0..k-1).

    Labels are assigned in order of each cluster's lowest member index, so
    the labeling itself is deterministic, not just the partition.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if n == 0:
        return np.empty(0, dtype=int)
    if eps <= 0 or min_pts < 1:
        raise ValueError("eps must be positive and min_pts >= 1")

    tree = cKDTree(points)
    neighbors = tree.query_ball_tree(tree, eps)
    is_core = np.array([len(nb) >= min_pts for nb in neighbors])

    # Union-find over core points connected within eps.
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in np.nonzero(is_core)[0]:
        for j in neighbors[i]:
            if is_core[j]:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    labels = np.full(n, -1, dtype=int)
    roots = {}
    for i in np.nonzero(is_core)[0]:
        r = find(i)
        if r not in roots:
            roots[r] = len(roots)
        labels[i] = roots[r]

    # Border points: nearest core neighbor within eps, ties to lowest index.
    for i in np.nonzero(~is_core)[0]:
        best = None
        for j in neighbors[i]:
            if is_core[j]:
                d = float(np.linalg.norm(points[i] - points[j]))
                if best is None or d < best[0] - 1e-15 or (abs(d - best[0]) <= 1e-15 and j < best[1]):
                    best = (d, j)
        if best is not None:
            labels[i] = labels[best[1]]
    return labels


def largest_cluster(points, labels) -> np.ndarray:
    """Indices of the largest cluster (most members; ties to lowest label)."""
    labels = np.asarray(labels)
    valid = labels[labels >= 0]
    if valid.size == 0:
        return np.empty(0, dtype=int)
    counts = np.bincount(valid)
    best = int(np.argmax(counts))  # argmax returns the first (lowest) label on ties
    return np.nonzero(labels == best)[0]
