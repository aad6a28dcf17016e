"""Seeded k-means with silhouette scoring for spatial-structure counting."""

from __future__ import annotations

import numpy as np


def _pairwise_sq(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.sum(diff * diff, axis=2)


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = [points[int(rng.integers(n))]]
    for _ in range(1, k):
        d2 = _pairwise_sq(points, np.array(centers)).min(axis=1)
        total = d2.sum()
        if total == 0.0:
            # all points coincide with a center already; any choice works
            centers.append(points[int(rng.integers(n))])
            continue
        probs = d2 / total
        centers.append(points[int(rng.choice(n, p=probs))])
    return np.array(centers)


def wcss(points: np.ndarray, assignments: np.ndarray, centers: np.ndarray) -> float:
    """Within-cluster sum of squares (the Lloyd objective)."""
    return float(np.sum((points - centers[assignments]) ** 2))


def kmeans(points: np.ndarray, k: int, seed: int = 0, iters: int = 100):
    """Seeded k-means++ followed by Lloyd iterations.

    Returns (assignments, centroids, silhouette).  Assignment ties go to
    the lowest center index; a cluster that empties is re-seeded to the
    point farthest from its current center.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a nonempty (N, D) array")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError("k must be in [1, n_points]")

    rng = np.random.default_rng(seed)
    centers = _plusplus_init(points, k, rng)
    assignments = np.argmin(_pairwise_sq(points, centers), axis=1)

    for _ in range(iters):
        for j in range(k):
            mask = assignments == j
            if mask.any():
                centers[j] = points[mask].mean(axis=0)
            else:
                far = int(np.argmax(_pairwise_sq(points, centers).min(axis=1)))
                centers[j] = points[far]
        new_assign = np.argmin(_pairwise_sq(points, centers), axis=1)
        if np.array_equal(new_assign, assignments):
            break
        assignments = new_assign

    return assignments, centers, silhouette(points, assignments)


def silhouette(points: np.ndarray, assignments: np.ndarray) -> float:
    """Mean silhouette coefficient; singleton clusters score 0, and a
    single-cluster labeling scores 0 overall."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.unique(assignments)
    if labels.size < 2:
        return 0.0
    dists = np.sqrt(_pairwise_sq(points, points))
    n = points.shape[0]
    scores = np.zeros(n)
    for i in range(n):
        own = assignments == assignments[i]
        n_own = own.sum()
        if n_own <= 1:
            scores[i] = 0.0
            continue
        a = dists[i][own].sum() / (n_own - 1)  # exclude self (distance 0)
        b = np.inf
        for lab in labels:
            if lab == assignments[i]:
                continue
            b = min(b, dists[i][assignments == lab].mean())
        scores[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(scores.mean())


def best_k(points: np.ndarray, k_range=range(2, 7), seed: int = 0, iters: int = 100) -> int:
    """Pick the cluster count with the highest silhouette."""
    best = None
    best_score = -np.inf
    for k in k_range:
        if k > points.shape[0]:
            break
        _, _, score = kmeans(points, k, seed=seed, iters=iters)
        if score > best_score:
            best_score = score
            best = k
    return int(best)
