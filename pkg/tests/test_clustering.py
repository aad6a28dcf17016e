"""k-means against brute-force nearest-center checks and objective descent."""

import numpy as np

from fluidlab.analysis import clustering


def three_blobs(seed=0, per=30, spread=0.3):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    pts = np.concatenate(
        [c + rng.normal(size=(per, 2)) * spread for c in centers]
    )
    labels = np.repeat(np.arange(3), per)
    return pts, labels


def test_k1_centroid_is_mean():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(40, 3))
    assign, centers, sil = clustering.kmeans(pts, 1, seed=0)
    assert np.allclose(centers[0], pts.mean(axis=0))
    assert np.all(assign == 0)
    assert sil == 0.0


def test_three_blobs_recovered():
    pts, truth = three_blobs()
    assign, centers, sil = clustering.kmeans(pts, 3, seed=0)
    # each true blob maps to exactly one predicted cluster
    for blob in range(3):
        got = assign[truth == blob]
        assert np.all(got == got[0])
    assert len(set(assign[truth == b][0] for b in range(3))) == 3
    assert sil > 0.8
    # brute-force: every point sits with its nearest center
    d = np.linalg.norm(pts[:, None, :] - centers[None], axis=2)
    assert np.array_equal(assign, np.argmin(d, axis=1))


def test_duplicate_points_degenerate():
    pts = np.tile(np.array([[1.0, 2.0]]), (12, 1))
    assign, centers, sil = clustering.kmeans(pts, 3, seed=0)
    assert np.all(np.isfinite(centers))
    assert sil == 0.0 or np.isfinite(sil)


def test_objective_non_increasing_across_iterations():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(60, 2)) * 3.0
    prev = None
    for iters in range(1, 8):
        assign, centers, _ = clustering.kmeans(pts, 4, seed=9, iters=iters)
        obj = clustering.wcss(pts, assign, centers)
        if prev is not None:
            assert obj <= prev + 1e-9
        prev = obj


def test_determinism():
    pts, _ = three_blobs(seed=4)
    a1 = clustering.kmeans(pts, 3, seed=5)
    a2 = clustering.kmeans(pts, 3, seed=5)
    assert np.array_equal(a1[0], a2[0])
    assert np.array_equal(a1[1], a2[1])
    assert a1[2] == a2[2]


def test_best_k_picks_three_for_three_blobs():
    pts, _ = three_blobs(seed=6)
    assert clustering.best_k(pts, seed=2) == 3


def test_silhouette_two_tight_groups():
    pts = np.concatenate([np.zeros((10, 2)), np.full((10, 2), 8.0)])
    pts += np.random.default_rng(7).normal(size=pts.shape) * 0.05
    assign = np.repeat([0, 1], 10)
    assert clustering.silhouette(pts, assign) > 0.95


def test_kmeans_validates_inputs():
    import pytest

    with pytest.raises(ValueError):
        clustering.kmeans(np.zeros((0, 2)), 1)
    with pytest.raises(ValueError):
        clustering.kmeans(np.zeros((5, 2)), 6)
