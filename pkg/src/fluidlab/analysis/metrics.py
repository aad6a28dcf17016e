"""Feature-quality metrics: spatial structure, effective dimensionality,
dead capacity, and structural similarity.

All functions take plain float arrays (no autodiff involvement) and are
pure; shapes follow the (C, H, W) field convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_RANGE = 1.0
SSIM_WINDOW = 7
SSIM_SIGMA = 1.5


@dataclass
class MetricsRecord:
    spatial_std: float
    effective_rank: float
    dead_dims: int
    feature_std: float
    mse: float
    ssim: float


def spatial_std(z: np.ndarray) -> float:
    """Per-channel population std over the H*W positions, averaged over
    channels.  High values mean position-dependent features."""
    z = np.asarray(z, dtype=np.float64)
    c = z.shape[0]
    return float(z.reshape(c, -1).std(axis=1).mean())


def feature_std(z: np.ndarray) -> float:
    """Population std over every element of the feature tensor."""
    return float(np.asarray(z, dtype=np.float64).std())


def dead_dims(z: np.ndarray, threshold: float = 0.1) -> int:
    """Count of channels whose spatial std falls below threshold."""
    z = np.asarray(z, dtype=np.float64)
    c = z.shape[0]
    return int(np.sum(z.reshape(c, -1).std(axis=1) < threshold))


def _jacobi_singular_values(a: np.ndarray, tol: float = 1e-13, sweeps: int = 64) -> np.ndarray:
    """Singular values by one-sided Jacobi: rotate column pairs until all
    are mutually orthogonal, then read off the column norms."""
    a = np.array(a, dtype=np.float64)
    n_cols = a.shape[1]
    for _ in range(sweeps):
        rotated = False
        for p in range(n_cols - 1):
            for q in range(p + 1, n_cols):
                cp = a[:, p]
                cq = a[:, q]
                app = float(cp @ cp)
                aqq = float(cq @ cq)
                apq = float(cp @ cq)
                if abs(apq) <= tol * np.sqrt(app * aqq) or apq == 0.0:
                    continue
                zeta = (aqq - app) / (2.0 * apq)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                new_p = cs * cp - sn * cq  # cp/cq are views; build both first
                new_q = sn * cp + cs * cq
                a[:, p] = new_p
                a[:, q] = new_q
                rotated = True
        if not rotated:
            break
    sv = np.linalg.norm(a, axis=0)
    return np.sort(sv)[::-1]


def effective_rank(z: np.ndarray) -> float:
    """exp of the entropy of the normalized singular-value distribution.

    A (C, H, W) field is unrolled to a (H*W, C) matrix (positions are
    observations, channels are variables) and each column is centered.
    Zero singular values contribute nothing to the entropy; an all-zero
    matrix has a single degenerate direction and maps to 1.0.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 3:
        c = z.shape[0]
        mat = z.reshape(c, -1).T
    elif z.ndim == 2:
        mat = z
    else:
        raise ValueError("expected a (C, H, W) field or a 2-D matrix")
    mat = mat - mat.mean(axis=0, keepdims=True)
    sv = _jacobi_singular_values(mat)
    total = sv.sum()
    if total == 0.0:
        return 1.0
    p = sv / total
    p = p[p > 0.0]
    return float(np.exp(-np.sum(p * np.log(p))))


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords[:, None] ** 2 + coords[None, :] ** 2) / (2.0 * sigma * sigma))
    return g / g.sum()


def _window_mean(x: np.ndarray, win: np.ndarray) -> np.ndarray:
    # valid-window weighted local means via shifted slices; x is (H, W)
    size = win.shape[0]
    h, w = x.shape
    out = np.zeros((h - size + 1, w - size + 1))
    for di in range(size):
        for dj in range(size):
            out += win[di, dj] * x[di : di + h - size + 1, dj : dj + w - size + 1]
    return out


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural similarity, mean over valid 7x7 Gaussian windows and
    channels; inputs share a (C, H, W) shape with values in [0, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("ssim inputs must share a shape")
    if a.ndim == 2:
        a = a[None]
        b = b[None]
    _, h, w = a.shape
    if min(h, w) < SSIM_WINDOW:
        raise ValueError("field smaller than the %dx%d ssim window" % (SSIM_WINDOW, SSIM_WINDOW))

    c1 = (SSIM_K1 * SSIM_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_RANGE) ** 2
    win = _gaussian_window()
    vals = []
    for ch in range(a.shape[0]):
        mu_a = _window_mean(a[ch], win)
        mu_b = _window_mean(b[ch], win)
        var_a = _window_mean(a[ch] * a[ch], win) - mu_a * mu_a
        var_b = _window_mean(b[ch] * b[ch], win) - mu_b * mu_b
        cov = _window_mean(a[ch] * b[ch], win) - mu_a * mu_b
        num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
        den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def metrics_record(z: np.ndarray, recon: np.ndarray, target: np.ndarray) -> MetricsRecord:
    """Bundle the representation and fidelity metrics for one sample."""
    return MetricsRecord(
        spatial_std=spatial_std(z),
        effective_rank=effective_rank(z),
        dead_dims=dead_dims(z),
        feature_std=feature_std(z),
        mse=float(np.mean((np.asarray(recon) - np.asarray(target)) ** 2)),
        ssim=ssim(recon, target),
    )
