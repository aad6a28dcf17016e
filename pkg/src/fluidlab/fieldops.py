"""Core grid arithmetic: stencils, normalization, pooling, resampling,
gradients, energy, and spectra.

A field is a float64 ndarray of shape (C, H, W), row-major. Every function
here is a pure, deterministic map over its inputs; hot stencils delegate to
the selected kernel backend (see :mod:`fluidlab.kernels`).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from fluidlab import kernels


def as_field(a, name: str = "field") -> np.ndarray:
    """Validate and coerce to a (C, H, W) float64 C-contiguous field."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError("%s must have shape (C, H, W), got %r" % (name, arr.shape))
    if min(arr.shape) < 1:
        raise ValueError("%s has an empty dimension: %r" % (name, arr.shape))
    if not np.all(np.isfinite(arr)):
        raise ValueError("%s contains non-finite values" % (name,))
    return arr


# ---------------------------------------------------------------------------
# scalar nonlinearities (fixed conventions, used by every model module)


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    # ln(1 + e^x), computed stably for large |x|
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def softplus_inverse(y):
    # x such that softplus(x) = y; y must be > 0
    y = np.asarray(y, dtype=np.float64)
    return y + np.log(-np.expm1(-y))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x):
    """GELU, tanh approximation: 0.5x(1 + tanh(sqrt(2/pi)(x + 0.044715x^3)))."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + 0.044715 * x**3)))


def gelu_grad(x):
    x = np.asarray(x, dtype=np.float64)
    t = np.tanh(_GELU_C * (x + 0.044715 * x**3))
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x * x)


# ---------------------------------------------------------------------------
# stencils and normalization


def laplacian(field: np.ndarray, dilation: int = 1) -> np.ndarray:
    """Dilated 5-point Laplacian, replicate padding. See kernel backend."""
    return kernels.laplacian(np.ascontiguousarray(field, dtype=np.float64), dilation)


def rms_norm(field: np.ndarray, gains: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Per-position RMS normalization over channels, then per-channel gain."""
    ms = np.mean(field * field, axis=0, keepdims=True)
    return field / np.sqrt(ms + eps) * np.asarray(gains, dtype=np.float64)[:, None, None]


# ---------------------------------------------------------------------------
# resampling: both pooling and bilinear resize are separable linear maps, so
# each reduces to two small cached weight matrices applied per channel.


@lru_cache(maxsize=None)
def _pool_matrix(n_in: int, n_out: int) -> np.ndarray:
    # adaptive windows: index i covers floor(i*n/out) .. ceil((i+1)*n/out)-1
    p = np.zeros((n_out, n_in))
    for i in range(n_out):
        lo = (i * n_in) // n_out
        hi = -((-(i + 1) * n_in) // n_out)
        p[i, lo:hi] = 1.0 / (hi - lo)
    return p


@lru_cache(maxsize=None)
def _bilinear_matrix(n_in: int, n_out: int) -> np.ndarray:
    # half-pixel centers: src = (i + 0.5) * n_in / n_out - 0.5, border clamped
    b = np.zeros((n_out, n_in))
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.intp)
    frac = src - i0
    i1 = np.minimum(i0 + 1, n_in - 1)
    for i in range(n_out):
        b[i, i0[i]] += 1.0 - frac[i]
        b[i, i1[i]] += frac[i]
    return b


def avg_pool(field: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Adaptive average pooling to (out_h, out_w); out sizes must not exceed in."""
    _, h, w = field.shape
    if out_h > h or out_w > w:
        raise ValueError("avg_pool output %r exceeds input %r" % ((out_h, out_w), (h, w)))
    ph = _pool_matrix(h, out_h)
    pw = _pool_matrix(w, out_w)
    return np.matmul(ph, field @ pw.T)


def avg_pool_adjoint(g: np.ndarray, in_h: int, in_w: int) -> np.ndarray:
    _, oh, ow = g.shape
    ph = _pool_matrix(in_h, oh)
    pw = _pool_matrix(in_w, ow)
    return np.matmul(ph.T, g @ pw)


def bilinear_resize(field: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with half-pixel centers and border clamp.

    Resizing to the input size is the exact identity.
    """
    _, h, w = field.shape
    bh = _bilinear_matrix(h, out_h)
    bw = _bilinear_matrix(w, out_w)
    return np.matmul(bh, field @ bw.T)


def bilinear_resize_adjoint(g: np.ndarray, in_h: int, in_w: int) -> np.ndarray:
    _, oh, ow = g.shape
    bh = _bilinear_matrix(in_h, oh)
    bw = _bilinear_matrix(in_w, ow)
    return np.matmul(bh.T, g @ bw)


def box_smooth3(field: np.ndarray) -> np.ndarray:
    """3x3 replicate-padded mean filter (kernel backend)."""
    return kernels.box_smooth3(np.ascontiguousarray(field, dtype=np.float64))


# ---------------------------------------------------------------------------
# reductions, gradients, spectra


def spatial_mean(field: np.ndarray) -> np.ndarray:
    """Per-channel mean over all H*W positions -> (C,) vector."""
    return field.mean(axis=(1, 2))


def finite_diff_grads(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences along x and y; trailing column/row are zero.

    Returns (gx, gy), each with the input shape.
    """
    gx = np.zeros_like(image)
    gy = np.zeros_like(image)
    gx[:, :, :-1] = image[:, :, 1:] - image[:, :, :-1]
    gy[:, :-1, :] = image[:, 1:, :] - image[:, :-1, :]
    return gx, gy


def energy(field: np.ndarray) -> float:
    """L2 energy: sum of squared values."""
    return float(np.sum(np.asarray(field, dtype=np.float64) ** 2))


@lru_cache(maxsize=None)
def _dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def spectral_split(field: np.ndarray, radius_fraction: float) -> tuple[float, float]:
    """Energy inside vs outside a centered disc in frequency space.

    Naive (matrix) 2D DFT per channel, unnormalized, so
    low + high == H*W*energy(field) by Parseval. The disc has radius
    radius_fraction * min(H, W) / 2 around DC; bins strictly inside count as
    low, the rest as high.
    """
    if not 0.0 < radius_fraction < 1.0:
        raise ValueError("radius_fraction must be in (0, 1)")
    _, h, w = field.shape
    f = np.matmul(_dft_matrix(h), field @ _dft_matrix(w).T)
    power = (f.real * f.real + f.imag * f.imag).sum(axis=0)
    fy = np.minimum(np.arange(h), h - np.arange(h))
    fx = np.minimum(np.arange(w), w - np.arange(w))
    dist = np.hypot(fy[:, None], fx[None, :])
    radius = radius_fraction * min(h, w) / 2.0
    mask = dist < radius
    low = float(power[mask].sum())
    high = float(power[~mask].sum())
    return low, high
