"""Vectorized numpy implementations of the hot stencil kernels.

This module is the fallback backend; ``fluidlab._cykernels`` provides the
compiled twin with identical signatures. Both operate on float64 arrays of
shape (C, H, W) and treat out-of-bounds neighbors as the nearest in-bounds
cell (replicate padding).
"""

from __future__ import annotations

import numpy as np


def laplacian(u: np.ndarray, dilation: int = 1) -> np.ndarray:
    """Dilated 5-point Laplacian with replicate padding.

    out[c, y, x] = u[c, y-d, x] + u[c, y+d, x] + u[c, y, x-d] + u[c, y, x+d]
                   - 4 * u[c, y, x]

    with every neighbor index clamped into range. Any dilation >= 1 is
    accepted, including dilations larger than the grid.
    """
    if dilation < 1:
        raise ValueError("dilation must be >= 1, got %r" % (dilation,))
    _, h, w = u.shape
    d = dilation
    up = np.maximum(np.arange(h) - d, 0)
    dn = np.minimum(np.arange(h) + d, h - 1)
    lf = np.maximum(np.arange(w) - d, 0)
    rt = np.minimum(np.arange(w) + d, w - 1)
    return u[:, up, :] + u[:, dn, :] + u[:, :, lf] + u[:, :, rt] - 4.0 * u


def laplacian_adjoint(g: np.ndarray, dilation: int = 1) -> np.ndarray:
    """Adjoint of :func:`laplacian` (transpose of the linear stencil map).

    The forward gathers from clamped indices, so the adjoint scatters each
    output row/column back onto the cells it read. Clamping turns into
    border sums, which keeps this all slicing (no scatter primitives).
    """
    if dilation < 1:
        raise ValueError("dilation must be >= 1, got %r" % (dilation,))
    _, h, w = g.shape
    d = dilation
    acc = -4.0 * g

    # up neighbor u[max(y-d, 0)]: row 0 absorbs rows 0..min(d, h-1),
    # row j (j >= 1) receives row j+d when it exists.
    m = min(d, h - 1)
    acc[:, 0, :] += g[:, : m + 1, :].sum(axis=1)
    if h - 1 - d >= 1:
        acc[:, 1 : h - d, :] += g[:, 1 + d :, :]

    # down neighbor u[min(y+d, h-1)]
    m = max(h - 1 - d, 0)
    acc[:, h - 1, :] += g[:, m:, :].sum(axis=1)
    if h - 1 - d >= 1:
        acc[:, d : h - 1, :] += g[:, : h - 1 - d, :]

    # left neighbor u[max(x-d, 0)]
    m = min(d, w - 1)
    acc[:, :, 0] += g[:, :, : m + 1].sum(axis=2)
    if w - 1 - d >= 1:
        acc[:, :, 1 : w - d] += g[:, :, 1 + d :]

    # right neighbor u[min(x+d, w-1)]
    m = max(w - 1 - d, 0)
    acc[:, :, w - 1] += g[:, :, m:].sum(axis=2)
    if w - 1 - d >= 1:
        acc[:, :, d : w - 1] += g[:, :, : w - 1 - d]

    return acc


def box_smooth3(u: np.ndarray) -> np.ndarray:
    """3x3 mean filter with replicate padding (separable box)."""
    _, h, w = u.shape
    up = np.maximum(np.arange(h) - 1, 0)
    dn = np.minimum(np.arange(h) + 1, h - 1)
    t = (u[:, up, :] + u + u[:, dn, :]) / 3.0
    lf = np.maximum(np.arange(w) - 1, 0)
    rt = np.minimum(np.arange(w) + 1, w - 1)
    return (t[:, :, lf] + t + t[:, :, rt]) / 3.0
