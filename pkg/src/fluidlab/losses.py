"""Training objective: sigmoid reconstruction and prediction MSE, a
variance hinge against channel collapse, and edge-preserving penalties.

Every term is built from autodiff primitives so one backward pass covers
the whole objective.  Decoder outputs are logits; sigmoid happens here.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from . import fieldops

STD_GUARD = 1e-12  # inside the sqrt so exactly-dead channels stay finite


@dataclass
class LossWeights:
    w_r: float = 1.0           # reconstruction
    w_p: float = 1.0           # prediction
    w_v: float = 0.5           # variance hinge
    w_g: float = 1.0           # finite-difference gradient match
    sigma_target: float = 1.0
    w_edge: float = 0.0        # optional Sobel term
    w_freq: float = 0.0        # optional log-spectrum term


def _as_var(x) -> ad.Var:
    return x if isinstance(x, ad.Var) else ad.Var(np.asarray(x, dtype=np.float64))


def variance_loss(z, sigma_target: float = 1.0) -> ad.Var:
    """Mean over channels of max(0, sigma_target - std_c); population std
    over spatial positions."""
    z = _as_var(z)
    _, h, w = z.shape
    mean = ad.expand_chan(ad.spatial_mean(z), h, w)
    var = ad.spatial_mean(ad.square(ad.sub(z, mean)))
    std = ad.sqrt(ad.add(var, ad.const(STD_GUARD)))
    return ad.vmean(ad.relu(ad.sub(ad.const(sigma_target), std)))


def gradient_loss(pred, target) -> ad.Var:
    """Mean |forward-difference mismatch| along both spatial axes."""
    pred = _as_var(pred)
    target = _as_var(target)
    dx = ad.absolute(ad.sub(ad.diff_x(pred), ad.diff_x(target)))
    dy = ad.absolute(ad.sub(ad.diff_y(pred), ad.diff_y(target)))
    return ad.vmean(ad.add(dx, dy))


@lru_cache(maxsize=16)
def _sobel_weights(c: int, axis: str) -> np.ndarray:
    gx = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
    k = gx if axis == "x" else gx.T
    w = np.zeros((c, c, 3, 3))
    for i in range(c):
        w[i, i] = k
    return w


@lru_cache(maxsize=16)
def _dft_parts(n: int):
    k = np.arange(n)
    ang = -2.0 * np.pi * np.outer(k, k) / n
    return np.cos(ang), np.sin(ang)


def _log_spectrum(x: ad.Var) -> ad.Var:
    _, h, w = x.shape
    ah, bh = _dft_parts(h)
    aw, bw = _dft_parts(w)
    re = ad.sub(
        ad.col_map(aw, ad.row_map(ah, x)), ad.col_map(bw, ad.row_map(bh, x))
    )
    im = ad.add(
        ad.col_map(bw, ad.row_map(ah, x)), ad.col_map(aw, ad.row_map(bh, x))
    )
    mag = ad.sqrt(ad.add(ad.add(ad.square(re), ad.square(im)), ad.const(1e-12)))
    return ad.log(ad.add(ad.const(1.0), mag))


def edge_freq_loss(pred, target, w_edge: float = 1.0, w_freq: float = 1.0) -> ad.Var:
    """L1 between Sobel responses plus L1 between log(1 + |DFT|) spectra."""
    pred = _as_var(pred)
    target = _as_var(target)
    c = pred.shape[0]
    zero = ad.const(np.zeros(c))
    total = ad.const(0.0)
    if w_edge:
        parts = []
        for axis in ("x", "y"):
            w = ad.const(_sobel_weights(c, axis))
            parts.append(
                ad.vmean(ad.absolute(ad.sub(ad.conv3x3(w, zero, pred),
                                            ad.conv3x3(w, zero, target))))
            )
        total = ad.add(total, ad.mul(ad.const(w_edge), ad.add(parts[0], parts[1])))
    if w_freq:
        l1 = ad.vmean(ad.absolute(ad.sub(_log_spectrum(pred), _log_spectrum(target))))
        total = ad.add(total, ad.mul(ad.const(w_freq), l1))
    return total


def total_loss(x_t, x_t1, recon_logits, pred_logits, z_t, w: LossWeights) -> ad.Var:
    """Weighted sum of the objective terms; targets are expected in [0, 1]."""
    recon = ad.sigmoid(_as_var(recon_logits))
    pred = ad.sigmoid(_as_var(pred_logits))
    x_t = _as_var(x_t)
    x_t1 = _as_var(x_t1)

    total = ad.mul(ad.const(w.w_r), ad.mse(recon, x_t))
    total = ad.add(total, ad.mul(ad.const(w.w_p), ad.mse(pred, x_t1)))
    total = ad.add(
        total, ad.mul(ad.const(w.w_v), variance_loss(z_t, w.sigma_target))
    )
    grad_term = ad.add(gradient_loss(recon, x_t), gradient_loss(pred, x_t1))
    total = ad.add(total, ad.mul(ad.const(0.5 * w.w_g), grad_term))
    if w.w_edge or w.w_freq:
        ef = ad.add(
            edge_freq_loss(recon, x_t, w.w_edge, w.w_freq),
            edge_freq_loss(pred, x_t1, w.w_edge, w.w_freq),
        )
        total = ad.add(total, ad.mul(ad.const(0.5), ef))
    return total
