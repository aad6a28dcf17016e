"""Autoregressive rollouts and the recovery statistics computed on their
SSIM trajectories.

A rollout seeds the belief with one observed frame and then feeds each
prediction back in as the next input.  Recovery statistics quantify the
non-monotone SSIM behavior: a dip followed by a measurable rebound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .. import belief
from .. import bio
from .. import codec
from .. import fieldops
from .. import model as model_mod
from . import metrics


@dataclass
class RolloutTrace:
    frames: List[np.ndarray] = field(default_factory=list)
    ssim_per_step: List[float] = field(default_factory=list)
    mse_per_step: List[float] = field(default_factory=list)


def rollout(
    mdl: model_mod.ModelParams,
    init_frame: np.ndarray,
    horizon: int,
    truth: Optional[np.ndarray] = None,
    bio_cfg: Optional[bio.BioConfig] = None,
    adaptive: bool = True,
    state: Optional[belief.BeliefState] = None,
) -> RolloutTrace:
    """Predict `horizon` frames from a single observation.

    Each step evolves the belief, decodes a frame through the sigmoid,
    records it, then encodes that prediction back into the belief.  When
    `truth` frames are provided, SSIM and MSE are recorded per step.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    init_frame = np.asarray(init_frame, dtype=np.float64)
    if state is None:
        state = model_mod.fresh_belief_for(mdl, init_frame.shape)

    trace = RolloutTrace()
    if horizon == 0:
        return trace

    z, fat = codec.encode(init_frame, mdl.codec, bio_cfg=bio_cfg,
                          fatigue=state.fatigue, adaptive=adaptive)
    state = belief.BeliefState(s=state.s, fatigue=fat, hebbian=state.hebbian)
    state = belief.write(state, z, mdl.belief)

    for step in range(horizon):
        state = belief.evolve(state, mdl.belief, adaptive=adaptive)
        d, hf, wf = np.asarray(state.s).shape
        latent = belief.read(state, hf, wf)
        frame = fieldops.sigmoid(codec.decode(latent, mdl.codec))
        trace.frames.append(frame)
        if truth is not None:
            trace.ssim_per_step.append(metrics.ssim(frame, truth[step]))
            trace.mse_per_step.append(float(np.mean((frame - truth[step]) ** 2)))

        z, fat = codec.encode(frame, mdl.codec, bio_cfg=bio_cfg,
                              fatigue=state.fatigue, adaptive=adaptive)
        state = belief.BeliefState(s=state.s, fatigue=fat, hebbian=state.hebbian)
        state = belief.write(state, z, mdl.belief)
    return trace


def curve_recovery(curve: Sequence[float]):
    """Per-curve recovery: (min step, max-after-min minus min).

    The magnitude is 0 when the minimum sits at the end of the curve.
    """
    c = np.asarray(curve, dtype=np.float64)
    if c.size < 3:
        raise ValueError("curves need at least 3 steps")
    i_min = int(np.argmin(c))
    tail = c[i_min + 1 :]
    magnitude = float(tail.max() - c[i_min]) if tail.size else 0.0
    return i_min, magnitude


def aggregate_magnitudes(mags: Sequence[float], threshold: float = 0.01) -> dict:
    """Fraction above threshold, mean, sample std, one-sample t, Cohen's d.

    t and d are defined as 0 when the sample has no spread (or n < 2).
    """
    m = np.asarray(mags, dtype=np.float64)
    n = m.size
    mean = float(m.mean()) if n else 0.0
    std = float(m.std(ddof=1)) if n > 1 else 0.0
    if std > 0.0:
        t = mean / (std / np.sqrt(n))
        d = mean / std
    else:
        t = 0.0
        d = 0.0
    return {
        "n": int(n),
        "fraction": float(np.mean(m > threshold)) if n else 0.0,
        "mean": mean,
        "std": std,
        "t": float(t),
        "cohens_d": float(d),
    }


def recovery_stats(curves: Sequence[Sequence[float]], threshold: float = 0.01) -> dict:
    """Recovery report over a set of per-rollout SSIM curves."""
    rows = []
    mags = []
    for curve in curves:
        i_min, mag = curve_recovery(curve)
        rows.append({"min_step": i_min, "magnitude": mag})
        mags.append(mag)
    report = aggregate_magnitudes(mags, threshold)
    report["curves"] = rows
    return report


def fit_exp_null(ssim_curve: Sequence[float], fit_steps: int = 5):
    """Fit a*exp(-b*t) on steps 1..fit_steps by log-linear least squares.

    Returns (a, b, null_curve) with the null curve evaluated at every
    step index of the input.
    """
    y = np.asarray(ssim_curve, dtype=np.float64)
    if y.size < fit_steps + 1:
        raise ValueError("curve shorter than the fit range")
    t = np.arange(1, fit_steps + 1, dtype=np.float64)
    seg = y[1 : fit_steps + 1]
    if np.any(seg <= 0.0):
        raise ValueError("log fit requires positive values on the fit range")
    slope, intercept = np.polyfit(t, np.log(seg), 1)
    a = float(np.exp(intercept))
    b = float(-slope)
    steps = np.arange(y.size, dtype=np.float64)
    return a, b, a * np.exp(-b * steps)
