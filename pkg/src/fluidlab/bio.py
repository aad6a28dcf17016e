"""Activity-dependent field regularizers: lateral inhibition, synaptic
fatigue, and a Hebbian map that locally boosts diffusion.

Inhibition is differentiable and sits inside the training graph.  Fatigue
health and the Hebbian map are buffers: their updates are computed from
field values and no gradient flows through them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from . import fieldops

MAG_GUARD = 1e-6  # denominator guard for the per-position channel maximum


@dataclass
class BioConfig:
    """Which regularizers the encoder applies, and inhibition strength."""

    inhibition: bool = True
    fatigue: bool = True
    hebbian: bool = True
    beta: float = 0.3
    min_factor: float = 0.2


@dataclass
class FatigueState:
    """Per-channel health in [h_min, 1]; activity drains it, rest restores."""

    health: np.ndarray
    kappa: float = 0.1
    rho: float = 0.02
    h_min: float = 0.1


def fresh_fatigue(d: int) -> FatigueState:
    return FatigueState(health=np.ones(d))


@dataclass
class HebbianMap:
    """Non-negative co-activation trace; 1 + gain * map scales diffusion."""

    map: np.ndarray
    decay: float = 0.99
    rate: float = 0.01
    gain: float = 0.5


def fresh_hebbian(shape) -> HebbianMap:
    return HebbianMap(map=np.zeros(shape))


def _values(field) -> np.ndarray:
    if isinstance(field, ad.Var):
        return field.value
    return np.asarray(field, dtype=np.float64)


def lateral_inhibition(field, beta: float = 0.3, min_factor: float = 0.2):
    """Scale each channel by max(min_factor, 1 - beta * (1 - |z_c| / max_c |z_c|)).

    The channel with the largest magnitude at a position keeps factor ~1,
    weaker channels shrink toward 1 - beta.  Differentiable; ndarray in,
    ndarray out.
    """
    if isinstance(field, ad.Var):
        return _inhibit(field, beta, min_factor)
    with ad.no_grad():
        return _inhibit(ad.Var(_values(field)), beta, min_factor).value


def _inhibit(z: ad.Var, beta: float, min_factor: float) -> ad.Var:
    mag = ad.absolute(z)
    peak = ad.add(ad.amax_channels(mag), ad.const(MAG_GUARD))
    ratio = ad.div(mag, peak)
    raw = ad.add(ad.const(1.0 - beta), ad.mul(ad.const(beta), ratio))
    # max(min_factor, raw) built from relu so the subgradient rules apply
    factor = ad.add(ad.const(min_factor), ad.relu(ad.sub(raw, ad.const(min_factor))))
    return ad.mul(z, factor)


def synaptic_fatigue(field, state: FatigueState):
    """Drain health by channel activity and scale the field by it.

    h' = clamp(h - kappa * |mean_c| + rho, h_min, 1); output channel c is
    scaled by h'.  Health is a buffer (treated as constant by autodiff).
    Returns (scaled field, updated state).
    """
    vals = _values(field)
    drive = np.abs(vals.mean(axis=(1, 2)))
    health = np.clip(
        state.health - state.kappa * drive + state.rho, state.h_min, 1.0
    )
    new_state = replace(state, health=health)
    scale = health[:, None, None]
    if isinstance(field, ad.Var):
        return ad.mul(field, ad.const(scale)), new_state
    return vals * scale, new_state


def hebbian_update(state: HebbianMap, u) -> HebbianMap:
    """Decay the map and add clamped local co-activation u * smooth3(u)."""
    vals = _values(u)
    coact = np.maximum(0.0, vals * fieldops.box_smooth3(vals))
    return replace(state, map=state.decay * state.map + state.rate * coact)


def diffusion_multiplier(state: HebbianMap) -> np.ndarray:
    """Elementwise factor 1 + gain * map applied to the diffusion term."""
    return 1.0 + state.gain * state.map


def effective_diffusion(d_per_channel: np.ndarray, state: HebbianMap) -> np.ndarray:
    """Per-position diffusion field D_c * (1 + gain * map)."""
    return np.asarray(d_per_channel)[:, None, None] * diffusion_multiplier(state)
