"""Persistent spatial latent state: gated write, integration-layer evolve,
interpolated read, and seeded corruption for resilience studies.

The state decays by a learned factor gamma on every write, so stale
content fades while the gate injects the current observation.  Evolution
runs the same reaction-diffusion loop as the encoder and refreshes the
Hebbian buffer once per call.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Optional, Sequence

import numpy as np

from . import autodiff as ad
from . import bio
from . import dynamics
from . import fieldops

GAMMA_MIN = 0.5
GAMMA_MAX = 0.99

CORRUPT_MODES = ("zero_channels", "gaussian_noise", "channel_mask", "spatial_shuffle")


@dataclass
class BeliefParams:
    write_gate: Any           # (d, d)
    write_val: Any            # (d, d)
    gamma_logit: Any          # scalar; gamma = exp, clamped to [0.5, 0.99]
    evolve_params: dynamics.LayerParams
    n_evolve: int = 3
    norm_every: int = 2


# learned leaf fields (evolve_params nests its own)
PARAM_FIELDS = ("write_gate", "write_val", "gamma_logit")


def init_belief_params(
    d: int,
    rng: np.random.Generator,
    dilations: Sequence[int] = (1, 4, 16),
    gamma: float = 0.95,
) -> BeliefParams:
    bound = 1.0 / np.sqrt(d)
    return BeliefParams(
        write_gate=rng.uniform(-bound, bound, size=(d, d)),
        write_val=rng.uniform(-bound, bound, size=(d, d)),
        gamma_logit=np.asarray(np.log(gamma)),
        evolve_params=dynamics.init_layer_params(d, rng, dilations=dilations),
    )


def as_variables(params: BeliefParams) -> BeliefParams:
    wrapped = {
        name: ad.Var(np.asarray(getattr(params, name), dtype=np.float64))
        for name in PARAM_FIELDS
    }
    return replace(
        params, evolve_params=dynamics.as_variables(params.evolve_params), **wrapped
    )


@dataclass
class BeliefState:
    s: Any                    # (d, H_f, W_f) field, Var during training
    fatigue: bio.FatigueState
    hebbian: bio.HebbianMap


def fresh_state(d: int, h: int, w: int) -> BeliefState:
    return BeliefState(
        s=np.zeros((d, h, w)),
        fatigue=bio.fresh_fatigue(d),
        hebbian=bio.fresh_hebbian((d, h, w)),
    )


def _as_var(x) -> ad.Var:
    return x if isinstance(x, ad.Var) else ad.Var(np.asarray(x, dtype=np.float64))


def _any_var(*xs) -> bool:
    return any(isinstance(x, ad.Var) for x in xs)


def write(state: BeliefState, z, params: BeliefParams) -> BeliefState:
    """s' = gamma * s + sigmoid(W_gate z) * tanh(W_val z); no biases."""
    var_mode = _any_var(state.s, z, params.write_gate)
    if var_mode:
        return replace(state, s=_write(state.s, z, params))
    with ad.no_grad():
        return replace(state, s=_write(state.s, z, params).value)


def _write(s, z, params: BeliefParams) -> ad.Var:
    z = _as_var(z)
    gamma = ad.clamp(ad.exp(_as_var(params.gamma_logit)), GAMMA_MIN, GAMMA_MAX)
    gate = ad.sigmoid(ad.channel_linear(_as_var(params.write_gate), z))
    val = ad.tanh(ad.channel_linear(_as_var(params.write_val), z))
    return ad.add(ad.mul(gamma, _as_var(s)), ad.mul(gate, val))


def evolve(
    state: BeliefState,
    params: BeliefParams,
    adaptive: bool = False,
    crit: Optional[dynamics.StopCriterion] = None,
    bio_cfg: Optional[bio.BioConfig] = None,
) -> BeliefState:
    """Run n_evolve integration steps on s (Hebbian-modulated diffusion)
    and refresh the Hebbian buffer once from the resulting field.

    By default the activity regularizers touch only the encoder output;
    passing bio_cfg additionally applies inhibition/fatigue to the evolved
    field here, reusing the fatigue health carried in the state.
    """
    if params.n_evolve == 0:
        return state
    field, _ = dynamics.integrate_layer(
        state.s,
        params.evolve_params,
        params.n_evolve,
        crit=crit,
        adaptive=adaptive,
        hebbian=state.hebbian,
        norm_every=params.norm_every,
    )
    fat = state.fatigue
    if bio_cfg is not None and bio_cfg.inhibition:
        field = bio.lateral_inhibition(field, bio_cfg.beta, bio_cfg.min_factor)
    if bio_cfg is not None and bio_cfg.fatigue:
        field, fat = bio.synaptic_fatigue(field, fat)
    heb = bio.hebbian_update(state.hebbian, field)
    return replace(state, s=field, fatigue=fat, hebbian=heb)


def read(state: BeliefState, out_h: int, out_w: int):
    """Resample the state to the requested resolution."""
    if isinstance(state.s, ad.Var):
        return ad.bilinear_resize(state.s, out_h, out_w)
    return fieldops.bilinear_resize(state.s, out_h, out_w)


def corrupt(
    state: BeliefState,
    mode: str,
    ratio: float,
    intensity: float = 1.0,
    rng_seed: int = 0,
) -> BeliefState:
    """Damage the state field (never the buffers) with a seeded fault.

    zero_channels / channel_mask: zero a random ceil(ratio * d) channel
    subset.  gaussian_noise: add N(0, intensity^2) to a ratio fraction of
    entries.  spatial_shuffle: permute positions within chosen channels.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("ratio must be in [0, 1]")
    if mode not in CORRUPT_MODES:
        raise ValueError("unknown corruption mode: %r" % (mode,))

    s = np.array(state.s if not isinstance(state.s, ad.Var) else state.s.value)
    d = s.shape[0]
    rng = np.random.default_rng(rng_seed)

    if mode in ("zero_channels", "channel_mask"):
        n_pick = int(np.ceil(ratio * d))
        if n_pick:
            chosen = rng.choice(d, size=n_pick, replace=False)
            s[chosen] = 0.0
    elif mode == "gaussian_noise":
        mask = rng.random(s.shape) < ratio
        s = s + mask * rng.normal(0.0, intensity, size=s.shape)
    else:  # spatial_shuffle
        n_pick = int(np.ceil(ratio * d))
        if n_pick:
            chosen = rng.choice(d, size=n_pick, replace=False)
            flat = s.reshape(d, -1)
            for c in chosen:
                flat[c] = flat[c][rng.permutation(flat.shape[1])]
            s = flat.reshape(s.shape)
    return replace(state, s=s)
