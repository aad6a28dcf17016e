"""Reaction-diffusion field layer: Euler integration with memory terms,
periodic normalization, and adaptive early stopping.

One layer repeatedly applies

    u <- u + dt * (sum_k D_k * laplacian(u, dil_k) + R(u)
                   + alpha_g * h_g + alpha_l * h_l)

where R is a position-wise MLP, h_g is a channel-vector memory accumulated
from the spatial mean, and h_l is a coarse spatial memory kept at 4x4
resolution and bilinearly upsampled on injection.  Every ``norm_every``-th
step the field is RMS-normalized.  In eval mode the loop exits early once a
low-resolution probe of the field stops changing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from . import fieldops

DT_MIN = 0.005
DT_MAX = 0.35
LOCAL_MEM_SIZE = 4


def _as_var(x) -> ad.Var:
    if isinstance(x, ad.Var):
        return x
    return ad.Var(np.asarray(x, dtype=np.float64))


@dataclass
class LayerParams:
    """Parameters of one integration layer for latent dimension d.

    Fields hold float64 arrays, or autodiff variables during training;
    gradients flow only through variable-typed fields.  ``dilations`` is
    structural, not learned, and must match the rows of diffusion_logits.
    """

    diffusion_logits: Any  # (K, d); D_k = softplus(row k)
    reaction_w1: Any       # (2d, d)
    reaction_b1: Any       # (2d,)
    reaction_w2: Any       # (d, 2d)
    reaction_b2: Any       # (d,)
    gmem_gate: Any         # (d, d)
    gmem_val: Any          # (d, d)
    lmem_gate: Any         # (d, d)
    lmem_val: Any          # (d, d)
    alpha_g_logit: Any     # scalar; alpha_g = softplus
    alpha_l_logit: Any     # scalar; alpha_l = softplus
    dt_logit: Any          # scalar; dt = exp, clamped to [DT_MIN, DT_MAX]
    norm_gains: Any        # (d,)
    dilations: tuple = (1, 4, 16)


# learned fields in a stable order, used for flattening and lifting
PARAM_FIELDS = (
    "diffusion_logits",
    "reaction_w1",
    "reaction_b1",
    "reaction_w2",
    "reaction_b2",
    "gmem_gate",
    "gmem_val",
    "lmem_gate",
    "lmem_val",
    "alpha_g_logit",
    "alpha_l_logit",
    "dt_logit",
    "norm_gains",
)


def as_variables(params: LayerParams) -> LayerParams:
    """Wrap every learned field in an autodiff variable."""
    wrapped = {name: _as_var(getattr(params, name)) for name in PARAM_FIELDS}
    return replace(params, **wrapped)


def init_layer_params(
    d: int,
    rng: np.random.Generator,
    dilations: Sequence[int] = (1, 4, 16),
    diffusion: float = 0.25,
    dt: float = 0.1,
    memory_gain: float = 0.1,
) -> LayerParams:
    """Fresh parameters: matrices uniform in +-1/sqrt(fan_in), biases zero,
    logits chosen so the effective D, alpha, dt start at the given values."""

    def mat(rows, cols):
        bound = 1.0 / np.sqrt(cols)
        return rng.uniform(-bound, bound, size=(rows, cols))

    k = len(dilations)
    return LayerParams(
        diffusion_logits=np.full((k, d), fieldops.softplus_inverse(diffusion)),
        reaction_w1=mat(2 * d, d),
        reaction_b1=np.zeros(2 * d),
        reaction_w2=mat(d, 2 * d),
        reaction_b2=np.zeros(d),
        gmem_gate=mat(d, d),
        gmem_val=mat(d, d),
        lmem_gate=mat(d, d),
        lmem_val=mat(d, d),
        alpha_g_logit=np.asarray(fieldops.softplus_inverse(memory_gain)),
        alpha_l_logit=np.asarray(fieldops.softplus_inverse(memory_gain)),
        dt_logit=np.asarray(np.log(dt)),
        norm_gains=np.ones(d),
        dilations=tuple(dilations),
    )


def pure_diffusion_params(
    d: int,
    diffusion=0.25,
    dt: float = 0.1,
    dilations: Sequence[int] = (1,),
) -> LayerParams:
    """Parameters with zero reaction and memory weights: the update reduces
    to u + dt * D * laplacian(u).  ``diffusion`` may be a scalar or one
    value per dilation."""
    k = len(dilations)
    diff = np.broadcast_to(np.asarray(diffusion, dtype=np.float64), (k,))
    logits = np.repeat(fieldops.softplus_inverse(diff)[:, None], d, axis=1)
    return LayerParams(
        diffusion_logits=logits,
        reaction_w1=np.zeros((2 * d, d)),
        reaction_b1=np.zeros(2 * d),
        reaction_w2=np.zeros((d, 2 * d)),
        reaction_b2=np.zeros(d),
        gmem_gate=np.zeros((d, d)),
        gmem_val=np.zeros((d, d)),
        lmem_gate=np.zeros((d, d)),
        lmem_val=np.zeros((d, d)),
        alpha_g_logit=np.asarray(-40.0),
        alpha_l_logit=np.asarray(-40.0),
        dt_logit=np.asarray(np.log(dt)),
        norm_gains=np.ones(d),
        dilations=tuple(dilations),
    )


@dataclass
class StopCriterion:
    """Early-exit rule on the relative L1 change of a pooled probe."""

    epsilon: float = 0.08
    patience: int = 2
    probe_h: int = 8
    probe_w: int = 8
    eps_prime: float = 1e-6


@dataclass
class LayerDiagnostics:
    steps_used: int
    turbulence_per_step: list  # mean |delta u| after each completed step
    energy_per_step: list      # sum u^2 after each completed step


# ---------------------------------------------------------------------------
# single-step pieces


def reaction(u, params: LayerParams) -> ad.Var:
    """Position-wise MLP w2 @ gelu(w1 @ u + b1) + b2; no spatial mixing."""
    u = _as_var(u)
    hidden = ad.gelu(
        ad.channel_linear(_as_var(params.reaction_w1), u, _as_var(params.reaction_b1))
    )
    return ad.channel_linear(
        _as_var(params.reaction_w2), hidden, _as_var(params.reaction_b2)
    )


def _gated_increment(gate_w, val_w, z: ad.Var) -> ad.Var:
    gate = ad.sigmoid(ad.channel_linear(_as_var(gate_w), z))
    val = ad.tanh(ad.channel_linear(_as_var(val_w), z))
    return ad.mul(gate, val)


def update_global_memory(h_g, u_bar, params: LayerParams) -> ad.Var:
    """h_g + sigmoid(W_gate u_bar) * tanh(W_val u_bar)."""
    return ad.add(
        _as_var(h_g), _gated_increment(params.gmem_gate, params.gmem_val, _as_var(u_bar))
    )


def update_local_memory(h_l, u, params: LayerParams) -> ad.Var:
    """Same gated recurrence applied per cell of the 4x4-pooled field."""
    u = _as_var(u)
    _, h, w = u.shape
    pooled = ad.avg_pool(u, min(LOCAL_MEM_SIZE, h), min(LOCAL_MEM_SIZE, w))
    return ad.add(
        _as_var(h_l), _gated_increment(params.lmem_gate, params.lmem_val, pooled)
    )


def pde_step(
    u,
    params: LayerParams,
    h_g,
    h_l,
    hebbian: Optional[np.ndarray] = None,
    hebbian_gain: float = 0.5,
) -> ad.Var:
    """One Euler update of the field.  ``hebbian``, when given, is a
    non-negative d x H x W map scaling diffusion as D * (1 + gain * map);
    it is a buffer, so no gradient flows through it."""
    u = _as_var(u)
    _, h, w = u.shape
    logits = _as_var(params.diffusion_logits)
    if logits.shape[0] != len(params.dilations):
        raise ValueError("diffusion_logits rows must match dilations")

    total = reaction(u, params)
    scale = None
    if hebbian is not None:
        scale = ad.const(1.0 + hebbian_gain * np.asarray(hebbian, dtype=np.float64))
    for k, dil in enumerate(params.dilations):
        d_k = ad.softplus(ad.take_row(logits, k))
        term = ad.mul(ad.expand_chan(d_k, h, w), ad.laplacian(u, dil))
        if scale is not None:
            term = ad.mul(term, scale)
        total = ad.add(total, term)

    alpha_g = ad.softplus(_as_var(params.alpha_g_logit))
    alpha_l = ad.softplus(_as_var(params.alpha_l_logit))
    total = ad.add(total, ad.mul(alpha_g, ad.expand_chan(_as_var(h_g), h, w)))
    total = ad.add(total, ad.mul(alpha_l, ad.bilinear_resize(_as_var(h_l), h, w)))

    dt = ad.clamp(ad.exp(_as_var(params.dt_logit)), DT_MIN, DT_MAX)
    return ad.add(u, ad.mul(dt, total))


def should_stop(probe_prev: np.ndarray, probe_curr: np.ndarray, crit: StopCriterion) -> bool:
    """Relative L1 change of the probe below epsilon."""
    num = float(np.abs(probe_curr - probe_prev).sum())
    den = float(np.abs(probe_prev).sum()) + crit.eps_prime
    return num / den < crit.epsilon


# ---------------------------------------------------------------------------
# full loop


def integrate_layer(
    u0,
    params: LayerParams,
    max_steps: int,
    crit: Optional[StopCriterion] = None,
    adaptive: bool = False,
    hebbian=None,
    norm_every: int = 2,
    on_step: Optional[Callable[[int, np.ndarray], None]] = None,
):
    """Run the integration loop and return (field, LayerDiagnostics).

    An ndarray input runs without recording gradients and returns an
    ndarray; a Var input stays on the tape (pass parameters wrapped via
    as_variables to train through the loop).  Memories start at zero on
    every call.  ``norm_every=0`` disables normalization.  ``on_step`` is
    called with (step, field values) after each completed step.  Early
    exit needs ``adaptive=True`` and ``crit.patience`` consecutive
    satisfied probe comparisons.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    if crit is None:
        crit = StopCriterion()
    if isinstance(u0, ad.Var):
        return _integrate(u0, params, max_steps, crit, adaptive, hebbian, norm_every, on_step)
    with ad.no_grad():
        out, diag = _integrate(
            _as_var(u0), params, max_steps, crit, adaptive, hebbian, norm_every, on_step
        )
    return out.value, diag


def _integrate(u, params, max_steps, crit, adaptive, hebbian, norm_every, on_step):
    c, h, w = u.shape
    heb_map = None
    heb_gain = 0.5
    if hebbian is not None:
        if hasattr(hebbian, "map"):
            heb_map = np.asarray(hebbian.map, dtype=np.float64)
            heb_gain = float(hebbian.gain)
        else:
            heb_map = np.asarray(hebbian, dtype=np.float64)

    h_g = ad.const(np.zeros(c))
    h_l = ad.const(np.zeros((c, min(LOCAL_MEM_SIZE, h), min(LOCAL_MEM_SIZE, w))))
    gains = _as_var(params.norm_gains)

    ph, pw = min(crit.probe_h, h), min(crit.probe_w, w)
    probe_prev = fieldops.avg_pool(u.value, ph, pw)
    hits = 0

    turbulence: list = []
    energies: list = []
    steps_used = max_steps

    for tau in range(1, max_steps + 1):
        u_bar = ad.spatial_mean(u)
        h_g = update_global_memory(h_g, u_bar, params)
        h_l = update_local_memory(h_l, u, params)
        prev_val = u.value
        u = pde_step(u, params, h_g, h_l, hebbian=heb_map, hebbian_gain=heb_gain)
        if norm_every and tau % norm_every == 0:
            u = ad.rms_norm(u, gains)

        turbulence.append(float(np.abs(u.value - prev_val).mean()))
        energies.append(fieldops.energy(u.value))
        if on_step is not None:
            on_step(tau, u.value)

        if adaptive:
            probe_curr = fieldops.avg_pool(u.value, ph, pw)
            hits = hits + 1 if should_stop(probe_prev, probe_curr, crit) else 0
            probe_prev = probe_curr
            if hits >= crit.patience:
                steps_used = tau
                break

    return u, LayerDiagnostics(steps_used, turbulence, energies)
