"""Frame/latent codec: patch embedding, stacked integration layers with a
spatial skip, optional activity regularizers, and the upsampling decoder.

The encoder maps C x H x W frames to d x H/4 x W/4 latents; the decoder
returns logits at the original resolution (sigmoid lives in the loss).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from . import autodiff as ad
from . import bio
from . import dynamics

PATCH = 4
GN_GROUPS = 8
GN_EPS = 1e-5


@dataclass
class ResBlockParams:
    conv1_w: Any
    conv1_b: Any
    n1_gamma: Any
    n1_beta: Any
    conv2_w: Any
    conv2_b: Any
    n2_gamma: Any
    n2_beta: Any


@dataclass
class DecoderParams:
    """Weights for the fixed upsampling path:
    1x1 conv -> ResBlock -> x2 + 3x3 conv -> GN + ResBlock
    -> x2 + 3x3 conv (halve channels) -> GN + ResBlock -> 3x3 conv."""

    proj_w: Any   # (mid, d)
    proj_b: Any   # (mid,)
    res1: ResBlockParams
    up1_w: Any    # (mid, mid, 3, 3)
    up1_b: Any
    gn1_gamma: Any
    gn1_beta: Any
    res2: ResBlockParams
    up2_w: Any    # (mid//2, mid, 3, 3)
    up2_b: Any
    gn2_gamma: Any
    gn2_beta: Any
    res3: ResBlockParams
    out_w: Any    # (C, mid//2, 3, 3)
    out_b: Any


@dataclass
class CodecParams:
    patch_w: Any  # (d, C * PATCH * PATCH)
    patch_b: Any  # (d,)
    layers: tuple  # of dynamics.LayerParams
    decoder: DecoderParams
    max_steps: int = 6


def _conv_init(rng, out_ch, in_ch, k):
    bound = 1.0 / np.sqrt(in_ch * k * k)
    w = rng.uniform(-bound, bound, size=(out_ch, in_ch, k, k))
    return w, np.zeros(out_ch)


def _resblock_init(rng, ch) -> ResBlockParams:
    w1, b1 = _conv_init(rng, ch, ch, 3)
    w2, b2 = _conv_init(rng, ch, ch, 3)
    return ResBlockParams(
        conv1_w=w1, conv1_b=b1, n1_gamma=np.ones(ch), n1_beta=np.zeros(ch),
        conv2_w=w2, conv2_b=b2, n2_gamma=np.ones(ch), n2_beta=np.zeros(ch),
    )


def init_codec_params(
    d: int,
    rng: np.random.Generator,
    in_channels: int = 1,
    mid: int = 64,
    dilations: Sequence[int] = (1, 4, 16),
    n_layers: int = 3,
    max_steps: int = 6,
) -> CodecParams:
    if mid % 2 or (mid % GN_GROUPS) or ((mid // 2) % GN_GROUPS):
        raise ValueError("mid channels must keep both stages divisible by %d" % GN_GROUPS)
    fan_in = in_channels * PATCH * PATCH
    bound = 1.0 / np.sqrt(fan_in)
    half = mid // 2
    up1_w, up1_b = _conv_init(rng, mid, mid, 3)
    up2_w, up2_b = _conv_init(rng, half, mid, 3)
    out_w, out_b = _conv_init(rng, in_channels, half, 3)
    decoder = DecoderParams(
        proj_w=rng.uniform(-1.0 / np.sqrt(d), 1.0 / np.sqrt(d), size=(mid, d)),
        proj_b=np.zeros(mid),
        res1=_resblock_init(rng, mid),
        up1_w=up1_w, up1_b=up1_b,
        gn1_gamma=np.ones(mid), gn1_beta=np.zeros(mid),
        res2=_resblock_init(rng, mid),
        up2_w=up2_w, up2_b=up2_b,
        gn2_gamma=np.ones(half), gn2_beta=np.zeros(half),
        res3=_resblock_init(rng, half),
        out_w=out_w, out_b=out_b,
    )
    layers = tuple(
        dynamics.init_layer_params(d, rng, dilations=dilations) for _ in range(n_layers)
    )
    return CodecParams(
        patch_w=rng.uniform(-bound, bound, size=(d, fan_in)),
        patch_b=np.zeros(d),
        layers=layers,
        decoder=decoder,
        max_steps=max_steps,
    )


def _as_var(x) -> ad.Var:
    return x if isinstance(x, ad.Var) else ad.Var(np.asarray(x, dtype=np.float64))


def patch_embed(frame, params: CodecParams):
    """Flatten non-overlapping PATCH x PATCH blocks and map them to d channels."""
    var_in = isinstance(frame, ad.Var)
    frame = _as_var(frame)
    _, h, w = frame.shape
    if h % PATCH or w % PATCH:
        raise ValueError("frame spatial dims must be divisible by %d" % PATCH)
    out = ad.patch_embed(_as_var(params.patch_w), _as_var(params.patch_b), frame, PATCH)
    return out if var_in else out.value


def encode(
    frame,
    params: CodecParams,
    bio_cfg: Optional[bio.BioConfig] = None,
    fatigue: Optional[bio.FatigueState] = None,
    adaptive: bool = False,
    crit: Optional[dynamics.StopCriterion] = None,
):
    """Embed, integrate through the layer stack, add the embedding back,
    then apply enabled regularizers.  Returns (z, fatigue_state)."""
    if isinstance(frame, ad.Var):
        return _encode(frame, params, bio_cfg, fatigue, adaptive, crit)
    with ad.no_grad():
        z, fat = _encode(_as_var(frame), params, bio_cfg, fatigue, adaptive, crit)
    return z.value, fat


def _encode(frame, params, bio_cfg, fatigue, adaptive, crit):
    u0 = ad.patch_embed(
        _as_var(params.patch_w), _as_var(params.patch_b), frame, PATCH
    )
    u = u0
    for layer in params.layers:
        u, _ = dynamics.integrate_layer(
            u, layer, params.max_steps, crit=crit, adaptive=adaptive
        )
    z = ad.add(u, u0)
    if bio_cfg is not None and bio_cfg.inhibition:
        z = bio.lateral_inhibition(z, bio_cfg.beta, bio_cfg.min_factor)
    if bio_cfg is not None and bio_cfg.fatigue:
        if fatigue is None:
            fatigue = bio.fresh_fatigue(z.shape[0])
        z, fatigue = bio.synaptic_fatigue(z, fatigue)
    return z, fatigue


def _resblock(x, rp: ResBlockParams) -> ad.Var:
    h = ad.conv3x3(_as_var(rp.conv1_w), _as_var(rp.conv1_b), x)
    h = ad.group_norm(h, _as_var(rp.n1_gamma), _as_var(rp.n1_beta), GN_GROUPS, GN_EPS)
    h = ad.gelu(h)
    h = ad.conv3x3(_as_var(rp.conv2_w), _as_var(rp.conv2_b), h)
    h = ad.group_norm(h, _as_var(rp.n2_gamma), _as_var(rp.n2_beta), GN_GROUPS, GN_EPS)
    return ad.add(x, h)


def decode(z, params: CodecParams):
    """Latent d x h x w to logits C x 4h x 4w through the fixed stage table."""
    var_in = isinstance(z, ad.Var)
    if var_in:
        return _decode(z, params.decoder)
    with ad.no_grad():
        return _decode(_as_var(z), params.decoder).value


def _decode(z, dec: DecoderParams) -> ad.Var:
    _, h, w = z.shape
    x = ad.channel_linear(_as_var(dec.proj_w), z, _as_var(dec.proj_b))
    x = _resblock(x, dec.res1)

    x = ad.bilinear_resize(x, 2 * h, 2 * w)
    x = ad.conv3x3(_as_var(dec.up1_w), _as_var(dec.up1_b), x)
    x = ad.group_norm(x, _as_var(dec.gn1_gamma), _as_var(dec.gn1_beta), GN_GROUPS, GN_EPS)
    x = _resblock(x, dec.res2)

    x = ad.bilinear_resize(x, 4 * h, 4 * w)
    x = ad.conv3x3(_as_var(dec.up2_w), _as_var(dec.up2_b), x)
    x = ad.group_norm(x, _as_var(dec.gn2_gamma), _as_var(dec.gn2_beta), GN_GROUPS, GN_EPS)
    x = _resblock(x, dec.res3)

    return ad.conv3x3(_as_var(dec.out_w), _as_var(dec.out_b), x)
