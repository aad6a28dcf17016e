"""Training driver: window forward pass with a carried belief state,
clipped AdamW with warmup+cosine schedule, finite-difference gradient
checking, and versioned binary checkpoints.

A window of T+1 frames produces T per-frame losses that are averaged into
one scalar; gradients flow through every integration step in the window
and one optimizer step follows.  The belief state crosses window
boundaries by value only.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from . import belief
from . import bio
from . import losses
from . import model as model_mod

CKPT_MAGIC = b"FWCK"
CKPT_VERSION = 1


@dataclass
class OptimState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 3e-4
    weight_decay: float = 0.04
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    warmup: int = 500
    horizon: int = 8000
    clip_norm: float = 1.0


def init_optim(n_params: int, horizon: int = 8000, **kw) -> OptimState:
    return OptimState(m=np.zeros(n_params), v=np.zeros(n_params), horizon=horizon, **kw)


def lr_at(step: int, state: OptimState) -> float:
    """Linear warmup to lr over [0, warmup), then cosine to 0 at horizon."""
    if step < state.warmup:
        return state.lr * step / max(1, state.warmup)
    span = max(1, state.horizon - state.warmup)
    progress = min(1.0, (step - state.warmup) / span)
    return state.lr * 0.5 * (1.0 + np.cos(np.pi * progress))


def optimizer_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: OptimState,
    lr: Optional[float] = None,
):
    """One AdamW update: global-norm clip, bias-corrected moments, then
    decoupled weight decay.  Mutates state; returns (new_params, state)."""
    g = np.asarray(grads, dtype=np.float64)
    gnorm = float(np.linalg.norm(g))
    if state.clip_norm and gnorm > state.clip_norm:
        g = g * (state.clip_norm / gnorm)

    t = state.step + 1
    if lr is None:
        lr = lr_at(t, state)
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1 ** t)
    v_hat = state.v / (1.0 - state.beta2 ** t)

    new = params - lr * state.weight_decay * params
    new = new - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    state.step = t
    return new, state


# ---------------------------------------------------------------------------
# window forward


def window_forward(
    model: model_mod.ModelParams,
    frames: np.ndarray,
    state: Optional[belief.BeliefState] = None,
    weights: Optional[losses.LossWeights] = None,
    bio_cfg: Optional[bio.BioConfig] = None,
):
    """Run encode/write/evolve/predict over a (T+1, C, H, W) window and
    average the T per-frame losses.  Returns (loss Var, final state).

    Model leaves may be plain arrays (evaluation) or Vars (training); the
    frames themselves are constants.
    """
    if weights is None:
        weights = losses.LossWeights()
    if frames.ndim != 4 or frames.shape[0] < 2:
        raise ValueError("frames must be (T+1, C, H, W) with T >= 1")
    if state is None:
        state = model_mod.fresh_belief_for(model, frames.shape[1:])

    t_steps = frames.shape[0] - 1
    total = None
    for t in range(t_steps):
        x_t = frames[t]
        z, recon, pred, state = model_mod.step_frame(
            model, state, ad.Var(x_t), bio_cfg=bio_cfg
        )
        loss_t = losses.total_loss(x_t, frames[t + 1], recon, pred, z, weights)
        total = loss_t if total is None else ad.add(total, loss_t)
    return ad.mul(total, ad.const(1.0 / t_steps)), state


def train_window(
    mdl: model_mod.ModelParams,
    frames: np.ndarray,
    optim: OptimState,
    state: Optional[belief.BeliefState] = None,
    weights: Optional[losses.LossWeights] = None,
    bio_cfg: Optional[bio.BioConfig] = None,
):
    """One TBPTT window: forward, backward, optimizer step.

    Returns (new model, optim, detached state, metrics dict).  Raises
    FloatingPointError naming the first offending parameter if any
    gradient is not finite.
    """
    mvars = model_mod.as_variables(mdl)
    loss_var, new_state = window_forward(mvars, frames, state, weights, bio_cfg)
    ad.backward(loss_var)

    vec, index = model_mod.flatten(mdl)
    gvec = model_mod.grad_vector(mvars)
    bad = np.flatnonzero(~np.isfinite(gvec))
    if bad.size:
        i = int(bad[0])
        raise FloatingPointError(
            "non-finite gradient at parameter index %d (%s)"
            % (i, model_mod.path_of_index(index, i))
        )

    new_vec, optim = optimizer_step(vec, gvec, optim)
    new_model = model_mod.unflatten(mdl, new_vec)
    metrics = {
        "loss": float(loss_var.value),
        "grad_norm": float(np.linalg.norm(gvec)),
        "lr": lr_at(optim.step, optim),
        "step": optim.step,
    }
    return new_model, optim, model_mod.detach_state(new_state), metrics


def train_batch(
    mdl: model_mod.ModelParams,
    batch_frames: np.ndarray,
    optim: OptimState,
    states: Optional[list] = None,
    weights: Optional[losses.LossWeights] = None,
    bio_cfg: Optional[bio.BioConfig] = None,
):
    """One optimizer step over a batch of windows shaped (B, T+1, C, H, W).

    Each window carries its own belief state and tape; gradient vectors
    are accumulated in batch order so replays are bitwise identical.
    Returns (new model, optim, detached states, metrics).
    """
    arr = np.asarray(batch_frames, dtype=np.float64)
    if arr.ndim != 5 or arr.shape[0] < 1:
        raise ValueError("batch must be (B, T+1, C, H, W) with B >= 1")
    b = arr.shape[0]
    if states is None:
        states = [None] * b
    if len(states) != b:
        raise ValueError("need one belief state per window")

    vec, index = model_mod.flatten(mdl)
    gsum = np.zeros_like(vec)
    loss_sum = 0.0
    new_states = []
    for i in range(b):
        mvars = model_mod.as_variables(mdl)
        loss_var, st = window_forward(mvars, arr[i], states[i], weights, bio_cfg)
        ad.backward(loss_var)
        gvec = model_mod.grad_vector(mvars)
        bad = np.flatnonzero(~np.isfinite(gvec))
        if bad.size:
            j = int(bad[0])
            raise FloatingPointError(
                "non-finite gradient in window %d at parameter index %d (%s)"
                % (i, j, model_mod.path_of_index(index, j))
            )
        gsum += gvec
        loss_sum += float(loss_var.value)
        new_states.append(model_mod.detach_state(st))

    gavg = gsum / b
    new_vec, optim = optimizer_step(vec, gavg, optim)
    metrics = {
        "loss": loss_sum / b,
        "grad_norm": float(np.linalg.norm(gavg)),
        "lr": lr_at(optim.step, optim),
        "step": optim.step,
    }
    return model_mod.unflatten(mdl, new_vec), optim, new_states, metrics


# ---------------------------------------------------------------------------
# gradient verification


def check_gradients(
    mdl: model_mod.ModelParams,
    frames: np.ndarray,
    indices=None,
    h: float = 1e-5,
    n_random: int = 100,
    seed: int = 0,
    weights: Optional[losses.LossWeights] = None,
    bio_cfg: Optional[bio.BioConfig] = None,
    tol: float = 1e-4,
):
    """Compare analytic window-loss gradients against central differences.

    Fatigue and Hebbian buffers are running statistics held outside the
    gradient tape, so the check runs them inert (zero adaptation rates);
    perturbed forwards then see the exact function the tape differentiates.

    Returns a report dict with per-index rows (index, path, analytic,
    numeric, rel_err) and an overall pass flag (all rel_err < tol).
    """
    vec, index = model_mod.flatten(mdl)
    if indices is None:
        rng = np.random.default_rng(seed)
        indices = np.sort(rng.choice(vec.size, size=min(n_random, vec.size), replace=False))

    def inert_state():
        st = model_mod.fresh_belief_for(mdl, frames.shape[1:])
        return dataclasses.replace(
            st,
            fatigue=dataclasses.replace(st.fatigue, kappa=0.0, rho=0.0),
            hebbian=dataclasses.replace(st.hebbian, rate=0.0),
        )

    mvars = model_mod.as_variables(mdl)
    loss_var, _ = window_forward(mvars, frames, inert_state(), weights, bio_cfg)
    ad.backward(loss_var)
    analytic_vec = model_mod.grad_vector(mvars)

    def loss_at(v):
        candidate = model_mod.unflatten(mdl, v)
        with ad.no_grad():
            loss, _ = window_forward(candidate, frames, inert_state(), weights, bio_cfg)
        return float(loss.value)

    rows = []
    for i in indices:
        i = int(i)
        vp = vec.copy()
        vm = vec.copy()
        vp[i] += h
        vm[i] -= h
        numeric = (loss_at(vp) - loss_at(vm)) / (2.0 * h)
        analytic = float(analytic_vec[i])
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        rows.append(
            {
                "index": i,
                "path": model_mod.path_of_index(index, i),
                "analytic": analytic,
                "numeric": numeric,
                "rel_err": rel,
            }
        )
    max_rel = max(r["rel_err"] for r in rows) if rows else 0.0
    return {"rows": rows, "max_rel_err": max_rel, "passed": bool(max_rel < tol)}


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, mdl: model_mod.ModelParams, optim: OptimState, metadata=None):
    """Binary layout: magic, u32 version, u32 json length, json header,
    then params + first moment + second moment as little-endian float64."""
    vec, _ = model_mod.flatten(mdl)
    header = {
        "n_params": int(vec.size),
        "step": int(optim.step),
        "lr": optim.lr,
        "weight_decay": optim.weight_decay,
        "beta1": optim.beta1,
        "beta2": optim.beta2,
        "eps": optim.eps,
        "warmup": int(optim.warmup),
        "horizon": int(optim.horizon),
        "clip_norm": optim.clip_norm,
        "extra": metadata or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<I", CKPT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(vec.astype("<f8").tobytes())
        fh.write(optim.m.astype("<f8").tobytes())
        fh.write(optim.v.astype("<f8").tobytes())


def peek_metadata(path) -> dict:
    """Read a checkpoint's metadata block without its parameter payload."""
    with open(path, "rb") as fh:
        head = fh.read(12)
        if head[:4] != CKPT_MAGIC:
            raise ValueError("not a checkpoint file (bad magic)")
        (version,) = struct.unpack_from("<I", head, 4)
        if version != CKPT_VERSION:
            raise ValueError("unsupported checkpoint version %d" % version)
        (jlen,) = struct.unpack_from("<I", head, 8)
        blob = fh.read(jlen)
    if len(blob) < jlen:
        raise ValueError("checkpoint header truncated")
    return json.loads(blob.decode("utf-8"))["extra"]


def load_checkpoint(path, template: model_mod.ModelParams):
    """Restore (model, OptimState, metadata) from a checkpoint file."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CKPT_MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CKPT_VERSION:
        raise ValueError("unsupported checkpoint version %d" % version)
    (jlen,) = struct.unpack_from("<I", data, 8)
    header = json.loads(data[12 : 12 + jlen].decode("utf-8"))
    n = header["n_params"]

    tvec, _ = model_mod.flatten(template)
    if n != tvec.size:
        raise ValueError(
            "checkpoint has %d parameters, template has %d" % (n, tvec.size)
        )
    body = data[12 + jlen :]
    need = 3 * n * 8
    if len(body) != need:
        raise ValueError("checkpoint body truncated (%d != %d bytes)" % (len(body), need))
    vec = np.frombuffer(body[: n * 8], dtype="<f8").astype(np.float64)
    m = np.frombuffer(body[n * 8 : 2 * n * 8], dtype="<f8").astype(np.float64)
    v = np.frombuffer(body[2 * n * 8 :], dtype="<f8").astype(np.float64)

    mdl = model_mod.unflatten(template, vec)
    optim = OptimState(
        m=m,
        v=v,
        step=header["step"],
        lr=header["lr"],
        weight_decay=header["weight_decay"],
        beta1=header["beta1"],
        beta2=header["beta2"],
        eps=header["eps"],
        warmup=header["warmup"],
        horizon=header["horizon"],
        clip_norm=header["clip_norm"],
    )
    return mdl, optim, header["extra"]
