"""Dynamical-systems experiments on the PDE substrate: phase diagram,
Lyapunov exponents, energy attractors, symmetry breaking, corruption
resilience, and the op-count scaling table.

Everything here runs in plain float arrays with explicit seeds; repeated
calls with the same arguments are bitwise reproducible.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .. import belief
from .. import bio
from .. import dynamics
from .. import fieldops
from .. import parallel
from . import clustering

ENERGY_CAP = 1e30  # stop integrating once energy clearly diverged
GROWTH_THRESHOLD = 1e-3


@dataclass
class PhasePoint:
    D: float
    dt: float
    growth_rate: float
    regime: str  # sub | critical | super


def classify_growth(rate: float) -> str:
    if rate > GROWTH_THRESHOLD:
        return "super"
    if rate < -GROWTH_THRESHOLD:
        return "sub"
    return "critical"


def random_reaction_params(
    d: int,
    seed: int,
    diffusion: float,
    dt: float,
    dilations=(1, 4),
    gain: float = 1.0,
) -> dynamics.LayerParams:
    """A layer with seeded random reaction weights scaled by `gain`; the
    weight draw is independent of (diffusion, dt) so sweep cells share
    one reaction."""
    rng = np.random.default_rng(seed)
    params = dynamics.init_layer_params(d, rng, dilations=dilations,
                                        diffusion=diffusion, dt=dt)
    return dataclasses.replace(
        params,
        reaction_w1=params.reaction_w1 * gain,
        reaction_w2=params.reaction_w2 * gain,
    )


def growth_rate(
    params: dynamics.LayerParams,
    u0: np.ndarray,
    steps: int,
    norm_every: int = 0,
) -> float:
    """ln(E_end / E_start) / steps, stopping early if energy passes the
    divergence cap (the executed step count divides in that case)."""
    e0 = fieldops.energy(u0)
    if e0 == 0.0:
        raise ValueError("initial field has zero energy")
    u = u0
    done = 0
    for k in range(steps):
        u, _ = dynamics.integrate_layer(u, params, 1,
                                        norm_every=0, adaptive=False)
        if norm_every and (k + 1) % norm_every == 0:
            u = fieldops.rms_norm(u, params.norm_gains)
        done = k + 1
        e = fieldops.energy(u)
        if not np.isfinite(e) or e > ENERGY_CAP:
            break
    e_end = fieldops.energy(u)
    if not np.isfinite(e_end) or e_end <= 0.0:
        return np.inf if not np.isfinite(e_end) else -np.inf
    return float(np.log(e_end / e0) / done)


def phase_sweep(
    d_values: Sequence[float],
    dt_values: Sequence[float],
    steps: int = 40,
    seed: int = 0,
    d: int = 4,
    grid=(12, 12),
    gain: float = 1.0,
) -> List[PhasePoint]:
    """Growth-rate classification over the (D, dt) grid, normalization
    off, one shared random reaction and initial field per sweep."""
    h, w = grid
    rng = np.random.default_rng(seed + 1)
    u0 = rng.normal(size=(d, h, w))

    def cell_fn(cell, _cell_seed):
        # cells share one reaction and field; the per-cell seed is unused
        dv, dtv = cell
        params = random_reaction_params(d, seed, float(dv), float(dtv), gain=gain)
        rate = growth_rate(params, u0, steps, norm_every=0)
        return PhasePoint(float(dv), float(dtv), rate, classify_growth(rate))

    cells = [(dv, dtv) for dv in d_values for dtv in dt_values]
    return parallel.run_cells(cell_fn, cells, base_seed=seed)


def benettin(
    step_fn: Callable[[np.ndarray], np.ndarray],
    u0: np.ndarray,
    steps: int,
    delta0: float = 1e-6,
    transient: int = 10,
    seed: int = 0,
):
    """Largest-Lyapunov estimate: co-integrate a base and a perturbed
    trajectory, log the per-step stretch, renormalize the separation to
    delta0 each step, and average the increments after the transient."""
    if steps <= transient:
        raise ValueError("steps must exceed the transient")
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=u0.shape)
    direction /= np.linalg.norm(direction)
    u = np.array(u0, dtype=np.float64)
    v = u + delta0 * direction

    increments = []
    for t in range(steps):
        u = step_fn(u)
        v = step_fn(v)
        diff = v - u
        dist = float(np.linalg.norm(diff))
        if dist == 0.0:
            increments.append(-np.inf)
            v = u + delta0 * direction
            continue
        increments.append(np.log(dist / delta0))
        v = u + diff * (delta0 / dist)
    tail = np.asarray(increments[transient:])
    return float(tail.mean()), float(tail.std())


def lyapunov(
    params: dynamics.LayerParams,
    seed: int = 0,
    steps: int = 200,
    delta0: float = 1e-6,
    grid=(16, 16),
    transient: int = 10,
):
    """Benettin estimate over the memoryless PDE map (zero memories each
    application, normalization on its usual every-2-steps cadence)."""
    d = params.diffusion_logits.shape[1]
    h, w = grid
    rng = np.random.default_rng(seed)
    u0 = rng.normal(size=(d, h, w))
    gains = params.norm_gains

    # benettin calls step_fn twice per step (base leg then perturbed leg),
    # so the every-2nd-step normalization keys off the call count // 2
    calls = {"n": 0}

    def step_fn(u):
        out, _ = dynamics.integrate_layer(u, params, 1, norm_every=0, adaptive=False)
        if (calls["n"] // 2) % 2 == 1:
            out = fieldops.rms_norm(out, gains)
        calls["n"] += 1
        return out

    return benettin(step_fn, u0, steps, delta0=delta0, transient=transient, seed=seed + 1)


def energy_experiment(
    init: str,
    params: dynamics.LayerParams,
    steps: int,
    norm_enabled: bool,
    grid=(16, 16),
    seed: int = 0,
    d: Optional[int] = None,
) -> np.ndarray:
    """Energy trajectory (length steps+1, index 0 is the initial field)
    under the layer dynamics with normalization toggled."""
    if d is None:
        d = params.diffusion_logits.shape[1]
    h, w = grid
    if init == "uniform":
        u0 = np.ones((d, h, w))
    elif init == "random":
        u0 = np.random.default_rng(seed).normal(size=(d, h, w))
    elif init == "gradient":
        ramp = np.linspace(-1.0, 1.0, w)
        u0 = np.broadcast_to(ramp, (d, h, w)).copy()
    else:
        raise ValueError("init must be one of uniform | random | gradient")
    # unit-RMS start so trajectories from different inits are comparable
    rms = np.sqrt(np.mean(u0 * u0))
    if rms > 0:
        u0 = u0 / rms

    _, diag = dynamics.integrate_layer(
        u0, params, steps, norm_every=2 if norm_enabled else 0, adaptive=False
    )
    return np.concatenate([[fieldops.energy(u0)], diag.energy_per_step])


# Quadrants whose standard deviation is below this fraction of their mean
# magnitude carry no structure to correlate; Pearson is 0/0 on them.
SYMMETRY_FLAT_RTOL = 1e-3


def symmetry_index(u: np.ndarray) -> float:
    """Mean pairwise Pearson correlation of the four channel-averaged
    quadrants, flattened.

    Structureless quadrants (relative std below SYMMETRY_FLAT_RTOL) are
    extended by convention: two flat quadrants are indistinguishable and
    score 1.0, a flat/structured pair scores 0.0.  This keeps the index
    defined at 1.0 on constant fields, where literal Pearson is 0/0.
    """
    m = np.asarray(u, dtype=np.float64).mean(axis=0)
    h, w = m.shape
    qs = [
        m[: h // 2, : w // 2].ravel(),
        m[: h // 2, w - w // 2 :].ravel(),
        m[h - h // 2 :, : w // 2].ravel(),
        m[h - h // 2 :, w - w // 2 :].ravel(),
    ]
    stds = [float(q.std()) for q in qs]
    flat = [
        s <= SYMMETRY_FLAT_RTOL * (abs(float(q.mean())) + 1e-12)
        for q, s in zip(qs, stds)
    ]
    sims = []
    for i in range(4):
        for j in range(i + 1, 4):
            if flat[i] and flat[j]:
                sims.append(1.0)
            elif flat[i] or flat[j]:
                sims.append(0.0)
            else:
                ci = qs[i] - qs[i].mean()
                cj = qs[j] - qs[j].mean()
                sims.append(float(ci @ cj / (stds[i] * stds[j] * ci.size)))
    return float(np.mean(sims))


def spatial_entropy(u: np.ndarray, bins: int = 32) -> float:
    """Shannon entropy (nats) of a 32-bin histogram over the magnitudes
    of the channel-averaged field; single-valued fields give 0."""
    m = np.abs(np.asarray(u, dtype=np.float64).mean(axis=0)).ravel()
    lo, hi = float(m.min()), float(m.max())
    if hi == lo:
        return 0.0
    counts, _ = np.histogram(m, bins=bins, range=(lo, hi))
    p = counts[counts > 0] / m.size
    return float(-np.sum(p * np.log(p)))


def cluster_count(u: np.ndarray, seed: int = 0, k_range=range(2, 7)) -> int:
    """Silhouette-selected k over per-position channel vectors."""
    d = u.shape[0]
    points = np.asarray(u, dtype=np.float64).reshape(d, -1).T
    return clustering.best_k(points, k_range=k_range, seed=seed)


@dataclass
class SymmetryPoint:
    step: int
    symmetry_index: float
    entropy: float
    cluster_count: int


def symmetry_experiment(
    epsilon: float = 1e-4,
    steps: int = 20,
    seed: int = 0,
    d: int = 6,
    grid=(24, 24),
    gain: float = 6.0,
    dt: float = 0.3,
    base: float = 0.5,
    diffusion_span=(0.02, 6.0),
    with_clusters: bool = True,
    return_fields: bool = False,
):
    """Integrate constant + epsilon*noise under a seeded random reaction
    and track symmetry breaking step by step (step 0 is the initial
    field).  Returns one record per step; with return_fields also the
    per-step fields as (records, fields).

    Diffusion rates are drawn log-uniform over `diffusion_span` per
    channel and stencil.  The spread matters: with channel-uniform
    diffusion every spatial mode is damped strictly harder than the
    uniform one and the noise can only decay, so no structure would ever
    emerge from a near-constant start.
    """
    h, w = grid
    params = random_reaction_params(d, seed, diffusion=0.1, dt=dt, gain=gain)
    lo, hi = diffusion_span
    draws = np.exp(
        np.random.default_rng(seed + 3).uniform(
            np.log(lo), np.log(hi), size=params.diffusion_logits.shape
        )
    )
    params = dataclasses.replace(
        params, diffusion_logits=fieldops.softplus_inverse(draws)
    )
    rng = np.random.default_rng(seed + 7)
    u0 = base + epsilon * rng.normal(size=(d, h, w))

    fields = [np.array(u0)]
    dynamics.integrate_layer(
        u0, params, steps, norm_every=2, adaptive=False,
        on_step=lambda tau, val: fields.append(np.array(val)),
    )
    records = []
    for step, u in enumerate(fields):
        records.append(
            SymmetryPoint(
                step=step,
                symmetry_index=symmetry_index(u),
                entropy=spatial_entropy(u),
                cluster_count=cluster_count(u, seed=seed) if with_clusters else 0,
            )
        )
    if return_fields:
        return records, fields
    return records


def resilience_sweep(
    params: belief.BeliefParams,
    modes: Sequence[str] = belief.CORRUPT_MODES,
    ratios: Sequence[float] = tuple(np.round(np.arange(0.1, 1.0, 0.1), 2)),
    steps: int = 20,
    seed: int = 0,
    d: int = 8,
    grid=(12, 12),
    threshold: float = 0.05,
) -> List[dict]:
    """Paired clean/corrupted belief evolutions per (mode, ratio) cell.

    recovery_steps is the first evolve step at which the relative state
    distance to the clean trajectory falls below `threshold` (0 when the
    corruption is already inside it, -1 when never within `steps`).
    """
    h, w = grid
    rng = np.random.default_rng(seed)
    s0 = rng.normal(size=(d, h, w))

    def cell_fn(cell, _cell_seed):
        # the corruption draw is shared per mode so ratios stay comparable
        mi, mode, ratio = cell
        clean = belief.BeliefState(
            s=np.array(s0), fatigue=bio.fresh_fatigue(d),
            hebbian=bio.fresh_hebbian((d, h, w)),
        )
        corrupted = belief.corrupt(clean, mode, float(ratio), rng_seed=seed + 101 * mi)
        rec = -1
        dist0 = _rel_dist(corrupted.s, clean.s)
        if dist0 < threshold:
            rec = 0
        for k in range(1, steps + 1):
            clean = belief.evolve(clean, params)
            corrupted = belief.evolve(corrupted, params)
            if rec < 0 and _rel_dist(corrupted.s, clean.s) < threshold:
                rec = k
        residual = float(np.mean((np.asarray(corrupted.s) - np.asarray(clean.s)) ** 2))
        return {
            "mode": mode,
            "ratio": float(ratio),
            "residual_mse": residual,
            "recovery_steps": rec,
        }

    cells = [
        (mi, mode, ratio) for mi, mode in enumerate(modes) for ratio in ratios
    ]
    return parallel.run_cells(cell_fn, cells, base_seed=seed)


def _rel_dist(a: np.ndarray, b: np.ndarray) -> float:
    denom = float(np.linalg.norm(b)) + 1e-12
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b))) / denom


def op_count_scaling(resolutions: Sequence[int] = (256, 1024, 4096, 16384)) -> List[dict]:
    """Attention-vs-diffusion operation counts per token count N:
    attention pairs N^2, diffusion stencils N, ratio N."""
    rows = []
    for n in resolutions:
        n = int(n)
        rows.append(
            {
                "tokens": n,
                "attention_ops": n * n,
                "diffusion_ops": n,
                "ratio": n,
            }
        )
    return rows
