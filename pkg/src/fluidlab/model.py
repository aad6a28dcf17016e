"""Model assembly: the full parameter tree, a stable flatten/unflatten
bijection for the optimizer, and the per-frame compute step.

A parameter tree is nested dataclasses whose array-valued fields are the
learnable leaves; ints, floats, and tuples of ints are structure and are
skipped.  Leaf order follows dataclass field order, so the flattened
vector layout is deterministic for a fixed architecture.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from . import autodiff as ad
from . import belief
from . import bio
from . import codec
from . import dynamics


@dataclass
class ModelParams:
    codec: codec.CodecParams
    belief: belief.BeliefParams


def init_model(
    d: int,
    rng: np.random.Generator,
    in_channels: int = 1,
    mid: int = 64,
    dilations: Sequence[int] = (1, 4, 16),
    n_layers: int = 3,
    max_steps: int = 6,
    n_evolve: int = 3,
) -> ModelParams:
    cod = codec.init_codec_params(
        d, rng, in_channels=in_channels, mid=mid, dilations=dilations,
        n_layers=n_layers, max_steps=max_steps,
    )
    bel = belief.init_belief_params(d, rng, dilations=dilations)
    bel.n_evolve = n_evolve
    return ModelParams(codec=cod, belief=bel)


# ---------------------------------------------------------------------------
# parameter tree walking


def _is_leaf(x) -> bool:
    return isinstance(x, (np.ndarray, ad.Var))


def iter_leaves(obj, path: str = ""):
    """Yield (path, leaf) pairs in deterministic field order."""
    if _is_leaf(obj):
        yield path, obj
    elif dataclasses.is_dataclass(obj):
        for f in dataclasses.fields(obj):
            yield from iter_leaves(getattr(obj, f.name), path + "." + f.name)
    elif isinstance(obj, (list, tuple)):
        for i, item in enumerate(obj):
            yield from iter_leaves(item, "%s[%d]" % (path, i))
    # scalars, strings, None: structural, not learnable


def map_leaves(obj, fn, path: str = ""):
    """Rebuild the tree applying fn(path, leaf) to every leaf."""
    if _is_leaf(obj):
        return fn(path, obj)
    if dataclasses.is_dataclass(obj):
        updates = {
            f.name: map_leaves(getattr(obj, f.name), fn, path + "." + f.name)
            for f in dataclasses.fields(obj)
        }
        return dataclasses.replace(obj, **updates)
    if isinstance(obj, (list, tuple)):
        items = [map_leaves(item, fn, "%s[%d]" % (path, i)) for i, item in enumerate(obj)]
        return type(obj)(items)
    return obj


def _leaf_value(leaf) -> np.ndarray:
    return leaf.value if isinstance(leaf, ad.Var) else np.asarray(leaf, dtype=np.float64)


def flatten(model) -> Tuple[np.ndarray, List[Tuple[str, tuple, int]]]:
    """Concatenate all leaves into one float64 vector.

    Returns (vector, index) where index rows are (path, shape, offset).
    """
    chunks = []
    index = []
    offset = 0
    for path, leaf in iter_leaves(model):
        arr = _leaf_value(leaf)
        chunks.append(arr.reshape(-1))
        index.append((path, arr.shape, offset))
        offset += arr.size
    vec = np.concatenate(chunks) if chunks else np.zeros(0)
    return vec, index


def unflatten(template, vec: np.ndarray):
    """Rebuild a tree shaped like template from a flat vector."""
    pos = [0]

    def take(path, leaf):
        arr = _leaf_value(leaf)
        chunk = vec[pos[0] : pos[0] + arr.size].reshape(arr.shape)
        pos[0] += arr.size
        return chunk.copy()

    out = map_leaves(template, take)
    if pos[0] != vec.size:
        raise ValueError("vector length %d does not match template (%d)" % (vec.size, pos[0]))
    return out


def as_variables(model):
    """Wrap every leaf in an autodiff variable (shared graph entry points)."""
    return map_leaves(model, lambda path, leaf: ad.Var(_leaf_value(leaf)))


def grad_vector(model_vars) -> np.ndarray:
    """Collect leaf gradients in flatten order; missing gradients are zero."""
    chunks = []
    for _, leaf in iter_leaves(model_vars):
        if isinstance(leaf, ad.Var) and leaf.grad is not None:
            chunks.append(leaf.grad.reshape(-1))
        else:
            chunks.append(np.zeros(_leaf_value(leaf).size))
    return np.concatenate(chunks) if chunks else np.zeros(0)


def path_of_index(index, flat_i: int) -> str:
    """Map a flat parameter index back to its leaf path."""
    for path, shape, offset in reversed(index):
        if flat_i >= offset:
            return "%s[%d]" % (path, flat_i - offset)
    return "<unknown>"


# ---------------------------------------------------------------------------
# per-frame compute


def fresh_belief_for(model: ModelParams, frame_shape) -> belief.BeliefState:
    d = _leaf_value(model.codec.patch_b).shape[0]
    hf, wf = frame_shape[1] // codec.PATCH, frame_shape[2] // codec.PATCH
    return belief.fresh_state(d, hf, wf)


def step_frame(
    model: ModelParams,
    state: belief.BeliefState,
    frame,
    bio_cfg: Optional[bio.BioConfig] = None,
    adaptive: bool = False,
):
    """Encode one frame, reconstruct it, advance the belief, and predict
    the next frame.  Returns (z, recon_logits, pred_logits, new_state)."""
    z, fat = codec.encode(
        frame, model.codec, bio_cfg=bio_cfg, fatigue=state.fatigue, adaptive=adaptive
    )
    recon = codec.decode(z, model.codec)
    if fat is not None:
        state = dataclasses.replace(state, fatigue=fat)
    state = belief.write(state, z, model.belief)
    state = belief.evolve(state, model.belief, adaptive=adaptive)
    shp = z.shape
    pred = codec.decode(belief.read(state, shp[1], shp[2]), model.codec)
    return z, recon, pred, state


def detach_state(state: belief.BeliefState) -> belief.BeliefState:
    """Drop any autodiff history from the state (window boundary)."""
    s = state.s.value if isinstance(state.s, ad.Var) else state.s
    return dataclasses.replace(state, s=np.array(s))
