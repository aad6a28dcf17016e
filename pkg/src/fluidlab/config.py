"""Run configuration: default hyperparameters, a small desk-scale profile,
deep merging of JSON overrides, and strict schema validation.

The defaults are the full-scale training recipe; ``desk_profile`` shrinks
the model and data so the whole loop runs on one core in minutes.  Unknown
keys are rejected by name so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import copy
import dataclasses
import json

import numpy as np

from . import bio as bio_mod
from . import belief as belief_mod
from . import codec as codec_mod
from . import dynamics
from . import losses
from . import model as model_mod
from . import training


class ConfigError(ValueError):
    """Configuration rejected; the message names the offending key."""


PAPER_DEFAULTS = {
    "model": {
        "latent_dim": 128,
        "patch_size": 4,
        "in_channels": 1,
        "encoder_layers": 3,
        "dilations": [1, 4, 16],
        "max_steps_encoder": 6,
        "max_steps_belief": 3,
        "dt_init": 0.1,
        "stop_epsilon": 0.08,
        "decoder_mid": 64,
    },
    "bio": {
        "enabled": True,
        "beta": 0.3,
        "kappa": 0.1,
        "rho": 0.02,
        "hebbian_decay": 0.99,
        "hebbian_lr": 0.01,
        "hebbian_gain": 0.5,
        "gamma": 0.95,
    },
    "training": {
        "lr": 3e-4,
        "weight_decay": 0.04,
        "batch_size": 16,
        "bptt_window": 4,
        "warmup_steps": 500,
        "schedule": "cosine",
        "grad_clip": 1.0,
        "steps": 8000,
    },
    "loss": {
        "w_reconstruction": 1.0,
        "w_prediction": 1.0,
        "w_variance": 0.5,
        "w_gradient": 1.0,
        "sigma_target": 1.0,
        "w_edge": 0.0,
        "w_freq": 0.0,
    },
    "data": {
        "width": 64,
        "height": 64,
        "n_objects": 2,
        "object_radius": 2.0,
        "speed": 1.0,
        "n_frames": 24,
        "seed": 0,
    },
}

DESK_OVERRIDES = {
    "model": {"latent_dim": 16, "decoder_mid": 32},
    "training": {"batch_size": 4, "steps": 1000},
    "data": {"width": 16, "height": 16},
}


def paper_defaults() -> dict:
    return copy.deepcopy(PAPER_DEFAULTS)


def desk_profile() -> dict:
    """Desk-scale variant: d=16 on 16x16 frames, batch 4, 1000 steps."""
    return merge_config(paper_defaults(), DESK_OVERRIDES)


def _type_ok(expected, value) -> bool:
    if isinstance(expected, bool):
        return isinstance(value, bool)
    if isinstance(expected, (int, float)):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(expected, str):
        return isinstance(value, str)
    if isinstance(expected, list):
        return isinstance(value, (list, tuple))
    return False


def merge_config(base: dict, override: dict, path: str = "") -> dict:
    """Deep-merge override into a copy of base, rejecting unknown keys and
    mismatched value types by dotted name."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        dotted = key if not path else path + "." + key
        if key not in base:
            raise ConfigError("unknown config key: %s" % dotted)
        current = base[key]
        if isinstance(current, dict):
            if not isinstance(value, dict):
                raise ConfigError("config key %s expects a section" % dotted)
            out[key] = merge_config(current, value, dotted)
        else:
            if not _type_ok(current, value):
                raise ConfigError(
                    "config key %s has wrong type %s"
                    % (dotted, type(value).__name__)
                )
            out[key] = copy.deepcopy(value)
    return out


def validate_config(cfg: dict) -> dict:
    """Structural check plus the few value constraints the model fixes."""
    cfg = merge_config(PAPER_DEFAULTS, cfg)
    if cfg["model"]["patch_size"] != codec_mod.PATCH:
        raise ConfigError(
            "config key model.patch_size must be %d (fixed by the decoder "
            "stage table)" % codec_mod.PATCH
        )
    if cfg["training"]["schedule"] != "cosine":
        raise ConfigError("config key training.schedule must be 'cosine'")
    for side_key in ("width", "height"):
        if cfg["data"][side_key] % codec_mod.PATCH != 0:
            raise ConfigError(
                "config key data.%s must be divisible by the patch size"
                % side_key
            )
    return cfg


def load_config(path=None, profile: str = "paper", overrides=None) -> dict:
    """Resolve a full config: profile defaults <- JSON file <- overrides."""
    if profile == "paper":
        cfg = paper_defaults()
    elif profile == "desk":
        cfg = desk_profile()
    else:
        raise ConfigError("unknown profile %r (use 'paper' or 'desk')" % profile)
    if path is not None:
        with open(path) as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError("config file is not valid JSON: %s" % e)
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = merge_config(cfg, doc)
    if overrides:
        cfg = merge_config(cfg, overrides)
    return validate_config(cfg)


# ---------------------------------------------------------------------------
# object construction from a resolved config


def model_from_config(cfg: dict, rng) -> model_mod.ModelParams:
    m = cfg["model"]
    mdl = model_mod.init_model(
        m["latent_dim"],
        rng,
        in_channels=m["in_channels"],
        mid=m["decoder_mid"],
        dilations=tuple(m["dilations"]),
        n_layers=m["encoder_layers"],
        max_steps=m["max_steps_encoder"],
        n_evolve=m["max_steps_belief"],
    )
    gamma = cfg["bio"]["gamma"]
    mdl.belief.gamma_logit = np.asarray(np.log(gamma))
    dt_logit = np.asarray(np.log(m["dt_init"]))
    mdl.belief.evolve_params = dataclasses.replace(
        mdl.belief.evolve_params, dt_logit=dt_logit
    )
    new_layers = [
        dataclasses.replace(layer, dt_logit=np.array(dt_logit))
        for layer in mdl.codec.layers
    ]
    mdl.codec.layers = new_layers
    return mdl


def bio_from_config(cfg: dict):
    b = cfg["bio"]
    if not b["enabled"]:
        return None
    return bio_mod.BioConfig(beta=b["beta"])


def weights_from_config(cfg: dict) -> losses.LossWeights:
    w = cfg["loss"]
    return losses.LossWeights(
        w_r=w["w_reconstruction"],
        w_p=w["w_prediction"],
        w_v=w["w_variance"],
        w_g=w["w_gradient"],
        sigma_target=w["sigma_target"],
        w_edge=w["w_edge"],
        w_freq=w["w_freq"],
    )


def optim_from_config(cfg: dict, n_params: int) -> training.OptimState:
    t = cfg["training"]
    return training.init_optim(
        n_params,
        horizon=t["steps"],
        lr=t["lr"],
        weight_decay=t["weight_decay"],
        warmup=t["warmup_steps"],
        clip_norm=t["grad_clip"],
    )


def stop_criterion_from_config(cfg: dict) -> dynamics.StopCriterion:
    return dynamics.StopCriterion(epsilon=cfg["model"]["stop_epsilon"])


def fresh_state_from_config(cfg: dict, mdl, frame_shape) -> belief_mod.BeliefState:
    """Fresh belief state with the configured bio constants applied."""
    b = cfg["bio"]
    st = model_mod.fresh_belief_for(mdl, frame_shape)
    fat = dataclasses.replace(st.fatigue, kappa=b["kappa"], rho=b["rho"])
    heb = dataclasses.replace(
        st.hebbian,
        decay=b["hebbian_decay"],
        rate=b["hebbian_lr"],
        gain=b["hebbian_gain"],
    )
    return dataclasses.replace(st, fatigue=fat, hebbian=heb)
