import json

import numpy as np
import pytest

from fluidlab import config


def test_paper_defaults_values():
    cfg = config.paper_defaults()
    assert cfg["model"]["latent_dim"] == 128
    assert cfg["model"]["patch_size"] == 4
    assert cfg["model"]["dilations"] == [1, 4, 16]
    assert cfg["model"]["max_steps_encoder"] == 6
    assert cfg["model"]["max_steps_belief"] == 3
    assert cfg["model"]["dt_init"] == 0.1
    assert cfg["model"]["stop_epsilon"] == 0.08
    assert cfg["model"]["decoder_mid"] == 64
    assert cfg["bio"]["beta"] == 0.3
    assert cfg["bio"]["kappa"] == 0.1
    assert cfg["bio"]["rho"] == 0.02
    assert cfg["bio"]["hebbian_decay"] == 0.99
    assert cfg["bio"]["hebbian_lr"] == 0.01
    assert cfg["bio"]["hebbian_gain"] == 0.5
    assert cfg["bio"]["gamma"] == 0.95
    assert cfg["training"]["lr"] == 3e-4
    assert cfg["training"]["weight_decay"] == 0.04
    assert cfg["training"]["batch_size"] == 16
    assert cfg["training"]["bptt_window"] == 4
    assert cfg["training"]["warmup_steps"] == 500
    assert cfg["training"]["schedule"] == "cosine"
    assert cfg["training"]["grad_clip"] == 1.0
    assert cfg["loss"]["w_reconstruction"] == 1.0
    assert cfg["loss"]["w_prediction"] == 1.0
    assert cfg["loss"]["w_variance"] == 0.5
    assert cfg["loss"]["w_gradient"] == 1.0
    assert cfg["loss"]["sigma_target"] == 1.0


def test_desk_profile_overrides_only_the_listed_keys():
    paper = config.paper_defaults()
    desk = config.desk_profile()
    assert desk["model"]["latent_dim"] == 16
    assert desk["model"]["decoder_mid"] == 32
    assert desk["training"]["batch_size"] == 4
    assert desk["training"]["steps"] == 1000
    assert desk["data"]["width"] == 16
    assert desk["data"]["height"] == 16
    # everything else matches the paper profile
    assert desk["bio"] == paper["bio"]
    assert desk["loss"] == paper["loss"]
    assert desk["model"]["dilations"] == paper["model"]["dilations"]
    assert desk["training"]["lr"] == paper["training"]["lr"]


def test_merge_rejects_unknown_key_with_dotted_name():
    with pytest.raises(config.ConfigError, match="unknown config key: model.bogus"):
        config.merge_config(config.paper_defaults(), {"model": {"bogus": 1}})
    with pytest.raises(config.ConfigError, match="unknown config key: nope"):
        config.merge_config(config.paper_defaults(), {"nope": {}})


def test_merge_rejects_type_mismatch():
    with pytest.raises(config.ConfigError, match="training.lr"):
        config.merge_config(config.paper_defaults(), {"training": {"lr": "fast"}})
    # bool is not an int here even though bool subclasses int
    with pytest.raises(config.ConfigError, match="training.batch_size"):
        config.merge_config(config.paper_defaults(), {"training": {"batch_size": True}})


def test_merge_accepts_int_for_float_key():
    cfg = config.merge_config(config.paper_defaults(), {"training": {"lr": 1}})
    assert cfg["training"]["lr"] == 1


def test_validate_rejects_bad_patch_and_schedule_and_size():
    with pytest.raises(config.ConfigError, match="patch_size"):
        config.validate_config({"model": {"patch_size": 8}})
    with pytest.raises(config.ConfigError, match="schedule"):
        config.validate_config({"training": {"schedule": "linear"}})
    with pytest.raises(config.ConfigError, match="divisible"):
        config.validate_config({"data": {"width": 15}})


def test_load_config_precedence(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"training": {"lr": 1e-3}, "model": {"latent_dim": 8}}))
    cfg = config.load_config(path, profile="desk",
                             overrides={"training": {"lr": 5e-4}})
    assert cfg["model"]["latent_dim"] == 8          # file beats profile
    assert cfg["training"]["lr"] == 5e-4            # override beats file
    assert cfg["training"]["batch_size"] == 4       # profile survives
    with pytest.raises(config.ConfigError, match="unknown profile"):
        config.load_config(profile="lab")


def test_model_from_config_shapes_and_logits():
    cfg = config.load_config(profile="desk")
    mdl = config.model_from_config(cfg, np.random.default_rng(0))
    d = cfg["model"]["latent_dim"]
    assert mdl.codec.patch_w.shape[0] == d
    assert len(mdl.codec.layers) == cfg["model"]["encoder_layers"]
    dt = float(np.exp(mdl.belief.evolve_params.dt_logit))
    assert abs(dt - cfg["model"]["dt_init"]) < 1e-12
    for layer in mdl.codec.layers:
        assert abs(float(np.exp(layer.dt_logit)) - cfg["model"]["dt_init"]) < 1e-12
    gamma = np.exp(np.asarray(mdl.belief.gamma_logit))
    assert abs(float(gamma) - cfg["bio"]["gamma"]) < 1e-12
    assert mdl.belief.n_evolve == cfg["model"]["max_steps_belief"]


def test_optim_and_weights_and_bio_builders():
    cfg = config.load_config(profile="desk")
    optim = config.optim_from_config(cfg, 10)
    assert optim.lr == cfg["training"]["lr"]
    assert optim.weight_decay == cfg["training"]["weight_decay"]
    assert optim.warmup == cfg["training"]["warmup_steps"]
    assert optim.horizon == cfg["training"]["steps"]
    assert optim.clip_norm == cfg["training"]["grad_clip"]
    w = config.weights_from_config(cfg)
    assert (w.w_r, w.w_p, w.w_v, w.w_g) == (1.0, 1.0, 0.5, 1.0)
    b = config.bio_from_config(cfg)
    assert b is not None and b.beta == 0.3
    cfg2 = config.load_config(profile="desk", overrides={"bio": {"enabled": False}})
    assert config.bio_from_config(cfg2) is None


def test_fresh_state_applies_bio_constants():
    cfg = config.load_config(
        profile="desk",
        overrides={"bio": {"kappa": 0.2, "rho": 0.05, "hebbian_lr": 0.02}},
    )
    mdl = config.model_from_config(cfg, np.random.default_rng(0))
    st = config.fresh_state_from_config(cfg, mdl, (1, 16, 16))
    assert st.fatigue.kappa == 0.2
    assert st.fatigue.rho == 0.05
    assert st.hebbian.rate == 0.02
    assert st.hebbian.decay == cfg["bio"]["hebbian_decay"]
    assert np.asarray(st.s).shape == (16, 4, 4)
