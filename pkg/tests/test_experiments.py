"""Dynamical-systems experiment tests: growth classification, phase sweep,
Lyapunov estimation, energy attractors, symmetry breaking, resilience, and
the op-count table."""

import dataclasses

import numpy as np
import pytest

from fluidlab import belief, dynamics, fieldops
from fluidlab.analysis import experiments as ex


def test_classify_growth_thresholds():
    assert ex.classify_growth(0.01) == "super"
    assert ex.classify_growth(-0.01) == "sub"
    assert ex.classify_growth(0.0) == "critical"
    assert ex.classify_growth(5e-4) == "critical"
    # threshold itself is not beyond the threshold
    assert ex.classify_growth(ex.GROWTH_THRESHOLD) == "critical"
    assert ex.classify_growth(-ex.GROWTH_THRESHOLD) == "critical"


def test_growth_rate_rejects_zero_field():
    p = dynamics.pure_diffusion_params(2, diffusion=0.1, dt=0.1)
    with pytest.raises(ValueError):
        ex.growth_rate(p, np.zeros((2, 4, 4)), 5)


def test_growth_rate_pure_diffusion_dissipates():
    p = dynamics.pure_diffusion_params(4, diffusion=0.2, dt=0.2)
    u0 = np.random.default_rng(0).normal(size=(4, 12, 12))
    assert ex.growth_rate(p, u0, 40) < 0.0


def test_growth_rate_linear_amplifier_exact():
    # Reaction engineered to be exactly R(u) = 0.1 u: the first hidden
    # block sees u + 20, deep inside the activation's linear tail, and the
    # output bias removes the 0.1 * 20 offset.  On a uniform field the
    # stencil term vanishes, so each step multiplies by 1 + 0.35 * 0.1.
    d = 4
    p = dynamics.pure_diffusion_params(d, diffusion=0.01, dt=0.35, dilations=(1,))
    w1 = np.zeros((2 * d, d))
    w1[:d, :] = np.eye(d)
    w2 = np.zeros((d, 2 * d))
    w2[:, :d] = 0.1 * np.eye(d)
    p = dataclasses.replace(
        p,
        reaction_w1=w1,
        reaction_b1=np.full(2 * d, 20.0),
        reaction_w2=w2,
        reaction_b2=np.full(d, -2.0),
    )
    rate = ex.growth_rate(p, np.ones((d, 8, 8)), 40)
    assert abs(rate - 2.0 * np.log(1.035)) < 1e-12
    assert ex.classify_growth(rate) == "super"


def test_phase_sweep_grid_and_regimes():
    pts = ex.phase_sweep(
        np.linspace(0.01, 1.0, 15),
        np.linspace(0.01, 0.35, 15),
        steps=10,
        seed=0,
        d=4,
        grid=(8, 8),
        gain=4.0,
    )
    assert len(pts) == 225
    regimes = {q.regime for q in pts}
    assert "sub" in regimes and "super" in regimes
    for q in pts:
        assert q.regime == ex.classify_growth(q.growth_rate)
    # deterministic
    again = ex.phase_sweep(
        np.linspace(0.01, 1.0, 15),
        np.linspace(0.01, 0.35, 15),
        steps=10,
        seed=0,
        d=4,
        grid=(8, 8),
        gain=4.0,
    )
    assert all(a == b for a, b in zip(pts, again))


def test_benettin_contraction_map():
    mean, std = ex.benettin(lambda u: 0.5 * u, np.ones((3, 3)), steps=15, transient=10)
    assert abs(mean - np.log(0.5)) < 1e-12
    assert std < 1e-12


def test_benettin_identity_map():
    # adding then subtracting the base field costs ~1e-10 of relative
    # precision at delta0 = 1e-6, so the bound is loose
    mean, std = ex.benettin(lambda u: u, np.ones((3, 3)), steps=15, transient=10)
    assert abs(mean) < 1e-9
    assert std < 1e-9


def test_benettin_requires_post_transient_steps():
    with pytest.raises(ValueError):
        ex.benettin(lambda u: u, np.ones((2, 2)), steps=10, transient=10)


def test_lyapunov_finite_and_deterministic():
    params = ex.random_reaction_params(4, 2, diffusion=0.3, dt=0.1, gain=1.0)
    a = ex.lyapunov(params, seed=0, steps=30, grid=(8, 8))
    b = ex.lyapunov(params, seed=0, steps=30, grid=(8, 8))
    assert a == b
    assert np.isfinite(a[0]) and np.isfinite(a[1])


def test_energy_trajectory_shape_and_start():
    p = dynamics.pure_diffusion_params(4, diffusion=0.1, dt=0.1)
    traj = ex.energy_experiment("random", p, 12, norm_enabled=True, grid=(8, 8))
    assert traj.shape == (13,)
    # the start is normalized to unit RMS, so its energy is the cell count
    assert abs(traj[0] - 4 * 8 * 8) < 1e-9


def test_energy_norm_dichotomy_and_attractor():
    params = ex.random_reaction_params(8, 53, diffusion=0.1, dt=0.35, gain=1.0)
    ref = 8 * 16 * 16  # energy of a unit-RMS field on this shape
    on_u = ex.energy_experiment("uniform", params, 200, norm_enabled=True)
    on_r = ex.energy_experiment("random", params, 200, norm_enabled=True)
    assert on_u.max() < 10 * ref
    assert on_r.max() < 10 * ref
    # matched params pull different inits onto the same attractor
    gap = abs(on_u[-1] - on_r[-1]) / max(on_u[-1], on_r[-1])
    assert gap < 0.10
    off = ex.energy_experiment("random", params, 200, norm_enabled=False)
    assert off[-1] / off[0] > 100.0


def test_energy_rejects_unknown_init():
    p = dynamics.pure_diffusion_params(2, diffusion=0.1, dt=0.1)
    with pytest.raises(ValueError):
        ex.energy_experiment("vortex", p, 3, norm_enabled=True)


def test_symmetry_index_conventions():
    tile = np.random.default_rng(0).random((5, 5))
    fourfold = np.tile(tile, (2, 2))[None]
    assert abs(ex.symmetry_index(fourfold) - 1.0) < 1e-12

    assert ex.symmetry_index(np.full((3, 8, 8), 2.5)) == 1.0
    assert ex.symmetry_index(np.zeros((2, 6, 6))) == 1.0

    # one structured quadrant against three flat ones: the three
    # flat/flat pairs score 1, the three mixed pairs score 0
    u = np.zeros((1, 8, 8))
    u[0, :4, :4] = np.random.default_rng(1).normal(size=(4, 4))
    assert ex.symmetry_index(u) == 0.5


def test_spatial_entropy_edges():
    assert ex.spatial_entropy(np.full((2, 8, 8), 0.3)) == 0.0
    u = np.zeros((1, 4, 8))
    u[0, :, 4:] = 1.0
    assert abs(ex.spatial_entropy(u) - np.log(2.0)) < 1e-12
    rnd = np.random.default_rng(2).random((1, 16, 16))
    assert 0.0 < ex.spatial_entropy(rnd) <= np.log(32.0) + 1e-12


def test_cluster_count_three_blobs():
    rng = np.random.default_rng(3)
    u = np.zeros((2, 6, 6))
    flat = u.reshape(2, -1)
    centers = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]
    for i in range(36):
        cx, cy = centers[i % 3]
        flat[0, i] = cx + 0.1 * rng.normal()
        flat[1, i] = cy + 0.1 * rng.normal()
    assert ex.cluster_count(u, seed=0) == 3


def test_symmetry_experiment_breaks_symmetry():
    recs = ex.symmetry_experiment(steps=10, seed=0, with_clusters=False)
    assert len(recs) == 11
    assert recs[0].step == 0
    assert recs[0].symmetry_index >= 0.999
    assert recs[10].symmetry_index < 0.9
    for r in recs:
        assert np.isfinite(r.entropy)


def test_symmetry_experiment_deterministic_yet_seed_sensitive():
    _, fa = ex.symmetry_experiment(steps=10, seed=0, with_clusters=False,
                                   return_fields=True)
    _, fb = ex.symmetry_experiment(steps=10, seed=0, with_clusters=False,
                                   return_fields=True)
    assert all(np.array_equal(x, y) for x, y in zip(fa, fb))
    _, fc = ex.symmetry_experiment(steps=10, seed=1, with_clusters=False,
                                   return_fields=True)
    assert np.max(np.abs(fa[10] - fc[10])) > 1e-3


def test_symmetry_experiment_cluster_records():
    recs = ex.symmetry_experiment(steps=4, seed=1)
    for r in recs:
        assert 2 <= r.cluster_count <= 6


def _diffusion_belief_params(d: int) -> belief.BeliefParams:
    return belief.BeliefParams(
        write_gate=np.zeros((d, d)),
        write_val=np.zeros((d, d)),
        gamma_logit=np.asarray(np.log(0.95)),
        evolve_params=dynamics.pure_diffusion_params(d, diffusion=0.2, dt=0.2),
        n_evolve=3,
        norm_every=0,
    )


def test_resilience_zero_ratio_is_clean():
    rows = ex.resilience_sweep(_diffusion_belief_params(6), ratios=(0.0,),
                               steps=4, seed=0, d=6, grid=(8, 8))
    assert len(rows) == len(belief.CORRUPT_MODES)
    for row in rows:
        assert row["recovery_steps"] == 0
        assert row["residual_mse"] == 0.0


def test_resilience_residual_monotone_in_ratio():
    rows = ex.resilience_sweep(
        _diffusion_belief_params(6),
        ratios=(0.0, 0.2, 0.4, 0.6, 0.8),
        steps=8,
        seed=0,
        d=6,
        grid=(10, 10),
    )
    for mode in belief.CORRUPT_MODES:
        res = [row["residual_mse"] for row in rows if row["mode"] == mode]
        assert len(res) == 5
        for lo, hi in zip(res, res[1:]):
            assert hi >= lo * 0.95


def test_resilience_deterministic():
    a = ex.resilience_sweep(_diffusion_belief_params(4), ratios=(0.3, 0.6),
                            steps=5, seed=7, d=4, grid=(8, 8))
    b = ex.resilience_sweep(_diffusion_belief_params(4), ratios=(0.3, 0.6),
                            steps=5, seed=7, d=4, grid=(8, 8))
    assert a == b


def test_op_count_scaling_table():
    rows = ex.op_count_scaling()
    expect = [
        (256, 65536, 256, 256),
        (1024, 1048576, 1024, 1024),
        (4096, 16777216, 4096, 4096),
        (16384, 268435456, 16384, 16384),
    ]
    assert len(rows) == 4
    for row, (n, att, diff, ratio) in zip(rows, expect):
        assert row["tokens"] == n
        assert row["attention_ops"] == att
        assert row["diffusion_ops"] == diff
        assert row["ratio"] == ratio


def test_op_count_scaling_degenerate():
    (row,) = ex.op_count_scaling([1])
    assert row == {"tokens": 1, "attention_ops": 1, "diffusion_ops": 1, "ratio": 1}


def test_sweeps_identical_across_worker_counts(monkeypatch):
    def both():
        phase = ex.phase_sweep(np.linspace(0.05, 0.8, 3),
                               np.linspace(0.02, 0.3, 3), steps=10, seed=3)
        res = ex.resilience_sweep(_diffusion_belief_params(4), ratios=(0.3, 0.7),
                                  steps=5, seed=2, d=4, grid=(8, 8))
        return phase, res

    monkeypatch.setenv("FLUIDLAB_THREADS", "1")
    sequential = both()
    monkeypatch.setenv("FLUIDLAB_THREADS", "7")
    assert both() == sequential
