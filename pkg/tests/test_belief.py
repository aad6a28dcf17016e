"""Belief-state tests: write contraction, evolve traces, corruption modes."""

import numpy as np
import pytest

from fluidlab import autodiff as ad
from fluidlab import belief
from fluidlab import bio
from fluidlab import dynamics as dyn
from fluidlab import fieldops


RNG = np.random.default_rng(77)


def make_params(d, rng, **kw):
    p = belief.init_belief_params(d, rng, dilations=(1,), **kw)
    return p


def make_state(d, h, w, rng=None):
    st = belief.fresh_state(d, h, w)
    if rng is not None:
        st.s = rng.normal(size=(d, h, w))
    return st


# -- write --------------------------------------------------------------------


def test_write_zero_input_decays_by_gamma():
    rng = np.random.default_rng(1)
    p = make_params(3, rng)
    st = make_state(3, 4, 4, rng)
    s0 = st.s.copy()
    out = belief.write(st, np.zeros((3, 4, 4)), p)
    assert np.abs(out.s - 0.95 * s0).max() < 1e-12


def test_write_gamma_clamps_at_ceiling():
    rng = np.random.default_rng(2)
    p = make_params(2, rng)
    p.gamma_logit = np.asarray(0.0)  # exp(0) = 1 -> clamped to 0.99
    st = make_state(2, 2, 2)
    st.s = np.ones((2, 2, 2))
    out = belief.write(st, np.zeros((2, 2, 2)), p)
    assert np.abs(out.s - 0.99).max() < 1e-12


def test_write_matches_per_position_oracle():
    rng = np.random.default_rng(3)
    p = make_params(4, rng)
    st = make_state(4, 2, 2, rng)
    z = rng.normal(size=(4, 2, 2))
    out = belief.write(st, z, p)
    for y in range(2):
        for x in range(2):
            gate = fieldops.sigmoid(p.write_gate @ z[:, y, x])
            val = np.tanh(p.write_val @ z[:, y, x])
            expect = 0.95 * st.s[:, y, x] + gate * val
            assert np.abs(out.s[:, y, x] - expect).max() < 1e-12


def test_write_contraction_over_k_steps():
    rng = np.random.default_rng(4)
    p = make_params(3, rng)
    st = make_state(3, 5, 5, rng)
    norm0 = np.linalg.norm(st.s)
    z = np.zeros((3, 5, 5))
    for _ in range(7):
        st = belief.write(st, z, p)
    assert abs(np.linalg.norm(st.s) - 0.95 ** 7 * norm0) < 1e-9 * norm0


def test_write_is_differentiable():
    rng = np.random.default_rng(5)
    p = belief.as_variables(make_params(2, rng))
    st = make_state(2, 3, 3, rng)
    st.s = ad.Var(st.s)
    z = ad.Var(rng.normal(size=(2, 3, 3)))
    out = belief.write(st, z, p)
    ad.backward(ad.vsum(out.s))
    assert z.grad is not None
    assert p.write_gate.grad is not None
    assert np.abs(p.gamma_logit.grad) > 0


# -- evolve -------------------------------------------------------------------


def test_evolve_zero_steps_is_identity():
    rng = np.random.default_rng(6)
    p = make_params(2, rng, )
    p.n_evolve = 0
    st = make_state(2, 4, 4, rng)
    out = belief.evolve(st, p)
    assert out is st


def test_evolve_constant_state_fixed_point_updates_hebbian():
    p = belief.BeliefParams(
        write_gate=np.zeros((2, 2)),
        write_val=np.zeros((2, 2)),
        gamma_logit=np.asarray(np.log(0.95)),
        evolve_params=dyn.pure_diffusion_params(2),
        n_evolve=1,
    )
    st = belief.fresh_state(2, 4, 4)
    st.s = np.full((2, 4, 4), 0.5)
    out = belief.evolve(st, p)
    assert np.array_equal(out.s, st.s)  # diffusion of a constant, no norm at step 1
    assert np.abs(out.hebbian.map - 0.01 * 0.25).max() < 1e-15


def test_evolve_deterministic():
    rng = np.random.default_rng(7)
    p = make_params(3, rng)
    st = make_state(3, 6, 6, rng)
    a = belief.evolve(st, p)
    b = belief.evolve(st, p)
    assert np.array_equal(a.s, b.s)
    assert np.array_equal(a.hebbian.map, b.hebbian.map)


def test_evolve_uses_hebbian_modulation():
    rng = np.random.default_rng(8)
    p = make_params(2, rng)
    st = make_state(2, 6, 6, rng)
    boosted = belief.BeliefState(
        s=st.s.copy(),
        fatigue=st.fatigue,
        hebbian=bio.HebbianMap(map=np.full((2, 6, 6), 2.0)),
    )
    plain = belief.evolve(st, p)
    mod = belief.evolve(boosted, p)
    assert np.abs(plain.s - mod.s).max() > 1e-9


def test_self_repair_distance_non_increasing():
    # pure diffusion dissipates injected noise; hebbian gain off so both
    # trajectories share identical dynamics
    rng = np.random.default_rng(9)
    p = belief.BeliefParams(
        write_gate=np.zeros((2, 2)),
        write_val=np.zeros((2, 2)),
        gamma_logit=np.asarray(np.log(0.95)),
        evolve_params=dyn.pure_diffusion_params(2, diffusion=0.5, dt=0.2),
        n_evolve=1,
        norm_every=0,
    )
    clean = belief.fresh_state(2, 8, 8)
    clean.s = fieldops.box_smooth3(rng.normal(size=(2, 8, 8)))
    clean.hebbian = bio.HebbianMap(map=np.zeros((2, 8, 8)), gain=0.0)
    noisy = belief.corrupt(clean, "gaussian_noise", ratio=0.5, intensity=1.0, rng_seed=5)

    def rel_dist(a, b):
        return np.linalg.norm(a.s - b.s) / (np.linalg.norm(b.s) + 1e-12)

    dists = [rel_dist(noisy, clean)]
    for _ in range(12):
        clean = belief.evolve(clean, p)
        noisy = belief.evolve(noisy, p)
        dists.append(rel_dist(noisy, clean))
    for prev, curr in zip(dists, dists[1:]):
        assert curr <= prev + 1e-12


# -- read ---------------------------------------------------------------------


def test_read_same_size_verbatim():
    rng = np.random.default_rng(10)
    st = make_state(2, 4, 4, rng)
    assert np.abs(belief.read(st, 4, 4) - st.s).max() < 1e-12


def test_read_constant_any_size():
    st = belief.fresh_state(2, 4, 4)
    st.s = np.full((2, 4, 4), 1.5)
    out = belief.read(st, 9, 5)
    assert np.abs(out - 1.5).max() < 1e-12


def test_read_matches_resize_oracle():
    rng = np.random.default_rng(11)
    st = make_state(3, 2, 2, rng)
    assert np.array_equal(belief.read(st, 4, 4), fieldops.bilinear_resize(st.s, 4, 4))


# -- corrupt ------------------------------------------------------------------


def test_corrupt_zero_ratio_all_modes_unchanged():
    rng = np.random.default_rng(12)
    st = make_state(4, 4, 4, rng)
    for mode in belief.CORRUPT_MODES:
        out = belief.corrupt(st, mode, ratio=0.0, rng_seed=3)
        assert np.array_equal(out.s, st.s), mode


def test_corrupt_full_zero_channels():
    rng = np.random.default_rng(13)
    st = make_state(4, 3, 3, rng)
    out = belief.corrupt(st, "zero_channels", ratio=1.0)
    assert np.all(out.s == 0.0)


def test_corrupt_channel_subset_size():
    rng = np.random.default_rng(14)
    st = make_state(8, 3, 3, rng)
    out = belief.corrupt(st, "zero_channels", ratio=0.5, rng_seed=1)
    zeroed = [c for c in range(8) if np.all(out.s[c] == 0.0)]
    assert len(zeroed) == 4


def test_corrupt_shuffle_preserves_multiset():
    rng = np.random.default_rng(15)
    st = make_state(3, 4, 5, rng)
    out = belief.corrupt(st, "spatial_shuffle", ratio=1.0, rng_seed=2)
    for c in range(3):
        assert np.array_equal(np.sort(out.s[c].ravel()), np.sort(st.s[c].ravel()))
    assert not np.array_equal(out.s, st.s)


def test_corrupt_noise_touches_requested_fraction():
    rng = np.random.default_rng(16)
    st = make_state(8, 16, 16, rng)
    out = belief.corrupt(st, "gaussian_noise", ratio=0.5, intensity=1.0, rng_seed=4)
    frac = np.mean(out.s != st.s)
    assert 0.4 < frac < 0.6


def test_corrupt_deterministic_per_seed():
    rng = np.random.default_rng(17)
    st = make_state(4, 4, 4, rng)
    a = belief.corrupt(st, "gaussian_noise", 0.3, 0.5, rng_seed=9)
    b = belief.corrupt(st, "gaussian_noise", 0.3, 0.5, rng_seed=9)
    c = belief.corrupt(st, "gaussian_noise", 0.3, 0.5, rng_seed=10)
    assert np.array_equal(a.s, b.s)
    assert not np.array_equal(a.s, c.s)


def test_corrupt_leaves_buffers_alone():
    rng = np.random.default_rng(18)
    st = make_state(3, 4, 4, rng)
    st.fatigue.health[:] = 0.5
    st.hebbian.map[:] = 0.7
    out = belief.corrupt(st, "zero_channels", ratio=1.0)
    assert out.fatigue is st.fatigue
    assert out.hebbian is st.hebbian
    assert np.all(out.hebbian.map == 0.7)


def test_corrupt_never_mutates_input():
    rng = np.random.default_rng(19)
    st = make_state(3, 4, 4, rng)
    before = st.s.copy()
    belief.corrupt(st, "spatial_shuffle", ratio=1.0, rng_seed=1)
    belief.corrupt(st, "gaussian_noise", ratio=1.0, rng_seed=1)
    assert np.array_equal(st.s, before)


def test_corrupt_validates_arguments():
    st = belief.fresh_state(2, 2, 2)
    with pytest.raises(ValueError):
        belief.corrupt(st, "zero_channels", ratio=1.5)
    with pytest.raises(ValueError):
        belief.corrupt(st, "melt", ratio=0.5)
