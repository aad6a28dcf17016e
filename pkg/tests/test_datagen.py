"""Disc-scene generation and file-format tests."""

import struct

import numpy as np
import pytest

from fluidlab import datagen


def test_single_frame_bounds_and_shape():
    cfg = datagen.SceneConfig(n_frames=1)
    seq = datagen.generate_sequence(cfg)
    assert seq.shape == (1, 1, 16, 16)
    assert np.all(seq >= 0.0) and np.all(seq <= 1.0)
    assert seq.sum() > 0.0


def test_sequences_are_seed_deterministic():
    cfg = datagen.SceneConfig(n_frames=6, seed=11)
    a = datagen.generate_sequence(cfg)
    b = datagen.generate_sequence(cfg)
    assert np.array_equal(a, b)
    c = datagen.generate_sequence(datagen.SceneConfig(n_frames=6, seed=12))
    assert not np.array_equal(a, c)


def test_reflection_flips_velocity_at_left_wall():
    r = 2.0
    pos = np.array([[r, 5.0]])
    vel = np.array([[-1.0, 0.0]])
    lo = np.array([r, r])
    hi = np.array([13.0, 13.0])
    new_pos, new_vel = datagen.reflect(pos, vel, lo, hi)
    assert new_vel[0, 0] == 1.0
    assert new_pos[0, 0] == r + 1.0
    assert new_pos[0, 1] == 5.0 and new_vel[0, 1] == 0.0


def test_reflection_displacement_bounded():
    rng = np.random.default_rng(0)
    lo = np.array([2.0, 2.0])
    hi = np.array([13.0, 13.0])
    pos = rng.uniform(lo, hi, size=(64, 2))
    angle = rng.uniform(0, 2 * np.pi, 64)
    vel = 1.5 * np.stack([np.cos(angle), np.sin(angle)], axis=1)
    new_pos, _ = datagen.reflect(np.array(pos), vel, lo, hi)
    disp = np.linalg.norm(new_pos - pos, axis=1)
    assert np.all(disp <= 1.5 + 1e-9)
    assert np.all(new_pos >= lo) and np.all(new_pos <= hi)


def test_brightness_varies_smoothly():
    # one disc: no occlusion, so the AA sum only wobbles with subpixel
    # position (overlapping discs legitimately dim the union)
    cfg = datagen.SceneConfig(n_objects=1, n_frames=30, seed=3)
    seq = datagen.generate_sequence(cfg)
    sums = seq.sum(axis=(1, 2, 3))
    rel = np.abs(np.diff(sums)) / sums[:-1]
    assert np.all(rel < 0.05)


def test_scene_validation():
    with pytest.raises(ValueError):
        datagen.generate_sequence(datagen.SceneConfig(object_radius=8.0))
    with pytest.raises(ValueError):
        datagen.generate_sequence(datagen.SceneConfig(speed=9.0))
    with pytest.raises(ValueError):
        datagen.generate_sequence(datagen.SceneConfig(n_objects=0))


def test_pgm_known_bytes(tmp_path):
    frame = np.array([[0.0, 1.0], [0.5, 0.25]])
    path = tmp_path / "f.pgm"
    datagen.write_pgm(path, frame)
    data = path.read_bytes()
    assert data == b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64])


def test_pgm_round_trip_quantization(tmp_path):
    rng = np.random.default_rng(1)
    frame = rng.random((1, 9, 7))
    path = tmp_path / "f.pgm"
    datagen.write_pgm(path, frame)
    back = datagen.read_pgm(path)
    assert back.shape == (1, 9, 7)
    assert np.max(np.abs(back - frame)) <= 1.0 / 510.0 + 1e-12


def test_pgm_zero_frame(tmp_path):
    path = tmp_path / "z.pgm"
    datagen.write_pgm(path, np.zeros((3, 4)))
    data = path.read_bytes()
    assert data.endswith(bytes(12))
    assert np.array_equal(datagen.read_pgm(path), np.zeros((1, 3, 4)))


def test_pgm_parse_errors(tmp_path):
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P6\n2 2\n255\n0000")
    with pytest.raises(ValueError, match="malformed"):
        datagen.read_pgm(bad)
    short = tmp_path / "short.pgm"
    short.write_bytes(b"P5\n2 2\n255\n\x00\x00")
    with pytest.raises(ValueError, match="truncated"):
        datagen.read_pgm(short)


def test_pgm_rejects_multichannel(tmp_path):
    with pytest.raises(ValueError):
        datagen.write_pgm(tmp_path / "x.pgm", np.zeros((2, 4, 4)))


def test_sequence_round_trip_f32(tmp_path):
    rng = np.random.default_rng(2)
    seq = rng.random((5, 2, 6, 7))
    path = tmp_path / "s.fwsq"
    datagen.write_sequence(path, seq)
    back = datagen.read_sequence(path)
    assert back.shape == (5, 2, 6, 7)
    assert np.array_equal(back.astype(np.float32), seq.astype(np.float32))


def test_sequence_empty_is_valid(tmp_path):
    path = tmp_path / "e.fwsq"
    datagen.write_sequence(path, np.zeros((0, 1, 4, 4)))
    back = datagen.read_sequence(path)
    assert back.shape == (0, 1, 4, 4)


def test_sequence_minimal_layout(tmp_path):
    path = tmp_path / "m.fwsq"
    datagen.write_sequence(path, np.full((1, 1, 1, 1), 0.5))
    data = path.read_bytes()
    expect = (
        b"FWSQ"
        + struct.pack("<5I", 1, 1, 1, 1, 1)
        + struct.pack("<f", 0.5)
    )
    assert data == expect
    assert len(data) == 28


def test_sequence_errors(tmp_path):
    p = tmp_path / "x.fwsq"
    p.write_bytes(b"NOPE" + bytes(24))
    with pytest.raises(ValueError, match="magic"):
        datagen.read_sequence(p)
    p.write_bytes(b"FWSQ" + struct.pack("<5I", 9, 1, 1, 1, 1) + struct.pack("<f", 0))
    with pytest.raises(ValueError, match="version"):
        datagen.read_sequence(p)
    p.write_bytes(b"FWSQ" + struct.pack("<5I", 1, 1, 1, 1, 2) + struct.pack("<f", 0))
    with pytest.raises(ValueError, match="size mismatch"):
        datagen.read_sequence(p)
    with pytest.raises(ValueError):
        datagen.write_sequence(tmp_path / "y.fwsq", np.zeros((2, 3, 4)))
