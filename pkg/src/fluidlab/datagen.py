"""Synthetic bouncing-disc sequences and the two file formats the
experiments write: binary PGM frames and the FWSQ float32 container.

Everything is seeded and bit-exact so runs reproduce offline.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

FWSQ_MAGIC = b"FWSQ"
FWSQ_VERSION = 1
_HEADER = struct.Struct("<5I")  # version, C, H, W, T


@dataclass
class SceneConfig:
    """Bouncing bright discs on a black background."""

    width: int = 16
    height: int = 16
    n_objects: int = 2
    object_radius: float = 2.0
    speed: float = 1.0
    n_frames: int = 20
    seed: int = 0


def _validate(cfg: SceneConfig) -> None:
    if cfg.width < 2 or cfg.height < 2:
        raise ValueError("frame must be at least 2x2")
    if cfg.n_objects < 1 or cfg.n_frames < 0:
        raise ValueError("need at least one object and n_frames >= 0")
    side = min(cfg.width, cfg.height)
    if 2.0 * cfg.object_radius >= side - 1:
        raise ValueError("objects must fit within the frame")
    if cfg.speed >= side / 2.0:
        raise ValueError("speed must stay below half the frame side")


def reflect(pos: np.ndarray, vel: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Advance one frame with elastic border reflection.

    Positions fold back across the wall they crossed and the velocity
    component flips; the per-axis displacement never exceeds |v|.
    """
    pos = pos + vel
    vel = np.array(vel)
    over = pos > hi
    pos[over] = (2.0 * np.broadcast_to(hi, pos.shape) - pos)[over]
    vel[over] = -vel[over]
    under = pos < lo
    pos[under] = (2.0 * np.broadcast_to(lo, pos.shape) - pos)[under]
    vel[under] = -vel[under]
    return pos, vel


def generate_sequence(cfg: SceneConfig) -> np.ndarray:
    """Render cfg.n_frames anti-aliased frames, shape (T, 1, H, W) in [0,1].

    Per pixel the disc coverage is clamp(radius - distance + 0.5, 0, 1);
    overlapping discs take the pointwise maximum.
    """
    _validate(cfg)
    r = float(cfg.object_radius)
    rng = np.random.default_rng(cfg.seed)
    lo = np.array([r, r])
    hi = np.array([cfg.width - 1.0 - r, cfg.height - 1.0 - r])
    pos = rng.uniform(lo, hi, size=(cfg.n_objects, 2))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=cfg.n_objects)
    vel = cfg.speed * np.stack([np.cos(angle), np.sin(angle)], axis=1)

    yy, xx = np.meshgrid(
        np.arange(cfg.height, dtype=np.float64),
        np.arange(cfg.width, dtype=np.float64),
        indexing="ij",
    )
    frames = np.zeros((cfg.n_frames, 1, cfg.height, cfg.width))
    for t in range(cfg.n_frames):
        img = frames[t, 0]
        for x, y in pos:
            dist = np.sqrt((xx - x) ** 2 + (yy - y) ** 2)
            np.maximum(img, np.clip(r - dist + 0.5, 0.0, 1.0), out=img)
        pos, vel = reflect(pos, vel, lo, hi)
    return frames


def write_pgm(path, frame) -> None:
    """Binary PGM (P5, maxval 255); expects one channel with values in [0,1]."""
    a = np.asarray(frame, dtype=np.float64)
    if a.ndim == 3:
        if a.shape[0] != 1:
            raise ValueError("PGM output needs a single channel")
        a = a[0]
    if a.ndim != 2:
        raise ValueError("PGM output needs a 2-D frame")
    payload = np.clip(np.round(a * 255.0), 0.0, 255.0).astype(np.uint8)
    header = b"P5\n%d %d\n255\n" % (a.shape[1], a.shape[0])
    with open(path, "wb") as f:
        f.write(header + payload.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise ValueError("malformed PGM header: not P5")
    idx = 2
    fields = []
    while len(fields) < 3:
        while idx < len(data) and data[idx : idx + 1].isspace():
            idx += 1
        start = idx
        while idx < len(data) and not data[idx : idx + 1].isspace():
            idx += 1
        if start == idx:
            raise ValueError("malformed PGM header: missing size fields")
        try:
            fields.append(int(data[start:idx]))
        except ValueError:
            raise ValueError("malformed PGM header: non-numeric field")
    idx += 1  # the single whitespace byte terminating the header
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError("unsupported PGM maxval %d" % maxval)
    payload = data[idx : idx + w * h]
    if len(payload) < w * h:
        raise ValueError("truncated PGM payload")
    img = np.frombuffer(payload, dtype=np.uint8).reshape(h, w)
    return (img / 255.0)[None]


def write_sequence(path, seq) -> None:
    """FWSQ container: magic, version u32, C/H/W/T u32, little-endian f32."""
    arr = np.ascontiguousarray(np.asarray(seq, dtype="<f4"))
    if arr.ndim != 4:
        raise ValueError("sequence must be shaped (T, C, H, W)")
    t, c, h, w = arr.shape
    with open(path, "wb") as f:
        f.write(FWSQ_MAGIC)
        f.write(_HEADER.pack(FWSQ_VERSION, c, h, w, t))
        f.write(arr.tobytes())


def read_sequence(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != FWSQ_MAGIC:
        raise ValueError("bad sequence magic")
    if len(data) < 4 + _HEADER.size:
        raise ValueError("sequence header truncated")
    version, c, h, w, t = _HEADER.unpack_from(data, 4)
    if version != FWSQ_VERSION:
        raise ValueError("unsupported sequence version %d" % version)
    expect = 4 + _HEADER.size + 4 * c * h * w * t
    if len(data) != expect:
        raise ValueError(
            "sequence payload size mismatch: %d != %d" % (len(data), expect)
        )
    flat = np.frombuffer(data, dtype="<f4", offset=4 + _HEADER.size)
    return flat.reshape(t, c, h, w).astype(np.float64)
