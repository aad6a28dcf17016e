"""Reverse-mode automatic differentiation over numpy arrays.

A :class:`Var` wraps one float64 ndarray. Operations build a graph of vjp
closures; :func:`backward` replays it in reverse topological order. The
engine is array-valued (one node per op, not per scalar) so desk-scale
training windows stay cheap.

Conventions fixed here and relied on by the gradient checks:

* non-smooth points use subgradient 0: ``abs`` at 0, ``relu`` at 0, ``clamp``
  exactly on a bound, channel ``amax`` ties (first index wins);
* ``clamp`` passes gradient only strictly inside the bounds;
* ``stop_grad`` cuts the graph (used for the bio buffers).

Inside :func:`no_grad` no graph is recorded; forwards are plain numpy.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from fluidlab import fieldops, kernels

_GRAD_ENABLED = [True]


@contextmanager
def no_grad():
    """Disable graph recording (inference/analysis fast path)."""
    _GRAD_ENABLED.append(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.pop()


def grad_enabled() -> bool:
    return _GRAD_ENABLED[-1]


class Var:
    """One node: a float64 ndarray plus the closure that backpropagates it."""

    __slots__ = ("value", "grad", "_parents", "_vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def detach(self) -> "Var":
        return Var(self.value)

    def __repr__(self):
        return "Var(shape=%r)" % (self.value.shape,)

    # operator sugar; scalars and ndarrays are lifted to constants
    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return neg(self)


def const(value) -> Var:
    return Var(value)


def _lift(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _node(value, parents, vjp) -> Var:
    if not _GRAD_ENABLED[-1]:
        return Var(value)
    return Var(value, parents, vjp)


def _accum(node: Var, g: np.ndarray) -> None:
    if node.grad is None:
        node.grad = np.zeros_like(node.value)
    node.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backward(root: Var) -> None:
    """Accumulate d(root)/d(node) into .grad for every node feeding root."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node._vjp is not None and node.grad is not None:
            node._vjp(node.grad)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a: Var, b: Var) -> Var:
    def vjp(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(g, b.value.shape))

    return _node(a.value + b.value, (a, b), vjp)


def sub(a: Var, b: Var) -> Var:
    def vjp(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(-g, b.value.shape))

    return _node(a.value - b.value, (a, b), vjp)


def mul(a: Var, b: Var) -> Var:
    def vjp(g):
        _accum(a, _unbroadcast(g * b.value, a.value.shape))
        _accum(b, _unbroadcast(g * a.value, b.value.shape))

    return _node(a.value * b.value, (a, b), vjp)


def div(a: Var, b: Var) -> Var:
    def vjp(g):
        _accum(a, _unbroadcast(g / b.value, a.value.shape))
        _accum(b, _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape))

    return _node(a.value / b.value, (a, b), vjp)


def neg(a: Var) -> Var:
    def vjp(g):
        _accum(a, -g)

    return _node(-a.value, (a,), vjp)


def square(a: Var) -> Var:
    def vjp(g):
        _accum(a, 2.0 * a.value * g)

    return _node(a.value * a.value, (a,), vjp)


# ---------------------------------------------------------------------------
# unary nonlinearities


def exp(a: Var) -> Var:
    out_val = np.exp(a.value)

    def vjp(g):
        _accum(a, g * out_val)

    return _node(out_val, (a,), vjp)


def log(a: Var) -> Var:
    def vjp(g):
        _accum(a, g / a.value)

    return _node(np.log(a.value), (a,), vjp)


def sqrt(a: Var) -> Var:
    out_val = np.sqrt(a.value)

    def vjp(g):
        _accum(a, g / (2.0 * out_val))

    return _node(out_val, (a,), vjp)


def sigmoid(a: Var) -> Var:
    out_val = fieldops.sigmoid(a.value)

    def vjp(g):
        _accum(a, g * out_val * (1.0 - out_val))

    return _node(out_val, (a,), vjp)


def tanh(a: Var) -> Var:
    out_val = np.tanh(a.value)

    def vjp(g):
        _accum(a, g * (1.0 - out_val * out_val))

    return _node(out_val, (a,), vjp)


def softplus(a: Var) -> Var:
    def vjp(g):
        _accum(a, g * fieldops.sigmoid(a.value))

    return _node(fieldops.softplus(a.value), (a,), vjp)


def gelu(a: Var) -> Var:
    def vjp(g):
        _accum(a, g * fieldops.gelu_grad(a.value))

    return _node(fieldops.gelu(a.value), (a,), vjp)


def absolute(a: Var) -> Var:
    def vjp(g):
        _accum(a, g * np.sign(a.value))

    return _node(np.abs(a.value), (a,), vjp)


def relu(a: Var) -> Var:
    def vjp(g):
        _accum(a, g * (a.value > 0.0))

    return _node(np.maximum(a.value, 0.0), (a,), vjp)


def clamp(a: Var, lo: float, hi: float) -> Var:
    """Clip to [lo, hi]; gradient passes only strictly inside the bounds."""

    def vjp(g):
        _accum(a, g * ((a.value > lo) & (a.value < hi)))

    return _node(np.clip(a.value, lo, hi), (a,), vjp)


def stop_grad(a: Var) -> Var:
    return Var(a.value)


# ---------------------------------------------------------------------------
# shape and reduction ops


def reshape(a: Var, shape) -> Var:
    def vjp(g):
        _accum(a, g.reshape(a.value.shape))

    return _node(a.value.reshape(shape), (a,), vjp)


def take_row(a: Var, k: int) -> Var:
    """Select row k of a 2-D array."""

    def vjp(g):
        z = np.zeros_like(a.value)
        z[k] = g
        _accum(a, z)

    return _node(a.value[k], (a,), vjp)


def vsum(a: Var) -> Var:
    def vjp(g):
        _accum(a, np.broadcast_to(g, a.value.shape).copy())

    return _node(a.value.sum(), (a,), vjp)


def vmean(a: Var) -> Var:
    n = a.value.size

    def vjp(g):
        _accum(a, np.broadcast_to(g / n, a.value.shape).copy())

    return _node(a.value.mean(), (a,), vjp)


def spatial_mean(a: Var) -> Var:
    """(C, H, W) -> (C,) mean over positions."""
    _, h, w = a.value.shape
    n = h * w

    def vjp(g):
        _accum(a, np.broadcast_to(g[:, None, None] / n, a.value.shape).copy())

    return _node(a.value.mean(axis=(1, 2)), (a,), vjp)


def expand_chan(v: Var, h: int, w: int) -> Var:
    """(C,) -> (C, H, W) broadcast."""

    def vjp(g):
        _accum(v, g.sum(axis=(1, 2)))

    return _node(np.broadcast_to(v.value[:, None, None], (v.value.shape[0], h, w)).copy(), (v,), vjp)


def amax_channels(a: Var) -> Var:
    """(C, H, W) -> (1, H, W) max over channels; ties route to the first index."""
    idx = np.argmax(a.value, axis=0)[None]
    out_val = np.take_along_axis(a.value, idx, axis=0)

    def vjp(g):
        z = np.zeros_like(a.value)
        np.put_along_axis(z, idx, g, axis=0)
        _accum(a, z)

    return _node(out_val, (a,), vjp)


# ---------------------------------------------------------------------------
# linear maps


def channel_linear(w: Var, x: Var, b: Var | None = None) -> Var:
    """Per-position channel mixing: (o,c) weights applied to (c,) or (c,H,W)."""
    if x.value.ndim == 1:
        out_val = w.value @ x.value
        if b is not None:
            out_val = out_val + b.value

        def vjp(g):
            _accum(w, np.outer(g, x.value))
            _accum(x, w.value.T @ g)
            if b is not None:
                _accum(b, g)

        return _node(out_val, (w, x) if b is None else (w, x, b), vjp)

    c, h, wd = x.value.shape
    flat = x.value.reshape(c, h * wd)
    out_val = (w.value @ flat).reshape(-1, h, wd)
    if b is not None:
        out_val = out_val + b.value[:, None, None]

    def vjp(g):
        g2 = g.reshape(g.shape[0], h * wd)
        _accum(w, g2 @ flat.T)
        _accum(x, (w.value.T @ g2).reshape(c, h, wd))
        if b is not None:
            _accum(b, g2.sum(axis=1))

    return _node(out_val, (w, x) if b is None else (w, x, b), vjp)


def row_map(a_mat: np.ndarray, x: Var) -> Var:
    """Constant matrix along the H axis: (C,H,W) -> (C,H',W)."""

    def vjp(g):
        _accum(x, np.matmul(a_mat.T, g))

    return _node(np.matmul(a_mat, x.value), (x,), vjp)


def col_map(b_mat: np.ndarray, x: Var) -> Var:
    """Constant matrix along the W axis: (C,H,W) -> (C,H,W')."""

    def vjp(g):
        _accum(x, g @ b_mat)

    return _node(x.value @ b_mat.T, (x,), vjp)


# ---------------------------------------------------------------------------
# field ops (stencils, pooling, resizing, finite differences)


def laplacian(x: Var, dilation: int) -> Var:
    xv = np.ascontiguousarray(x.value)

    def vjp(g):
        _accum(x, np.asarray(kernels.laplacian_adjoint(np.ascontiguousarray(g), dilation)))

    return _node(np.asarray(kernels.laplacian(xv, dilation)), (x,), vjp)


def avg_pool(x: Var, out_h: int, out_w: int) -> Var:
    _, h, w = x.value.shape

    def vjp(g):
        _accum(x, fieldops.avg_pool_adjoint(g, h, w))

    return _node(fieldops.avg_pool(x.value, out_h, out_w), (x,), vjp)


def bilinear_resize(x: Var, out_h: int, out_w: int) -> Var:
    _, h, w = x.value.shape

    def vjp(g):
        _accum(x, fieldops.bilinear_resize_adjoint(g, h, w))

    return _node(fieldops.bilinear_resize(x.value, out_h, out_w), (x,), vjp)


def diff_x(x: Var) -> Var:
    def vjp(g):
        gx = np.zeros_like(x.value)
        gx[:, :, 1:] += g[:, :, :-1]
        gx[:, :, :-1] -= g[:, :, :-1]
        _accum(x, gx)

    out_val = np.zeros_like(x.value)
    out_val[:, :, :-1] = x.value[:, :, 1:] - x.value[:, :, :-1]
    return _node(out_val, (x,), vjp)


def diff_y(x: Var) -> Var:
    def vjp(g):
        gy = np.zeros_like(x.value)
        gy[:, 1:, :] += g[:, :-1, :]
        gy[:, :-1, :] -= g[:, :-1, :]
        _accum(x, gy)

    out_val = np.zeros_like(x.value)
    out_val[:, :-1, :] = x.value[:, 1:, :] - x.value[:, :-1, :]
    return _node(out_val, (x,), vjp)


# ---------------------------------------------------------------------------
# fused normalizations


def rms_norm(x: Var, gains: Var, eps: float = 1e-6) -> Var:
    """Per-position channel RMS normalization with learned gains."""
    xv = x.value
    c = xv.shape[0]
    r = np.sqrt((xv * xv).mean(axis=0, keepdims=True) + eps)  # (1,H,W)
    out_val = xv / r * gains.value[:, None, None]

    def vjp(g):
        gv = gains.value[:, None, None]
        # d/dx_k: g_k*gain_k/r - x_k * sum_c(g_c*gain_c*x_c) / (C*r^3)
        inner = (g * gv * xv).sum(axis=0, keepdims=True)
        _accum(x, g * gv / r - xv * inner / (c * r**3))
        _accum(gains, (g * xv / r).sum(axis=(1, 2)))

    return _node(out_val, (x, gains), vjp)


def group_norm(x: Var, gamma: Var, beta: Var, groups: int, eps: float = 1e-5) -> Var:
    """GroupNorm over (C/groups, H, W) blocks, then per-channel scale/shift."""
    c, h, w = x.value.shape
    if c % groups:
        raise ValueError("channels %d not divisible by %d groups" % (c, groups))
    xg = x.value.reshape(groups, c // groups, h, w)
    mu = xg.mean(axis=(1, 2, 3), keepdims=True)
    var = xg.var(axis=(1, 2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mu) * inv).reshape(c, h, w)
    out_val = xhat * gamma.value[:, None, None] + beta.value[:, None, None]

    def vjp(g):
        gxh = (g * gamma.value[:, None, None]).reshape(groups, c // groups, h, w)
        xh = xhat.reshape(groups, c // groups, h, w)
        m1 = gxh.mean(axis=(1, 2, 3), keepdims=True)
        m2 = (gxh * xh).mean(axis=(1, 2, 3), keepdims=True)
        gx = (gxh - m1 - xh * m2) * inv
        _accum(x, gx.reshape(c, h, w))
        _accum(gamma, (g * xhat).sum(axis=(1, 2)))
        _accum(beta, g.sum(axis=(1, 2)))

    return _node(out_val, (x, gamma, beta), vjp)


# ---------------------------------------------------------------------------
# convolutions


def _pad1_replicate(x: np.ndarray) -> np.ndarray:
    return np.pad(x, ((0, 0), (1, 1), (1, 1)), mode="edge")


def _unpad1_replicate_adjoint(gp: np.ndarray) -> np.ndarray:
    """Adjoint of 1-cell replicate padding: fold borders onto edge cells."""
    core = gp[:, 1:-1, 1:-1].copy()
    core[:, 0, :] += gp[:, 0, 1:-1]
    core[:, -1, :] += gp[:, -1, 1:-1]
    core[:, :, 0] += gp[:, 1:-1, 0]
    core[:, :, -1] += gp[:, 1:-1, -1]
    core[:, 0, 0] += gp[:, 0, 0]
    core[:, 0, -1] += gp[:, 0, -1]
    core[:, -1, 0] += gp[:, -1, 0]
    core[:, -1, -1] += gp[:, -1, -1]
    return core


def _im2col3(x: np.ndarray) -> np.ndarray:
    """(C,H,W) -> (C*9, H*W) of 3x3 replicate-padded patches."""
    c, h, w = x.shape
    xp = _pad1_replicate(x)
    cols = np.empty((c, 9, h, w))
    for ky in range(3):
        for kx in range(3):
            cols[:, ky * 3 + kx] = xp[:, ky : ky + h, kx : kx + w]
    return cols.reshape(c * 9, h * w)


def _col2im3(gcols: np.ndarray, c: int, h: int, w: int) -> np.ndarray:
    gc = gcols.reshape(c, 9, h, w)
    gp = np.zeros((c, h + 2, w + 2))
    for ky in range(3):
        for kx in range(3):
            gp[:, ky : ky + h, kx : kx + w] += gc[:, ky * 3 + kx]
    return _unpad1_replicate_adjoint(gp)


def conv3x3(w: Var, b: Var | None, x: Var) -> Var:
    """Same-size 3x3 convolution (correlation), replicate border padding.

    w has shape (O, C, 3, 3); the flattened patch order is (channel, ky, kx).
    """
    o = w.value.shape[0]
    c, h, wd = x.value.shape
    cols = _im2col3(x.value)
    w2 = w.value.reshape(o, c * 9)
    out_val = (w2 @ cols).reshape(o, h, wd)
    if b is not None:
        out_val = out_val + b.value[:, None, None]

    def vjp(g):
        g2 = g.reshape(o, h * wd)
        _accum(w, (g2 @ cols.T).reshape(w.value.shape))
        _accum(x, _col2im3(w2.T @ g2, c, h, wd))
        if b is not None:
            _accum(b, g2.sum(axis=1))

    return _node(out_val, (w, x) if b is None else (w, x, b), vjp)


def patch_embed(w: Var, b: Var, x: Var, patch: int) -> Var:
    """Non-overlapping patch projection: (C,H,W) -> (d, H/p, W/p).

    Weights have shape (d, C*p*p); the patch vector order is (channel, dy, dx).
    """
    c, h, wd = x.value.shape
    p = patch
    if h % p or wd % p:
        raise ValueError("frame %r not divisible by patch %d" % ((h, wd), p))
    hp, wp = h // p, wd // p
    cols = (
        x.value.reshape(c, hp, p, wp, p)
        .transpose(0, 2, 4, 1, 3)
        .reshape(c * p * p, hp * wp)
    )
    out_val = (w.value @ cols + b.value[:, None]).reshape(-1, hp, wp)

    def vjp(g):
        g2 = g.reshape(g.shape[0], hp * wp)
        _accum(w, g2 @ cols.T)
        _accum(b, g2.sum(axis=1))
        gcols = w.value.T @ g2
        gx = (
            gcols.reshape(c, p, p, hp, wp)
            .transpose(0, 3, 1, 4, 2)
            .reshape(c, h, wd)
        )
        _accum(x, gx)

    return _node(out_val, (w, b, x), vjp)


# ---------------------------------------------------------------------------
# composite helpers (thin, but used in several modules)


def mse(a: Var, b: Var) -> Var:
    return vmean(square(sub(a, b)))
