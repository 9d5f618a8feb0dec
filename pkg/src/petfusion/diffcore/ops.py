"""Differentiable operations on Tensor.

Every op returns a new Tensor whose backward closure yields
(parent, parent_gradient) pairs. All math is float32; exp inputs are
clamped to [-30, 30] and softmax is max-subtracted so finite inputs never
produce NaN.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ContractError, ShapeError
from .tensor import Tensor, as_tensor, make_result

EXP_CLAMP = 30.0
_GELU_C = math.sqrt(2.0 / math.pi)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted gradient back down to `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast")

    def bw(g):
        return ((a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(g, b.data.shape)))

    return make_result(data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} do not broadcast")

    def bw(g):
        return ((a, _unbroadcast(g, a.data.shape)), (b, _unbroadcast(-g, b.data.shape)))

    return make_result(data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast")

    def bw(g):
        return (
            (a, _unbroadcast(g * b.data, a.data.shape)),
            (b, _unbroadcast(g * a.data, b.data.shape)),
        )

    return make_result(data, (a, b), bw)


def exp(a) -> Tensor:
    a = as_tensor(a)
    clamped = np.clip(a.data, -EXP_CLAMP, EXP_CLAMP)
    data = np.exp(clamped)
    inside = (np.abs(a.data) <= EXP_CLAMP).astype(np.float32)

    def bw(g):
        return ((a, g * data * inside),)

    return make_result(data, (a,), bw)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    data = np.tanh(a.data)

    def bw(g):
        return ((a, g * (1.0 - data * data)),)

    return make_result(data, (a,), bw)


def gelu(a) -> Tensor:
    """tanh-approximation GELU; smooth, cheap, FD-checkable."""
    a = as_tensor(a)
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    data = 0.5 * x * (1.0 + t)

    def bw(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
        d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
        return ((a, g * d),)

    return make_result(data, (a,), bw)


# ---------------------------------------------------------------------------
# reductions and shape plumbing
# ---------------------------------------------------------------------------

def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims, dtype=np.float32)

    def bw(g):
        if axis is None:
            return ((a, np.broadcast_to(g, a.data.shape).astype(np.float32)),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return ((a, np.broadcast_to(gg, a.data.shape).astype(np.float32)),)

    return make_result(data, (a,), bw)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def bw(g):
        return ((a, g.reshape(a.data.shape)),)

    return make_result(data, (a,), bw)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    data = np.ascontiguousarray(a.data.transpose(axes))
    inv = np.argsort(axes)

    def bw(g):
        return ((a, np.ascontiguousarray(g.transpose(inv))),)

    return make_result(data, (a,), bw)


def concat(parts, axis=0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        out = []
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            out.append((p, np.ascontiguousarray(g[tuple(idx)])))
        return tuple(out)

    return make_result(data, tuple(parts), bw)


def narrow(a, axis, start, stop) -> Tensor:
    """Contiguous slice along one axis."""
    a = as_tensor(a)
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, stop)
    data = np.ascontiguousarray(a.data[tuple(idx)])

    def bw(g):
        full = np.zeros_like(a.data)
        full[tuple(idx)] = g
        return ((a, full),)

    return make_result(data, (a,), bw)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.shape} and {b.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ for {a.shape} @ {b.shape}")
    try:
        data = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError(f"matmul: batch dims differ for {a.shape} @ {b.shape}")

    def bw(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return ((a, _unbroadcast(ga, a.data.shape)), (b, _unbroadcast(gb, b.data.shape)))

    return make_result(data, (a, b), bw)


def softmax(a, axis=-1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        return ((a, data * (g - dot)),)

    return make_result(data, (a,), bw)


def layernorm(a, gamma, beta, axis=-1, eps=1e-5) -> Tensor:
    """Normalize over `axis` (the channel axis), then affine scale/shift.

    gamma/beta are 1-d of length a.shape[axis].
    """
    a, gamma, beta = as_tensor(a), as_tensor(gamma), as_tensor(beta)
    n = a.data.shape[axis]
    if gamma.data.shape != (n,) or beta.data.shape != (n,):
        raise ShapeError(
            f"layernorm affine shapes {gamma.shape}/{beta.shape} do not match axis extent {n}"
        )
    mu = a.data.mean(axis=axis, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    bshape = [1] * a.data.ndim
    bshape[axis] = n
    gview = gamma.data.reshape(bshape)
    data = xhat * gview + beta.data.reshape(bshape)

    def bw(g):
        red = tuple(i for i in range(g.ndim) if i != (axis % g.ndim))
        g_gamma = (g * xhat).sum(axis=red)
        g_beta = g.sum(axis=red)
        gx_hat = g * gview
        m1 = gx_hat.mean(axis=axis, keepdims=True)
        m2 = (gx_hat * xhat).mean(axis=axis, keepdims=True)
        ga = inv * (gx_hat - m1 - xhat * m2)
        return (
            (a, ga.astype(np.float32)),
            (gamma, g_gamma.astype(np.float32)),
            (beta, g_beta.astype(np.float32)),
        )

    return make_result(data, (a, gamma, beta), bw)


# ---------------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------------

def _im2col(xp: np.ndarray, kh: int, kw: int, oh: int, ow: int, stride: int) -> np.ndarray:
    n, c = xp.shape[:2]
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=np.float32)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + oh * stride : stride, j : j + ow * stride : stride]
    return cols.reshape(n, c * kh * kw, oh * ow)


def _col2im(gcols: np.ndarray, xp_shape, kh, kw, oh, ow, stride) -> np.ndarray:
    n, c = xp_shape[:2]
    g6 = gcols.reshape(n, c, kh, kw, oh, ow)
    gxp = np.zeros(xp_shape, dtype=np.float32)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i : i + oh * stride : stride, j : j + ow * stride : stride] += g6[:, :, i, j]
    return gxp


def conv2d(x, w, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of NCHW input with KCkhkw kernels."""
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d expects 4-d input/kernel, got {x.shape} and {w.shape}")
    n, c, h, wd = x.data.shape
    k, ck, kh, kw = w.data.shape
    if ck != c:
        raise ShapeError(f"conv2d: input shape {x.shape} vs kernel shape {w.shape} (channel mismatch)")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ContractError(f"conv2d kernel extents must be odd, got {kh}x{kw}")
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    if oh <= 0 or ow <= 0:
        raise ShapeError(f"conv2d: kernel {w.shape} does not fit input {x.shape} at padding={padding}")
    if padding:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        xp = x.data
    cols = _im2col(xp, kh, kw, oh, ow, stride)
    w2 = w.data.reshape(k, c * kh * kw)
    out = np.matmul(w2[None, :, :], cols).reshape(n, k, oh, ow)

    def bw(g):
        g2 = g.reshape(n, k, oh * ow)
        gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.data.shape)
        gcols = np.matmul(w2.T[None, :, :], g2)
        gxp = _col2im(gcols, xp.shape, kh, kw, oh, ow, stride)
        gx = gxp[:, :, padding : padding + h, padding : padding + wd] if padding else gxp
        return ((x, np.ascontiguousarray(gx)), (w, gw))

    return make_result(out, (x, w), bw)


def depthwise_conv2d(x, w, padding: int = 0) -> Tensor:
    """Per-channel 2-d cross-correlation; kernel shape (C, kh, kw), stride 1."""
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 3:
        raise ShapeError(f"depthwise_conv2d expects NCHW + (C,kh,kw), got {x.shape} and {w.shape}")
    n, c, h, wd = x.data.shape
    cw, kh, kw = w.data.shape
    if cw != c:
        raise ShapeError(f"depthwise_conv2d: input {x.shape} vs kernel {w.shape} (channel mismatch)")
    oh = h + 2 * padding - kh + 1
    ow = wd + 2 * padding - kw + 1
    if oh <= 0 or ow <= 0:
        raise ShapeError(f"depthwise_conv2d: kernel {w.shape} does not fit input {x.shape}")
    if padding:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        xp = x.data
    cols = _im2col(xp, kh, kw, oh, ow, 1).reshape(n, c, kh * kw, oh * ow)
    wk = w.data.reshape(c, kh * kw)
    out = np.einsum("nckl,ck->ncl", cols, wk, optimize=True).reshape(n, c, oh, ow)

    def bw(g):
        g2 = g.reshape(n, c, oh * ow)
        gw = np.einsum("nckl,ncl->ck", cols, g2, optimize=True).reshape(w.data.shape)
        gcols = wk[None, :, :, None] * g2[:, :, None, :]
        gxp = _col2im(gcols.reshape(n, c * kh * kw, oh * ow), xp.shape, kh, kw, oh, ow, 1)
        gx = gxp[:, :, padding : padding + h, padding : padding + wd] if padding else gxp
        return ((x, np.ascontiguousarray(gx)), (w, gw))

    return make_result(out, (x, w), bw)


def upsample2x(x) -> Tensor:
    """Nearest-neighbour 2x spatial upsampling of NCHW."""
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeError(f"upsample2x expects NCHW, got {x.shape}")
    data = x.data.repeat(2, axis=2).repeat(2, axis=3)
    n, c, h, w = x.data.shape

    def bw(g):
        return ((x, g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5))),)

    return make_result(data, (x,), bw)
