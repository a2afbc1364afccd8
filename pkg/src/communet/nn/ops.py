"""Differentiable primitives on NCHW tensors."""

from __future__ import annotations

import numpy as np

from .autograd import Tensor, apply, as_tensor


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """Same-padded patches as a (N*H*W, k*k*C) matrix, columns ordered (dy, dx, c)."""
    n, c, h, w = x.shape
    p = k // 2
    xp = np.zeros((n, h + 2 * p, w + 2 * p, c), dtype=x.dtype)
    xp[:, p:p + h, p:p + w, :] = x.transpose(0, 2, 3, 1)
    cols = np.empty((n, h, w, k, k, c), dtype=x.dtype)
    for dy in range(k):
        for dx in range(k):
            cols[:, :, :, dy, dx, :] = xp[:, dy:dy + h, dx:dx + w, :]
    return cols.reshape(n * h * w, k * k * c)


def _col2im(cols: np.ndarray, shape, k: int) -> np.ndarray:
    """Adjoint of :func:`_im2col`: scatter-add patch gradients back to NCHW."""
    n, c, h, w = shape
    p = k // 2
    cols = cols.reshape(n, h, w, k, k, c)
    xp = np.zeros((n, h + 2 * p, w + 2 * p, c), dtype=cols.dtype)
    for dy in range(k):
        for dx in range(k):
            xp[:, dy:dy + h, dx:dx + w, :] += cols[:, :, :, dy, dx, :]
    return np.ascontiguousarray(xp[:, p:p + h, p:p + w, :].transpose(0, 3, 1, 2))


def conv2d(x, w, b) -> Tensor:
    """Square odd-kernel convolution, stride 1, same padding.

    Weights are (out_c, in_c, k, k); output spatial dims equal the input's.
    """
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.data.ndim != 4:
        raise ValueError(f"conv2d expects NCHW input, got shape {x.shape}")
    o, c, kh, kw = w.shape
    if kh != kw or kh % 2 == 0:
        raise ValueError(f"conv2d needs a square odd kernel, got {kh}x{kw}")
    if x.shape[1] != c:
        raise ValueError(f"channel mismatch: input has {x.shape[1]}, weights expect {c}")
    if b.shape != (o,):
        raise ValueError(f"bias shape {b.shape} does not match {o} output channels")
    n, _, h, wd = x.shape
    cols = _im2col(x.data, kh)
    wmat = w.data.transpose(2, 3, 1, 0).reshape(kh * kw * c, o)
    out = cols @ wmat + b.data
    out = np.ascontiguousarray(out.reshape(n, h, wd, o).transpose(0, 3, 1, 2))

    def backward(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(n * h * wd, o)
        gx = gw = gb = None
        if x.requires_grad:
            gx = _col2im(gmat @ wmat.T, x.shape, kh)
        if w.requires_grad:
            gw = (cols.T @ gmat).reshape(kh, kw, c, o).transpose(3, 2, 0, 1)
        if b.requires_grad:
            gb = gmat.sum(axis=0)
        return gx, gw, gb

    return apply(out, (x, w, b), backward)


def maxpool2(x) -> Tensor:
    """2x2 max pooling, stride 2.  Ties route the gradient to the first cell (row-major)."""
    x = as_tensor(x)
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2 needs even spatial dims, got {h}x{w}")
    cells = x.data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    cells = cells.reshape(n, c, h // 2, w // 2, 4)
    idx = cells.argmax(axis=-1)[..., None]
    out = np.take_along_axis(cells, idx, axis=-1)[..., 0]

    def backward(g):
        gc = np.zeros(cells.shape, dtype=g.dtype)
        np.put_along_axis(gc, idx, g[..., None], axis=-1)
        gc = gc.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return (gc.reshape(n, c, h, w),)

    return apply(out, (x,), backward)


def upconv2(x, w, b) -> Tensor:
    """2x2 transposed convolution with stride 2; weights are (in_c, out_c, 2, 2)."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    n, c, h, wd = x.shape
    ci, co = w.shape[:2]
    if w.shape[2:] != (2, 2):
        raise ValueError(f"upconv2 needs 2x2 weights, got {w.shape[2:]}")
    if c != ci:
        raise ValueError(f"channel mismatch: input has {c}, weights expect {ci}")
    out = np.tensordot(x.data, w.data, axes=([1], [0]))  # (N, H, W, O, 2, 2)
    out = out.transpose(0, 3, 1, 4, 2, 5).reshape(n, co, 2 * h, 2 * wd)
    out = out + b.data[None, :, None, None]

    def backward(g):
        g6 = g.reshape(n, co, h, 2, wd, 2)
        gx = gw = gb = None
        if x.requires_grad:
            gx = np.tensordot(g6, w.data, axes=([1, 3, 5], [1, 2, 3]))  # (N, H, W, C)
            gx = np.ascontiguousarray(gx.transpose(0, 3, 1, 2))
        if w.requires_grad:
            gw = np.tensordot(x.data, g6, axes=([0, 2, 3], [0, 2, 4]))
        if b.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return gx, gw, gb

    return apply(out, (x, w, b), backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    active = x.data > 0
    out = np.where(active, x.data, 0).astype(x.dtype, copy=False)
    return apply(out, (x,), lambda g: (g * active,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    # tanh form never overflows; the clip keeps float32 outputs strictly inside (0, 1)
    info = np.finfo(x.dtype if x.dtype.kind == "f" else np.float64)
    s = np.clip(0.5 * (1.0 + np.tanh(0.5 * x.data)), info.tiny, 1.0 - info.epsneg)
    return apply(s, (x,), lambda g: (g * s * (1.0 - s),))


def concat_channels(*tensors) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.data.ndim != 4 or t.shape[0] != ref[0] or t.shape[2:] != ref[2:]:
            raise ValueError(f"cannot concat shapes {ref} and {t.shape} along channels")
    splits = np.cumsum([t.shape[1] for t in tensors])[:-1]
    out = np.concatenate([t.data for t in tensors], axis=1)
    return apply(out, tensors, lambda g: np.split(g, splits, axis=1))


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"add needs identical shapes, got {a.shape} and {b.shape}")
    return apply(a.data + b.data, (a, b), lambda g: (g, g))
