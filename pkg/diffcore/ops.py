"""
The layer vocabulary of the classifier and the handful of elementwise and
reduction operations the losses need. Every op preserves the dtype of its
inputs (float32 in training, float64 under the gradient checker).
"""
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from diffcore.tensor import ShapeError, Tensor, constant, make_node

BN_EPS = 1e-5
# Upper bound on the bytes of one unfolded batch chunk.
IM2COL_BYTES = 1 << 27


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = constant(a), constant(b)
    _same_shape(a, b, 'add')
    return make_node(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = constant(a), constant(b)
    _same_shape(a, b, 'sub')
    return make_node(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = constant(a), constant(b)
    _same_shape(a, b, 'mul')
    return make_node(
        a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data),
    )


def scale(a: Tensor, factor: float) -> Tensor:
    factor = a.data.dtype.type(factor)
    return make_node(a.data * factor, (a,), lambda g: (g * factor,))


def square(a: Tensor) -> Tensor:
    return make_node(a.data * a.data, (a,), lambda g: (2 * g * a.data,))


def total(a: Tensor) -> Tensor:
    """Sum of all elements, as a scalar."""
    return make_node(
        np.sum(a.data), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),),
    )


def row_sum(a: Tensor) -> Tensor:
    assert a.data.ndim == 2, a.shape

    def backward_fn(g):
        return (np.repeat(g[:, None], a.shape[1], axis=1),)

    return make_node(a.data.sum(axis=1), (a,), backward_fn)


def take_rows(a: Tensor, start: int, stop: int) -> Tensor:
    assert 0 <= start <= stop <= a.shape[0], (start, stop, a.shape)

    def backward_fn(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        return (full,)

    return make_node(a.data[start:stop], (a,), backward_fn)


def take_entries(a: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """Picks a[rows[k], cols[k]] for every k."""

    def backward_fn(g):
        full = np.zeros_like(a.data)
        np.add.at(full, (rows, cols), g)
        return (full,)

    return make_node(a.data[rows, cols], (a,), backward_fn)


def log_clamped(p: Tensor, eps: float) -> Tensor:
    eps = p.data.dtype.type(eps)
    clamped = np.maximum(p.data, eps)
    live = p.data > eps

    def backward_fn(g):
        return (np.where(live, g / clamped, 0).astype(p.data.dtype),)

    return make_node(np.log(clamped), (p,), backward_fn)


def relu(x: Tensor) -> Tensor:
    live = x.data > 0
    return make_node(
        np.where(live, x.data, 0).astype(x.data.dtype),
        (x,),
        lambda g: (np.where(live, g, 0).astype(g.dtype),),
    )


def _batch_chunk(n: int, row_bytes: int) -> int:
    return max(1, min(n, IM2COL_BYTES // max(row_bytes, 1)))


def conv2d(x: Tensor, w: Tensor, stride: int = 1) -> Tensor:
    """
    Same-padded convolution with an odd square kernel, as one im2col matrix
    product per chunk of the batch.
    """
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d: expected 4-d input and kernel, got {x.shape}, {w.shape}")
    n, c, h, wd = x.shape
    f, c_k, kh, kw = w.shape
    if c != c_k:
        raise ShapeError(f"conv2d: input has {c} channels, kernel expects {c_k}")
    pad = kh // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    # N x C x Ho x Wo x kh x kw view, no copy until the product.
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = windows.shape[2:4]
    chunk = _batch_chunk(n, c * kh * kw * ho * wo * xp.itemsize)

    def tap(i: int, j: int) -> Tuple[slice, slice]:
        return (slice(i, i + stride * (ho - 1) + 1, stride),
                slice(j, j + stride * (wo - 1) + 1, stride))

    out = np.empty((n, f, ho, wo), dtype=x.data.dtype)
    for s in range(0, n, chunk):
        part = np.tensordot(windows[s:s + chunk], w.data, axes=([1, 4, 5], [1, 2, 3]))
        out[s:s + chunk] = part.transpose(0, 3, 1, 2)

    def backward_fn(g):
        dw = np.zeros_like(w.data)
        dxp = np.zeros_like(xp)
        for s in range(0, n, chunk):
            gs = g[s:s + chunk]
            dw += np.tensordot(gs, windows[s:s + chunk], axes=([0, 2, 3], [0, 2, 3]))
            unfolded = np.tensordot(gs, w.data, axes=([1], [0]))
            for i in range(kh):
                for j in range(kw):
                    rows, columns = tap(i, j)
                    dxp[s:s + chunk, :, rows, columns] += unfolded[..., i, j].transpose(0, 3, 1, 2)
        dx = dxp[:, :, pad:pad + h, pad:pad + wd]
        return (np.ascontiguousarray(dx), dw)

    return make_node(out, (x, w), backward_fn)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    train: bool,
    momentum: float = 0.1,
) -> Tuple[Tensor, np.ndarray, np.ndarray]:
    """
    Per-channel normalisation of an NCHW tensor. In train mode the batch
    statistics are used and updated running statistics are returned; in
    eval mode the running statistics are used unchanged.
    """
    if x.data.ndim != 4 or gamma.shape != (x.shape[1],):
        raise ShapeError(f"batch_norm: input {x.shape}, scale {gamma.shape}")
    dtype = x.data.dtype
    eps = dtype.type(BN_EPS)
    axes = (0, 2, 3)
    m = x.shape[0] * x.shape[2] * x.shape[3]

    if train:
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        unbiased = var * (m / max(m - 1, 1))
        mom = dtype.type(momentum)
        new_mean = ((1 - mom) * running_mean + mom * mean).astype(running_mean.dtype)
        new_var = ((1 - mom) * running_var + mom * unbiased).astype(running_var.dtype)
    else:
        mean = running_mean.astype(dtype)
        var = running_var.astype(dtype)
        new_mean, new_var = running_mean, running_var

    inv_std = 1 / np.sqrt(var + eps)
    xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]

    def backward_fn(g):
        dbeta = g.sum(axis=axes)
        dgamma = (g * xhat).sum(axis=axes)
        gx = g * gamma.data[None, :, None, None]
        if train:
            dx = (
                inv_std[None, :, None, None] / m
                * (m * gx
                   - gx.sum(axis=axes)[None, :, None, None]
                   - xhat * (gx * xhat).sum(axis=axes)[None, :, None, None])
            )
        else:
            dx = gx * inv_std[None, :, None, None]
        return (dx.astype(dtype), dgamma, dbeta)

    return make_node(out.astype(dtype), (x, gamma, beta), backward_fn), new_mean, new_var


def global_avg_pool(x: Tensor) -> Tensor:
    n, c, h, w = x.shape

    def backward_fn(g):
        return (np.broadcast_to(g[:, :, None, None] / (h * w), x.shape).astype(g.dtype),)

    return make_node(x.data.mean(axis=(2, 3)), (x,), backward_fn)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w.T + b with w shaped (out_features, in_features)."""
    if x.data.ndim != 2 or w.shape[1] != x.shape[1] or b.shape != (w.shape[0],):
        raise ShapeError(f"linear: input {x.shape}, weight {w.shape}, bias {b.shape}")
    out = x.data @ w.data.T + b.data

    def backward_fn(g):
        return (g @ w.data, g.T @ x.data, g.sum(axis=0))

    return make_node(out, (x, w, b), backward_fn)


def softmax(z: Tensor) -> Tensor:
    """Row-wise softmax of an (N, C) tensor."""
    if z.data.ndim != 2:
        raise ShapeError(f"softmax: expected (N, C), got {z.shape}")
    shifted = z.data - z.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)

    def backward_fn(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return make_node(p, (z,), backward_fn)
