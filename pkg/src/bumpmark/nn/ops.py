"""Tensor kernels: same-padded stride-1 convolution, 2x2 max pool, ReLU, MSE.

Tensors are numpy arrays in (N, C, H, W) layout. Convolution is
cross-correlation (the usual CNN convention) with odd kernels and zero
padding of (k-1)/2, so spatial size is preserved. All kernels have explicit
backward companions; correctness is pinned by finite-difference tests.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(C, H, W) -> (C*k*k, H*W) patch matrix with same-padding."""
    c, h, w = x.shape
    pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    s0, s1, s2 = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp, shape=(c, k, k, h, w), strides=(s0, s1, s2, s1, s2), writeable=False
    )
    return windows.reshape(c * k * k, h * w)


def _check_conv_shapes(x, kernel, bias):
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError("conv2d expects (N,C,H,W) input and (O,C,k,k) kernel")
    if kernel.shape[2] != kernel.shape[3] or kernel.shape[2] % 2 == 0:
        raise ShapeError(f"kernel must be square and odd-sized, got {kernel.shape}")
    if x.shape[1] != kernel.shape[1]:
        raise ShapeError(
            f"channel mismatch: input {x.shape[1]} vs kernel {kernel.shape[1]}"
        )
    if bias.shape != (kernel.shape[0],):
        raise ShapeError(f"bias shape {bias.shape} != ({kernel.shape[0]},)")


def conv2d_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-padded stride-1 cross-correlation; output (N, O, H, W)."""
    _check_conv_shapes(x, kernel, bias)
    n, _, h, w = x.shape
    o, c, k, _ = kernel.shape
    wmat = kernel.reshape(o, c * k * k)
    out = np.empty((n, o, h, w), dtype=x.dtype)
    for i in range(n):
        out[i] = (wmat @ _im2col(x[i], k)).reshape(o, h, w)
    out += bias.reshape(1, o, 1, 1)
    return out


def conv2d_backward(x: np.ndarray, kernel: np.ndarray, dout: np.ndarray):
    """Gradients (dx, dkernel, dbias) for conv2d_forward.

    dx is the same-padded correlation of dout with the spatially flipped,
    channel-transposed kernel; dkernel accumulates patch outer products.
    """
    n, _, h, w = x.shape
    o, c, k, _ = kernel.shape
    if dout.shape != (n, o, h, w):
        raise ShapeError(f"dout shape {dout.shape} != {(n, o, h, w)}")
    dbias = dout.sum(axis=(0, 2, 3))
    dkernel = np.zeros((o, c * k * k), dtype=kernel.dtype)
    for i in range(n):
        dkernel += dout[i].reshape(o, h * w) @ _im2col(x[i], k).T
    flipped = kernel[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    dx = conv2d_forward(dout, np.ascontiguousarray(flipped), np.zeros(c, dtype=kernel.dtype))
    return dx, dkernel.reshape(kernel.shape), dbias


def maxpool2_forward(x: np.ndarray):
    """2x2 max pool, stride 2. Returns (y, argmax) for the backward pass."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2 needs even spatial dims, got {h}x{w}")
    win = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(n, c, h // 2, w // 2, 4)
    arg = win.argmax(axis=-1)  # first max wins ties (row-major in-window order)
    y = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return y, arg


def maxpool2_backward(dout: np.ndarray, arg: np.ndarray, in_shape) -> np.ndarray:
    n, c, h, w = in_shape
    dwin = np.zeros((n, c, h // 2, w // 2, 4), dtype=dout.dtype)
    np.put_along_axis(dwin, arg[..., None], dout[..., None], axis=-1)
    dwin = dwin.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return dwin.reshape(n, c, h, w)


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(dout: np.ndarray, x: np.ndarray) -> np.ndarray:
    return dout * (x > 0)


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """(mean squared error, gradient wrt pred)."""
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")
    diff = pred.astype(np.float64) - target.astype(np.float64)
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad.astype(pred.dtype)
