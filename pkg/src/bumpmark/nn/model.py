"""The confidence-map regressor.

Five same-padded convolutions (kernels 9,7,7,7,1; channels 3->48->96->48->
24->1) with ReLU activations, and a 2x2 max pool after each of the first two
layers, so the output map is H/4 x W/4. Fully convolutional: any input whose
sides are divisible by 4 works.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import DataError, ShapeError
from .ops import (
    conv2d_forward,
    conv2d_backward,
    maxpool2_forward,
    maxpool2_backward,
    relu_forward,
    relu_backward,
)

# (C_in, C_out, kernel, pooled-after?)
LAYER_SPECS = ((3, 48, 9, True), (48, 96, 7, True), (96, 48, 7, False), (48, 24, 7, False), (24, 1, 1, False))

_MAGIC = b"BMCN"
_VERSION = 1


def _scaled_specs(width_scale: float):
    if width_scale == 1.0:
        return LAYER_SPECS
    specs = []
    prev = 3
    for cin, cout, k, pooled in LAYER_SPECS:
        out = max(1, int(round(cout * width_scale))) if cout != 1 else 1
        specs.append((prev, out, k, pooled))
        prev = out
    return tuple(specs)


class ConfidenceNet:
    """Weights + forward/backward for the bump-confidence regressor."""

    def __init__(self, seed: int = 0, width_scale: float = 1.0, dtype=np.float32):
        self.specs = _scaled_specs(width_scale)
        self.dtype = dtype
        rng = np.random.Generator(np.random.PCG64(seed))
        self.weights = []
        self.biases = []
        for cin, cout, k, _ in self.specs:
            std = np.sqrt(2.0 / (cin * k * k))  # fan-in scaling for ReLU stacks
            self.weights.append(rng.normal(0.0, std, size=(cout, cin, k, k)).astype(dtype))
            self.biases.append(np.zeros(cout, dtype=dtype))
        self._cache = None

    # -- parameter plumbing ------------------------------------------------
    def params(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_params(self, params: list) -> None:
        for i in range(len(self.weights)):
            self.weights[i] = params[2 * i]
            self.biases[i] = params[2 * i + 1]

    def copy_params(self) -> list:
        return [p.copy() for p in self.params()]

    # -- forward / backward --------------------------------------------------
    def forward(self, x: np.ndarray, keep_cache: bool = False) -> np.ndarray:
        """Raw (unclamped) map, shape (N, 1, H/4, W/4)."""
        if x.ndim != 4 or x.shape[1] != self.specs[0][0]:
            raise ShapeError(f"expected (N,{self.specs[0][0]},H,W), got {x.shape}")
        if x.shape[2] % 4 or x.shape[3] % 4:
            raise ShapeError(f"spatial dims must be divisible by 4, got {x.shape[2:]}")
        cache = []
        h = x.astype(self.dtype, copy=False)
        for li, (_, _, _, pooled) in enumerate(self.specs):
            conv_in = h
            h = conv2d_forward(h, self.weights[li], self.biases[li])
            pre_act = h
            last = li == len(self.specs) - 1
            if not last:
                h = relu_forward(h)
            pool_arg = pool_shape = None
            if pooled:
                pool_shape = h.shape
                h, pool_arg = maxpool2_forward(h)
            cache.append((conv_in, pre_act, pool_arg, pool_shape))
        self._cache = cache if keep_cache else None
        return h

    def backward(self, dout: np.ndarray) -> list:
        """Gradients for every parameter, same order as params()."""
        if self._cache is None:
            raise ShapeError("backward called without a cached forward pass")
        grads = [None] * (2 * len(self.specs))
        d = dout
        for li in range(len(self.specs) - 1, -1, -1):
            conv_in, pre_act, pool_arg, pool_shape = self._cache[li]
            if pool_arg is not None:
                d = maxpool2_backward(d, pool_arg, pool_shape)
            if li != len(self.specs) - 1:
                d = relu_backward(d, pre_act)
            d, dw, db = conv2d_backward(conv_in, self.weights[li], d)
            grads[2 * li] = dw
            grads[2 * li + 1] = db
        self._cache = None
        return grads

    def infer(self, img: np.ndarray) -> np.ndarray:
        """Confidence map in [0, 1] for an (H, W, 3) image in [0, 1]."""
        x = np.transpose(img, (2, 0, 1))[None].astype(self.dtype)
        y = self.forward(x)
        return np.clip(y[0, 0], 0.0, 1.0)


def save_weights(path, net: ConfidenceNet) -> None:
    """Versioned little-endian binary; byte-exact round-trip."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(net.specs)))
        for w, b in zip(net.weights, net.biases):
            fh.write(struct.pack("<IIII", *w.shape))
            fh.write(w.astype("<f4").tobytes())
            fh.write(b.astype("<f4").tobytes())


def load_weights(path) -> ConfidenceNet:
    try:
        with open(path, "rb") as fh:
            if fh.read(4) != _MAGIC:
                raise DataError(f"not a weights file: {path}")
            version, n_layers = struct.unpack("<II", fh.read(8))
            if version != _VERSION:
                raise DataError(f"unsupported weights version {version}")
            weights, biases, specs = [], [], []
            prev_pool = {0: True, 1: True}
            for li in range(n_layers):
                o, c, kh, kw = struct.unpack("<IIII", fh.read(16))
                w = np.frombuffer(fh.read(4 * o * c * kh * kw), dtype="<f4").reshape(o, c, kh, kw)
                b = np.frombuffer(fh.read(4 * o), dtype="<f4")
                weights.append(w.copy())
                biases.append(b.copy())
                specs.append((c, o, kh, prev_pool.get(li, False)))
    except (OSError, struct.error) as exc:
        raise DataError(f"cannot read weights {path}: {exc}") from exc
    net = ConfidenceNet.__new__(ConfidenceNet)
    net.specs = tuple(specs)
    net.dtype = np.float32
    net.weights = weights
    net.biases = biases
    net._cache = None
    return net
