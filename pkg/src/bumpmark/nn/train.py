"""Mini-batch training loop for the confidence regressor.

Targets are the binary ground-truth maps average-pooled by 4 to the network
output resolution. Per-epoch training and validation losses are recorded;
the weights with the best validation loss are returned. With a fixed seed
the loop is fully deterministic (data order, crops, augmentation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, InvalidArgument
from .adam import AdamState, adam_step
from .model import ConfidenceNet
from .ops import mse_loss
from ..dataset import augment_photometric


@dataclass
class TrainConfig:
    patch: int = 256
    batch: int = 4
    epochs: int = 60
    lr: float = 1e-4
    lr_drop: float = 1e-5
    drop_epoch: int = 45
    seed: int = 0
    augment: bool = True
    val_fraction: float = 0.1  # used only when no explicit val set is given
    width_scale: float = 1.0

    def __post_init__(self):
        if min(self.patch, self.batch, self.epochs) <= 0:
            raise InvalidArgument("patch/batch/epochs must be positive")
        if self.drop_epoch > self.epochs:
            raise InvalidArgument("drop_epoch must be <= epochs")


def avgpool4(gt: np.ndarray) -> np.ndarray:
    """Downsample an (H, W) map by 4x average pooling."""
    h, w = gt.shape
    return gt.reshape(h // 4, 4, w // 4, 4).mean(axis=(1, 3))


def _batch_from(pairs, idx, cfg: TrainConfig, rng: np.random.Generator):
    xs, ys = [], []
    for i in idx:
        img, gt = pairs[i]
        h, w = img.shape[:2]
        y0 = int(rng.integers(0, h - cfg.patch + 1)) if h > cfg.patch else 0
        x0 = int(rng.integers(0, w - cfg.patch + 1)) if w > cfg.patch else 0
        ci = img[y0 : y0 + cfg.patch, x0 : x0 + cfg.patch]
        cg = gt[y0 : y0 + cfg.patch, x0 : x0 + cfg.patch]
        if cfg.augment:
            b = float(rng.uniform(-0.3, 0.3))
            c = float(rng.uniform(0.6, 1.6))
            ci = augment_photometric(ci, b, c)
        xs.append(np.transpose(ci, (2, 0, 1)))
        ys.append(avgpool4(cg)[None])
    return np.stack(xs).astype(np.float32), np.stack(ys).astype(np.float32)


def _val_loss(net: ConfidenceNet, pairs, cfg: TrainConfig) -> float:
    """MSE over center crops of the validation images."""
    total = 0.0
    for img, gt in pairs:
        h, w = img.shape[:2]
        s = min(cfg.patch, h, w)
        y0, x0 = (h - s) // 2, (w - s) // 2
        x = np.transpose(img[y0 : y0 + s, x0 : x0 + s], (2, 0, 1))[None].astype(np.float32)
        t = avgpool4(gt[y0 : y0 + s, x0 : x0 + s])[None, None].astype(np.float32)
        loss, _ = mse_loss(net.forward(x), t)
        total += loss
    return total / len(pairs)


def train_network(train_pairs, cfg: TrainConfig, val_pairs=None):
    """Train on (image, ground-truth) array pairs.

    Returns (net with best-validation weights, curve) where curve is a list
    of (epoch, train_loss, val_loss, lr) tuples.
    """
    if not train_pairs:
        raise DataError("empty training set")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))

    if val_pairs is None:
        n_val = max(1, int(round(len(train_pairs) * cfg.val_fraction)))
        if n_val >= len(train_pairs):
            raise DataError("training set too small to split a validation set")
        order = rng.permutation(len(train_pairs))
        val_pairs = [train_pairs[i] for i in order[:n_val]]
        train_pairs = [train_pairs[i] for i in order[n_val:]]

    net = ConfidenceNet(seed=cfg.seed, width_scale=cfg.width_scale)
    state = AdamState(lr=cfg.lr)
    best = (np.inf, net.copy_params())
    curve = []
    steps = max(1, len(train_pairs) // cfg.batch)
    for epoch in range(cfg.epochs):
        state.lr = cfg.lr_drop if epoch >= cfg.drop_epoch else cfg.lr
        order = rng.permutation(len(train_pairs))
        ep_loss = 0.0
        for s in range(steps):
            idx = order[s * cfg.batch : (s + 1) * cfg.batch]
            if len(idx) == 0:
                continue
            x, t = _batch_from(train_pairs, idx, cfg, rng)
            y = net.forward(x, keep_cache=True)
            loss, dy = mse_loss(y, t)
            grads = net.backward(dy)
            adam_step(net.params(), grads, state)
            ep_loss += loss
        ep_loss /= steps
        vl = _val_loss(net, val_pairs, cfg)
        curve.append((epoch, ep_loss, vl, state.lr))
        if vl < best[0]:
            best = (vl, net.copy_params())
    net.set_params(best[1])
    return net, curve


def save_curve(path, curve) -> None:
    """Plain-text loss curve: epoch and training loss columns."""
    with open(path, "w", encoding="utf-8") as fh:
        for epoch, train_loss, _, _ in curve:
            fh.write(f"{epoch} {train_loss:.8e}\n")


def save_curve_full(path, curve) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# epoch train_loss val_loss lr\n")
        for epoch, tl, vl, lr in curve:
            fh.write(f"{epoch} {tl:.8e} {vl:.8e} {lr:.3e}\n")
