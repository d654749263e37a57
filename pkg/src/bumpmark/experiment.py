"""Experiment orchestration: generate -> train -> retrieve -> score.

An experiment generates disjoint-seed train/validation/test datasets,
trains the network, runs the full retrieval pipeline on the test images and
reports pooled bit recall/precision. Ablations rerun the experiment while
varying one axis (dataset size, texture pool, photometric augmentation) and
share the test set across levels. Everything is seed-deterministic; reports
contain no timestamps so repeat runs are byte-identical.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, ImageDraw

from .dataset import (
    augment_photometric,
    generate_dataset,
    load_entry_arrays,
    template_from_dict,
    template_to_dict,
)
from .decode import Diagnostics, RetrievalParams, decode_map, retrieve
from .errors import BumpmarkError, RetrievalError
from .metrics import ImageScore, MetricsReport, bit_metrics
from .nn.model import save_weights
from .nn.train import TrainConfig, save_curve_full, train_network
from .scene import SceneTemplate
from .textures import TEXTURE_DIVERSITY_ORDER

ABLATION_AXES = ("dataset_size", "texture_pool", "augmentation")


@dataclass
class ExperimentConfig:
    template: SceneTemplate
    count: int = 200
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    beta: float = 0.35
    square_px_per_cell: int = 32
    # ablation switches
    texture_fraction: float = 1.0
    dataset_fraction: float = 1.0
    oracle: bool = False
    # deterministic per-scene brightness/contrast perturbation applied to
    # evaluation images only, simulating the exposure spread of real camera
    # captures; 0 disables, 1 spans the training augmentation ranges
    test_exposure_jitter: float = 0.0

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        ds = doc.get("dataset", {})
        tmpl = template_from_dict(ds.get("template", {}))
        train = TrainConfig(**doc.get("train", {}))
        retr = doc.get("retrieval", {})
        abl = doc.get("ablation", {})
        return cls(
            template=tmpl,
            count=ds.get("count", 200),
            seed=ds.get("seed", 0),
            train=train,
            beta=retr.get("beta", 0.35),
            square_px_per_cell=retr.get("square_px_per_cell", 32),
            texture_fraction=abl.get("texture_fraction", 1.0),
            dataset_fraction=abl.get("dataset_fraction", 1.0),
            oracle=doc.get("oracle", False),
            test_exposure_jitter=doc.get("evaluation", {}).get("exposure_jitter", 0.0),
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def retrieval_params(self) -> RetrievalParams:
        return RetrievalParams.from_layout(
            self.template.layout,
            self.template.m,
            beta=self.beta,
            square_size=self.square_px_per_cell * self.template.m,
        )

    def train_template(self) -> SceneTemplate:
        """Template for the training set, with the texture-pool ablation applied."""
        if self.texture_fraction >= 1.0:
            return self.template
        pool = self.template.texture_pool
        n = max(1, int(round(len(pool) * self.texture_fraction)))
        # restrict to the least-structured families first so a reduced pool
        # is systematically narrow rather than an arbitrary subset
        ranked = [f for f in TEXTURE_DIVERSITY_ORDER if f in pool]
        ranked += [f for f in pool if f not in ranked]
        d = template_to_dict(self.template)
        d["texture_pool"] = ranked[:n]
        return template_from_dict(d)


def _derived_seed(seed: int, tag: str) -> int:
    key = zlib.crc32(tag.encode("utf-8"))
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(key,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _split_counts(count: int):
    n_test = max(1, int(round(count * 0.1)))
    n_val = max(1, int(round(count * 0.1)))
    n_train = max(1, count - n_test - n_val)
    return n_train, n_val, n_test


def evaluate_manifest(manifest, params: RetrievalParams, net=None, oracle=False,
                      exposure_jitter: float = 0.0) -> MetricsReport:
    """Retrieve and score every entry; oracle mode decodes the ground truth map.

    ``exposure_jitter`` > 0 perturbs each test image's brightness/contrast
    with a deterministic per-entry draw, emulating the exposure variation of
    real captures; at 1.0 the draws span the training augmentation ranges.
    """
    report = MetricsReport()
    for entry in manifest.entries:
        img, gt, bits = load_entry_arrays(manifest, entry)
        if exposure_jitter > 0.0 and not oracle:
            rng = np.random.Generator(np.random.PCG64(entry.seed ^ 0x5EED))
            b = float(rng.uniform(-0.3, 0.3)) * exposure_jitter
            c = 1.0 + (float(rng.uniform(0.6, 1.6)) - 1.0) * exposure_jitter
            img = augment_photometric(img, b, min(max(c, 0.5), 2.0))
        try:
            if oracle:
                diag = decode_map(img, gt, params, seed=entry.seed)
            else:
                diag = retrieve(img, net, params, seed=entry.seed)
            score = bit_metrics(diag.bits, bits)
        except RetrievalError as exc:
            score = ImageScore(0, int(bits.sum()), 0, None, None, False,
                               status=type(exc).__name__)
        report.per_image.append(score)
    return report


def _write_report(path, report: MetricsReport, header: str) -> None:
    def fmt(v):
        return "undefined" if v is None else f"{v:.4f}"

    lines = [header]
    tp, fn, fp = report.counts
    lines.append(f"pooled: TP={tp} FN={fn} FP={fp}")
    lines.append(f"recall={fmt(report.recall)} precision={fmt(report.precision)}")
    lines.append(f"exact_match_rate={fmt(report.exact_match_rate)}")
    lines.append("per-image: idx TP FN FP recall precision exact status")
    for i, s in enumerate(report.per_image):
        lines.append(
            f"{i} {s.tp} {s.fn} {s.fp} {fmt(s.recall)} {fmt(s.precision)} "
            f"{int(s.exact)} {s.status}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def run_experiment(cfg: ExperimentConfig, out_dir, test_manifest=None) -> MetricsReport:
    """Full pipeline run; artifacts land in out_dir.

    A pre-generated test manifest can be injected so ablation levels share
    their test set.
    """
    os.makedirs(out_dir, exist_ok=True)
    try:
        n_train, n_val, n_test = _split_counts(cfg.count)
        n_train = max(1, int(round(n_train * cfg.dataset_fraction)))

        if test_manifest is None:
            test_manifest = generate_dataset(
                cfg.template, n_test, _derived_seed(cfg.seed, "test"),
                os.path.join(out_dir, "test"),
            )
        params = cfg.retrieval_params()

        if cfg.oracle:
            report = evaluate_manifest(test_manifest, params, oracle=True)
            _write_report(os.path.join(out_dir, "report.txt"), report, "mode: oracle")
            return report

        tmpl_train = cfg.train_template()
        train_manifest = generate_dataset(
            tmpl_train, n_train, _derived_seed(cfg.seed, "train"),
            os.path.join(out_dir, "train"),
        )
        val_manifest = generate_dataset(
            cfg.template, n_val, _derived_seed(cfg.seed, "val"),
            os.path.join(out_dir, "val"),
        )

        train_pairs = [load_entry_arrays(train_manifest, e)[:2] for e in train_manifest.entries]
        val_pairs = [load_entry_arrays(val_manifest, e)[:2] for e in val_manifest.entries]
        net, curve = train_network(train_pairs, cfg.train, val_pairs)
        save_weights(os.path.join(out_dir, "weights.bin"), net)
        save_curve_full(os.path.join(out_dir, "loss_curve.txt"), curve)

        report = evaluate_manifest(
            test_manifest, params, net=net,
            exposure_jitter=cfg.test_exposure_jitter,
        )
        _write_report(os.path.join(out_dir, "report.txt"), report, "mode: trained")
        return report
    except BumpmarkError:
        with open(os.path.join(out_dir, "FAILED"), "w", encoding="utf-8") as fh:
            fh.write("experiment failed; partial outputs retained\n")
        raise


def run_ablation(cfg: ExperimentConfig, axis: str, levels: list, out_dir) -> dict:
    """run_experiment once per level, holding everything else (and seeds) fixed."""
    if axis not in ABLATION_AXES:
        raise BumpmarkError(f"unknown ablation axis {axis!r}")
    if len(levels) < 2:
        raise BumpmarkError("ablation needs at least 2 levels")
    os.makedirs(out_dir, exist_ok=True)

    # one shared test set for every level
    _, _, n_test = _split_counts(cfg.count)
    test_manifest = generate_dataset(
        cfg.template, n_test, _derived_seed(cfg.seed, "test"),
        os.path.join(out_dir, "shared_test"),
    )

    results = {}
    for level in levels:
        sub = dict(
            dataset_size={"dataset_fraction": float(level)},
            texture_pool={"texture_fraction": float(level)},
            augmentation={},
        )[axis]
        level_cfg = ExperimentConfig(
            template=cfg.template,
            count=cfg.count,
            seed=cfg.seed,
            train=TrainConfig(**{**cfg.train.__dict__}),
            beta=cfg.beta,
            square_px_per_cell=cfg.square_px_per_cell,
            texture_fraction=sub.get("texture_fraction", cfg.texture_fraction),
            dataset_fraction=sub.get("dataset_fraction", cfg.dataset_fraction),
            test_exposure_jitter=cfg.test_exposure_jitter,
        )
        if axis == "augmentation":
            level_cfg.train.augment = bool(level)
        name = f"{axis}_{level}"
        report = run_experiment(level_cfg, os.path.join(out_dir, name), test_manifest)
        results[str(level)] = report

    lines = [f"ablation axis: {axis}", "level recall precision"]
    recalls = []
    for level in levels:
        r = results[str(level)]
        rec = -1.0 if r.recall is None else r.recall
        prec = -1.0 if r.precision is None else r.precision
        recalls.append(rec)
        lines.append(f"{level} {rec:.4f} {prec:.4f}")
    lines.append(f"monotone_increasing: {int(all(b >= a for a, b in zip(recalls, recalls[1:])))}")
    lines.append(f"last_level_best: {int(recalls[-1] == max(recalls))}")
    with open(os.path.join(out_dir, "ablation_report.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return results


def overlay_diagnostics(img: np.ndarray, diag: Diagnostics, path) -> None:
    """Four side-by-side panels: input, confidence map, binary map, centroids."""
    h = img.shape[0]

    def to_im(arr):
        arr = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)
        if arr.ndim == 2:
            arr = np.repeat(arr[..., None], 3, axis=2)
        im = Image.fromarray((arr * 255).astype(np.uint8))
        return im.resize((h, h), Image.NEAREST) if im.size != (h, h) else im

    panels = [
        to_im(img),
        to_im(diag.confidence_map if diag.confidence_map is not None else np.zeros((h, h))),
        to_im(diag.binary if diag.binary is not None else np.zeros((h, h))),
    ]
    marked = panels[2].copy()
    if diag.centroids is not None and len(diag.centroids):
        sc = h / diag.binary.shape[0]
        draw = ImageDraw.Draw(marked)
        for x, y in diag.centroids:
            draw.ellipse(
                [(x * sc - 3, y * sc - 3), (x * sc + 3, y * sc + 3)],
                outline=(255, 0, 0), width=1,
            )
    panels.append(marked)
    canvas = Image.new("RGB", (h * 4, h))
    for i, p in enumerate(panels):
        canvas.paste(p, (i * h, 0))
    canvas.save(path)
