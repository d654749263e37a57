import dataclasses
import json

import numpy as np
import pytest

from bumpmark.dataset import template_to_dict
from bumpmark.decode import RetrievalParams, decode_map
from bumpmark.experiment import (
    ExperimentConfig,
    evaluate_manifest,
    overlay_diagnostics,
    run_ablation,
    run_experiment,
)
from bumpmark.nn.train import TrainConfig
from bumpmark.scene import default_template
from bumpmark.textures import TEXTURE_DIVERSITY_ORDER


def _micro_config(seed=3, count=6, oracle=True):
    tmpl = default_template(6, render_size=(256, 256), j_start=0.6, j_height=0.3)
    return ExperimentConfig(
        template=tmpl,
        count=count,
        seed=seed,
        train=TrainConfig(patch=64, batch=2, epochs=1, drop_epoch=1, width_scale=0.125),
        beta=0.55,
        square_px_per_cell=32,
        oracle=oracle,
    )


def test_config_from_dict_round_trip():
    cfg = _micro_config()
    doc = {
        "dataset": {
            "count": cfg.count,
            "seed": cfg.seed,
            "template": template_to_dict(cfg.template),
        },
        "train": dict(cfg.train.__dict__),
        "retrieval": {"beta": cfg.beta, "square_px_per_cell": cfg.square_px_per_cell},
        "oracle": True,
    }
    json.dumps(doc)
    back = ExperimentConfig.from_dict(doc)
    assert back == cfg


def test_oracle_experiment_perfect_scores(tmp_path):
    cfg = _micro_config()
    report = run_experiment(cfg, tmp_path / "run")
    assert report.recall == 1.0
    assert report.precision == 1.0
    assert (tmp_path / "run" / "report.txt").exists()
    assert not (tmp_path / "run" / "FAILED").exists()


def test_oracle_experiment_deterministic_report(tmp_path):
    cfg = _micro_config()
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "report.txt").read_bytes() == (
        tmp_path / "b" / "report.txt"
    ).read_bytes()


def test_trained_experiment_writes_artifacts(tmp_path):
    cfg = dataclasses.replace(_micro_config(), oracle=False)
    run_experiment(cfg, tmp_path / "run")
    for name in ("weights.bin", "loss_curve.txt", "report.txt"):
        assert (tmp_path / "run" / name).exists(), name


def test_evaluate_manifest_counts_errors(tiny_dataset):
    # absurd params: landmarks can never be found at this hue tolerance
    params = RetrievalParams(m=6, square_size=192, chroma_min=1.5)
    report = evaluate_manifest(tiny_dataset["manifest"], params, oracle=True)
    assert len(report.per_image) == 4
    assert all(s.status == "LandmarkNotFound" for s in report.per_image)
    assert report.counts == (0, 0, 0)


def test_ablation_shares_test_set_and_reports(tmp_path):
    cfg = _micro_config(count=6, oracle=True)
    results = run_ablation(cfg, "dataset_size", [0.5, 1.0], tmp_path / "abl")
    assert set(results) == {"0.5", "1.0"}
    shared = (tmp_path / "abl" / "shared_test" / "manifest.json").read_bytes()
    assert shared  # one shared test manifest on disk
    body = (tmp_path / "abl" / "ablation_report.txt").read_text()
    assert "ablation axis: dataset_size" in body
    assert "monotone_increasing:" in body


def test_ablation_rejects_bad_input(tmp_path):
    from bumpmark.errors import BumpmarkError

    cfg = _micro_config()
    with pytest.raises(BumpmarkError):
        run_ablation(cfg, "nonsense", [0.5, 1.0], tmp_path / "x")
    with pytest.raises(BumpmarkError):
        run_ablation(cfg, "dataset_size", [1.0], tmp_path / "y")


def test_overlay_diagnostics_panels(small_scene, tmp_path):
    tmpl = small_scene["template"]
    params = RetrievalParams.from_layout(tmpl.layout, small_scene["m"])
    diag = decode_map(small_scene["img"], small_scene["gt"], params, seed=0)
    path = tmp_path / "overlay.png"
    overlay_diagnostics(small_scene["img"], diag, path)
    from PIL import Image

    with Image.open(path) as im:
        w, h = im.size
    assert w == 4 * h  # four square panels side by side

    # oracle scene: accepted centroids == visible 1-bits
    assert len(diag.centroids) == int(small_scene["bits"].sum())


def test_texture_fraction_restricts_pool_to_least_structured():
    cfg = dataclasses.replace(_micro_config(), texture_fraction=0.5)
    tmpl = cfg.train_template()
    assert len(tmpl.texture_pool) == max(1, round(0.5 * len(cfg.template.texture_pool)))
    # subset comes from the diversity ranking, restricted to the base pool
    ranked = [f for f in TEXTURE_DIVERSITY_ORDER if f in cfg.template.texture_pool]
    assert list(tmpl.texture_pool) == ranked[: len(tmpl.texture_pool)]
    assert set(tmpl.texture_pool) <= set(cfg.template.texture_pool)
