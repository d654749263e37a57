"""Command-line interface.

Subcommands mirror the pipeline stages: ``gen`` renders a dataset,
``train`` fits the confidence network, ``infer``/``decode``/``retrieve``
run the inference and decoding stages on single images, and
``eval``/``ablate`` drive full experiments.

Exit codes: 0 success, 2 invalid arguments, 3 data error, 4 retrieval
error, 5 internal numeric error.
"""

import argparse
import json
import sys

import numpy as np

from .dataset import (
    generate_dataset,
    load_image,
    load_manifest,
    load_entry_arrays,
    load_map,
    save_map,
    template_from_dict,
)
from .decode import Diagnostics, RetrievalParams, decode_map, retrieve
from .errors import (
    BumpmarkError,
    DataError,
    InvalidArgument,
    NumericError,
    RetrievalError,
)
from .experiment import ExperimentConfig, overlay_diagnostics, run_ablation, run_experiment
from .nn.model import load_weights, save_weights
from .nn.train import TrainConfig, save_curve, train_network
from .watermark import save_bits

EXIT_OK = 0
EXIT_INVALID_ARGS = 2
EXIT_DATA_ERROR = 3
EXIT_RETRIEVAL_ERROR = 4
EXIT_NUMERIC_ERROR = 5


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


def _load_params(path) -> RetrievalParams:
    doc = _load_json(path)
    try:
        return RetrievalParams(**doc)
    except TypeError as exc:
        raise InvalidArgument(f"bad retrieval params in {path}: {exc}") from exc


def _load_array_image(path) -> np.ndarray:
    try:
        return load_image(path)
    except OSError as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc


def _save_diag(diag: Diagnostics, img: np.ndarray, out_dir) -> None:
    import os

    os.makedirs(out_dir, exist_ok=True)
    # per-stage rasters: registered map (.map), binary map (.bin), and the
    # binary map with accepted centroids marked (.ctr)
    if diag.warped is not None:
        save_map(os.path.join(out_dir, "stage.map.png"), diag.warped)
    if diag.binary is not None:
        save_map(os.path.join(out_dir, "stage.bin.png"), diag.binary.astype(np.float64))
        _save_centroid_panel(diag, os.path.join(out_dir, "stage.ctr.png"))
    overlay_diagnostics(img, diag, os.path.join(out_dir, "overlay.png"))
    summary = {
        "otsu": diag.otsu,
        "threshold": diag.threshold,
        "degenerate_histogram": diag.degenerate_histogram,
        "used_grid_fallback": diag.used_grid_fallback,
        "n_regions": len(diag.regions),
        "n_centroids": 0 if diag.centroids is None else int(len(diag.centroids)),
        "landmarks_px": None
        if diag.landmarks_px is None
        else [[float(v) for v in p] for p in diag.landmarks_px],
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _save_centroid_panel(diag: Diagnostics, path) -> None:
    from PIL import Image, ImageDraw

    arr = (np.clip(diag.binary.astype(np.float64), 0.0, 1.0) * 255).astype(np.uint8)
    im = Image.fromarray(np.repeat(arr[..., None], 3, axis=2))
    if diag.centroids is not None and len(diag.centroids):
        draw = ImageDraw.Draw(im)
        for x, y in diag.centroids:
            draw.ellipse([(x - 3, y - 3), (x + 3, y + 3)], outline=(255, 0, 0), width=1)
    im.save(path)


def _cmd_gen(args) -> int:
    doc = _load_json(args.template)
    tmpl = template_from_dict(doc)
    generate_dataset(tmpl, args.count, args.seed, args.out)
    return EXIT_OK


def _cmd_train(args) -> int:
    doc = _load_json(args.config)
    try:
        cfg = TrainConfig(**doc)
    except TypeError as exc:
        raise InvalidArgument(f"bad train config in {args.config}: {exc}") from exc
    manifest = load_manifest(args.manifest)
    pairs = [load_entry_arrays(manifest, e)[:2] for e in manifest.entries]
    net, curve = train_network(pairs, cfg)
    save_weights(args.out, net)
    save_curve(str(args.out) + ".curve.txt", curve)
    return EXIT_OK


def _cmd_infer(args) -> int:
    net = load_weights(args.weights)
    img = _load_array_image(args.image)
    save_map(args.out, net.infer(img))
    return EXIT_OK


def _cmd_decode(args) -> int:
    params = _load_params(args.params)
    img = _load_array_image(args.image)
    try:
        conf = load_map(args.map)
    except OSError as exc:
        raise DataError(f"cannot read map {args.map}: {exc}") from exc
    diag = decode_map(img, conf, params)
    save_bits(args.out, diag.bits)
    if args.diagnostics:
        _save_diag(diag, img, args.diagnostics)
    return EXIT_OK


def _cmd_retrieve(args) -> int:
    params = _load_params(args.params)
    net = load_weights(args.weights)
    img = _load_array_image(args.image)
    diag = retrieve(img, net, params)
    save_bits(args.out, diag.bits)
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.oracle:
        import dataclasses

        cfg = dataclasses.replace(cfg, oracle=True)
    report = run_experiment(cfg, args.out)
    def fmt(v):
        return "n/a" if v is None else f"{v:.4f}"

    print(
        f"recall={fmt(report.recall)} precision={fmt(report.precision)} "
        f"exact_match={fmt(report.exact_match_rate)}"
    )
    return EXIT_OK


def _parse_levels(axis: str, text: str) -> list:
    out = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            raise InvalidArgument("empty ablation level")
        if axis == "augmentation":
            if piece not in ("on", "off"):
                raise InvalidArgument("augmentation levels must be 'on' or 'off'")
            out.append(piece == "on")
        else:
            try:
                out.append(float(piece))
            except ValueError as exc:
                raise InvalidArgument(f"bad ablation level {piece!r}") from exc
    return out


def _cmd_ablate(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    levels = _parse_levels(args.axis, args.levels)
    run_ablation(cfg, args.axis, levels, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bumpmark",
        description="Synthesize, train on, and decode bump-embossed watermark plates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="render a randomized dataset")
    p.add_argument("--template", required=True)
    p.add_argument("--count", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("train", help="train the confidence network")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--deterministic", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="predict a confidence map for one image")
    p.add_argument("--weights", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("decode", help="decode bits from an image and confidence map")
    p.add_argument("--image", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--diagnostics")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("retrieve", help="full network + decode pipeline on one image")
    p.add_argument("--weights", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_retrieve)

    p = sub.add_parser("eval", help="run a full generate/train/evaluate experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--oracle", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="run an ablation sweep over one axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True, choices=["dataset_size", "texture_pool", "augmentation"])
    p.add_argument("--levels", required=True, help="comma-separated levels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad arguments, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_ARGS
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except RetrievalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RETRIEVAL_ERROR
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC_ERROR
    except BumpmarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
