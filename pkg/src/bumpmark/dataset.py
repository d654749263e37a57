"""Dataset generation, manifests and image file round-trips.

Images are 8-bit RGB PNG; ground truth is 8-bit grayscale PNG holding
exactly {0, 255}. The manifest is a JSON document listing, per entry, the
relative file paths, the per-frame seed, the clock value and the full
serialized scene so any frame can be re-rendered bit-exactly.
"""

from __future__ import annotations

import json
import os
import shutil
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DataError, InvalidArgument
from .scene import SceneTemplate, SceneConfig, scene_at_clock, default_template
from .render import render_image, render_ground_truth, composite_background, procedural_background
from .watermark import (
    GridLayout,
    layout_geometry,
    random_bit_matrix,
    save_bits,
    load_bits,
)

GENERATOR_VERSION = 1


def save_image(path, rgb: np.ndarray) -> None:
    arr = np.clip(np.asarray(rgb), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="RGB").save(path)


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0


def save_map(path, values: np.ndarray) -> None:
    arr = np.clip(np.asarray(values), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L").save(path)


def load_map(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float32) / 255.0


def augment_photometric(img: np.ndarray, brightness: float, contrast: float) -> np.ndarray:
    """v' = clamp(c*(v - 0.5) + 0.5 + b); b in [-0.5, 0.5], c in [0.5, 2]."""
    if not -0.5 <= brightness <= 0.5:
        raise InvalidArgument(f"brightness out of range: {brightness}")
    if not 0.5 <= contrast <= 2.0:
        raise InvalidArgument(f"contrast out of range: {contrast}")
    out = contrast * (np.asarray(img, dtype=np.float32) - 0.5) + 0.5 + brightness
    return np.clip(out, 0.0, 1.0)


def random_crop_pair(img: np.ndarray, gt: np.ndarray, size: int, seed: int):
    """Same crop window applied to image and ground truth."""
    h, w = img.shape[:2]
    if gt.shape[:2] != (h, w):
        raise InvalidArgument("image and ground truth dimensions differ")
    if size > min(h, w):
        raise InvalidArgument(f"crop size {size} exceeds image {h}x{w}")
    rng = np.random.Generator(np.random.PCG64(seed))
    y0 = int(rng.integers(0, h - size + 1))
    x0 = int(rng.integers(0, w - size + 1))
    return img[y0 : y0 + size, x0 : x0 + size], gt[y0 : y0 + size, x0 : x0 + size]


@dataclass
class ManifestEntry:
    image: str
    ground_truth: str
    bits: str
    seed: int
    clock: float
    scene: dict


@dataclass
class DatasetManifest:
    root: str
    seed: int
    generator_version: int
    template: dict
    entries: list


def template_to_dict(tmpl: SceneTemplate) -> dict:
    d = {
        "m": tmpl.m,
        "frames_per_cycle": tmpl.frames_per_cycle,
        "j_start": tmpl.j_start,
        "j_height": tmpl.j_height,
        "camera_fov_deg": tmpl.camera_fov_deg,
        "base_camera_distance": tmpl.base_camera_distance,
        "shift_range": tmpl.shift_range,
        "orbit_radius": tmpl.orbit_radius,
        "texture_pool": list(tmpl.texture_pool),
        "render_size": list(tmpl.render_size),
        "supersample": tmpl.supersample,
        "ambient": tmpl.ambient,
        "layout": {
            "pitch": tmpl.layout.pitch,
            "bump_radius": tmpl.layout.bump_radius,
            "plate_half_extent": tmpl.layout.plate_half_extent,
            "plate_thickness": tmpl.layout.plate_thickness,
            "landmark_offset": tmpl.layout.landmark_offset,
            "landmark_radius": tmpl.layout.landmark_radius,
        },
    }
    return d


def template_from_dict(d: dict) -> SceneTemplate:
    d = dict(d)
    m = d.pop("m", 20)
    layout = d.pop("layout", None)
    kw = {}
    for key in (
        "frames_per_cycle",
        "j_start",
        "j_height",
        "camera_fov_deg",
        "base_camera_distance",
        "shift_range",
        "orbit_radius",
        "supersample",
        "ambient",
    ):
        if key in d:
            kw[key] = d[key]
    if "texture_pool" in d:
        kw["texture_pool"] = tuple(d["texture_pool"])
    if layout is not None:
        kw["layout"] = GridLayout(**layout)
    return default_template(m=m, render_size=tuple(d.get("render_size", (512, 512))), **kw)


def frame_seed(seed: int, index: int, tag: int = 0) -> int:
    """Stable per-frame sub-seed; order-independent across workers."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index, tag))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def render_entry(tmpl: SceneTemplate, bits: np.ndarray, clock: float, seed: int):
    """Render one composited image + ground truth pair."""
    geometry = layout_geometry(bits, tmpl.layout)
    scene = scene_at_clock(tmpl, clock, seed)
    img = render_image(scene, geometry, tmpl)
    gt = render_ground_truth(scene, geometry, tmpl)
    bg = procedural_background(*tmpl.render_size, seed=frame_seed(seed, 0, tag=99))
    rgb = composite_background(img, bg)
    return rgb, gt, scene


def generate_dataset(tmpl: SceneTemplate, count: int, seed: int, out_dir) -> DatasetManifest:
    """Render `count` frames with fresh payloads on the clock schedule."""
    if count < 1:
        raise InvalidArgument(f"count must be >= 1, got {count}")
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    try:
        for k in range(count):
            clock = (k % tmpl.frames_per_cycle) / tmpl.frames_per_cycle
            bits = random_bit_matrix(tmpl.m, frame_seed(seed, k, tag=1))
            fseed = frame_seed(seed, k, tag=2)
            rgb, gt, scene = render_entry(tmpl, bits, clock, fseed)

            names = (f"img_{k:05d}.png", f"gt_{k:05d}.png", f"bits_{k:05d}.txt")
            save_image(os.path.join(out_dir, names[0]), rgb)
            save_map(os.path.join(out_dir, names[1]), gt)
            save_bits(os.path.join(out_dir, names[2]), bits)
            entries.append(
                ManifestEntry(
                    image=names[0],
                    ground_truth=names[1],
                    bits=names[2],
                    seed=fseed,
                    clock=clock,
                    scene=scene.to_dict(),
                )
            )
    except OSError as exc:
        shutil.rmtree(out_dir, ignore_errors=True)
        raise DataError(f"dataset write failed: {exc}") from exc

    manifest = DatasetManifest(
        root=str(out_dir),
        seed=seed,
        generator_version=GENERATOR_VERSION,
        template=template_to_dict(tmpl),
        entries=entries,
    )
    save_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest


def save_manifest(path, manifest: DatasetManifest) -> None:
    doc = {
        "generator_version": manifest.generator_version,
        "seed": manifest.seed,
        "template": manifest.template,
        "entries": [
            {
                "image": e.image,
                "ground_truth": e.ground_truth,
                "bits": e.bits,
                "seed": e.seed,
                "clock": e.clock,
                "scene": e.scene,
            }
            for e in manifest.entries
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> DatasetManifest:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    entries = [ManifestEntry(**e) for e in doc["entries"]]
    return DatasetManifest(
        root=os.path.dirname(os.path.abspath(path)),
        seed=doc["seed"],
        generator_version=doc["generator_version"],
        template=doc["template"],
        entries=entries,
    )


def load_entry_arrays(manifest: DatasetManifest, entry: ManifestEntry):
    """(image float32 HxWx3, ground truth float32 HxW, bits uint8 mxm)."""
    img = load_image(os.path.join(manifest.root, entry.image))
    gt = load_map(os.path.join(manifest.root, entry.ground_truth))
    bits = load_bits(os.path.join(manifest.root, entry.bits))
    return img, gt, bits
