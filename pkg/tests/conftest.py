"""Shared fixtures: small rendered scenes reused across test modules."""

import numpy as np
import pytest

from bumpmark.render import composite_background, procedural_background, render_ground_truth, render_image
from bumpmark.scene import default_template, scene_at_clock
from bumpmark.watermark import layout_geometry, random_bit_matrix


@pytest.fixture(scope="session")
def small_scene():
    """One m=6, 256x256 rendered frame with everything needed to decode it."""
    m = 6
    tmpl = default_template(m, render_size=(256, 256))
    bits = random_bit_matrix(m, seed=42)
    geom = layout_geometry(bits, tmpl.layout)
    scene = scene_at_clock(tmpl, clock=0.35, seed=17)
    render = render_image(scene, geom, tmpl)
    gt = render_ground_truth(scene, geom, tmpl)
    img = composite_background(render, procedural_background(256, 256, seed=5))
    return {
        "m": m,
        "template": tmpl,
        "bits": bits,
        "geom": geom,
        "scene": scene,
        "render": render,
        "gt": gt,
        "img": img,
    }


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """A 4-frame m=6 dataset at 128x128 on disk, with its manifest."""
    from bumpmark.dataset import generate_dataset

    tmpl = default_template(6, render_size=(128, 128))
    out = tmp_path_factory.mktemp("tinyds")
    manifest = generate_dataset(tmpl, count=4, seed=9, out_dir=out)
    return {"template": tmpl, "dir": out, "manifest": manifest}
