import dataclasses
import math

import numpy as np
import pytest

from bumpmark.errors import RenderError
from bumpmark.render import (
    _ray_dirs,
    camera_elevation_deg,
    composite_background,
    first_hit,
    prepare_scene,
    procedural_background,
    project_point,
    render_ground_truth,
    render_image,
)
from bumpmark.scene import LightSource, SceneConfig, default_template, scene_at_clock
from bumpmark.watermark import GridLayout, layout_geometry


def _plain_scene(height=0.95, lights=None, spin=0.0, orbit=0.0, cam_orbit=0.0):
    return SceneConfig(
        clock=0.0,
        model_spin_deg=spin,
        model_orbit_deg=orbit,
        camera_orbit_deg=cam_orbit,
        camera_height=height,
        camera_jitter=(0.0, 0.0, 0.0),
        model_color=(0.6, 0.6, 0.6),
        texture_family="checker",
        texture_scale=8.0,
        texture_secondary=(0.3, 0.3, 0.3),
        lights=list(lights or []),
        seed=0,
    )


def _center_bump_setup():
    """m=3 with only the center bit set: one bump exactly at the plate origin."""
    bits = np.zeros((3, 3), dtype=np.uint8)
    bits[1, 1] = 1
    tmpl = default_template(3, render_size=(256, 256))
    geom = layout_geometry(bits, tmpl.layout)
    return tmpl, geom


def test_elevation_from_height():
    s = _plain_scene(height=0.5)
    assert np.isclose(camera_elevation_deg(s), math.degrees(math.asin(0.5)))


def test_bump_silhouette_diameter_matches_pinhole():
    # horizontal silhouette width of a hemisphere is 2r from any elevation,
    # so the projected diameter must be 2*f*r/z within +-2 px
    tmpl, geom = _center_bump_setup()
    scene = _plain_scene(height=0.95)
    gt = render_ground_truth(scene, geom, tmpl)
    cols = np.nonzero(gt.any(axis=0))[0]
    measured = cols.max() - cols.min() + 1

    f = (tmpl.render_size[1] / 2.0) / math.tan(math.radians(tmpl.camera_fov_deg / 2.0))
    z = tmpl.base_camera_distance  # bump sits at the center of the camera sphere
    expect = 2.0 * f * geom.bump_radius / z
    assert abs(measured - expect) <= 2.0


def test_gt_disc_centroid_matches_projection():
    tmpl, geom = _center_bump_setup()
    scene = _plain_scene(height=0.95)
    ps = prepare_scene(scene, geom, tmpl)
    gt = render_ground_truth(scene, geom, tmpl)
    ys, xs = np.nonzero(gt)
    cx, cy = float(xs.mean()), float(ys.mean())
    px, py = project_point(ps, geom.bump_centers[0])
    assert math.hypot(cx - px, cy - py) <= 1.0


def test_zero_bumps_zero_map():
    tmpl = default_template(3, render_size=(128, 128))
    geom = layout_geometry(np.zeros((3, 3), dtype=np.uint8), tmpl.layout)
    gt = render_ground_truth(_plain_scene(), geom, tmpl)
    assert gt.shape == (128, 128)
    assert not gt.any()


def test_low_elevation_occludes_far_bump():
    # two bumps aligned with the view direction at grazing elevation: the
    # near bump hides most of the far one (raycast visibility oracle)
    layout = GridLayout(
        pitch=10.0,
        bump_radius=4.5,
        plate_half_extent=40.0,
        plate_thickness=6.0,
        landmark_offset=10.0,
        landmark_radius=4.0,
    )
    tmpl = default_template(2, render_size=(256, 256))
    tmpl = dataclasses.replace(tmpl, layout=layout)

    both = np.array([[1, 1], [0, 0]], dtype=np.uint8)
    far_only = np.array([[1, 0], [0, 0]], dtype=np.uint8)
    scene = _plain_scene(height=0.05)

    def far_bump_pixels(bits):
        geom = layout_geometry(bits, layout)
        ps = prepare_scene(scene, geom, tmpl)
        dirs = _ray_dirs(ps, 1)
        o = np.broadcast_to(ps.cam_pos[None, :], dirs.shape)
        _, kind, _, point, _ = first_hit(o, dirs, ps)
        return int(np.count_nonzero((kind == 2) & (point[:, 0] < 0.0)))

    visible_alone = far_bump_pixels(far_only)
    visible_behind = far_bump_pixels(both)
    assert visible_alone > 50
    assert visible_behind < 0.5 * visible_alone


def test_all_lights_zero_gives_black_foreground():
    tmpl, geom = _center_bump_setup()
    lights = [
        LightSource(kind="parallel", position=(0.0, 0.0, 300.0), intensity=(0.0, 0.0, 0.0)),
        LightSource(kind="point", position=(50.0, 50.0, 200.0), intensity=(0.0, 0.0, 0.0)),
    ]
    out = render_image(_plain_scene(lights=lights), geom, tmpl)
    assert np.allclose(out.rgb[out.foreground], 0.0)


def test_shading_scales_linearly_with_intensity():
    tmpl, geom = _center_bump_setup()

    def render_scaled(k):
        lights = [
            LightSource(
                kind="parallel", position=(100.0, -50.0, 300.0), intensity=(0.2 * k,) * 3
            ),
            LightSource(kind="point", position=(80.0, 60.0, 250.0), intensity=(0.1 * k,) * 3),
        ]
        return render_image(_plain_scene(lights=lights), geom, tmpl)

    one = render_scaled(1.0)
    two = render_scaled(2.0)
    fg = one.foreground & (two.rgb.max(axis=2) < 0.99)  # avoid clamped pixels
    assert fg.sum() > 100
    assert np.allclose(two.rgb[fg], 2.0 * one.rgb[fg], atol=1e-5)


def test_render_deterministic(small_scene):
    tmpl, geom, scene = small_scene["template"], small_scene["geom"], small_scene["scene"]
    again = render_image(scene, geom, tmpl)
    assert np.array_equal(again.rgb, small_scene["render"].rgb)
    assert np.array_equal(again.foreground, small_scene["render"].foreground)


def test_gt_pixels_are_foreground(small_scene):
    gt = small_scene["gt"].astype(bool)
    assert set(np.unique(small_scene["gt"])) <= {0.0, 1.0}
    assert np.all(small_scene["render"].foreground[gt])


def test_gt_fraction_sane(small_scene):
    frac = small_scene["gt"].mean()
    assert 0.001 < frac < 0.3


def test_camera_inside_plate_rejected():
    tmpl, geom = _center_bump_setup()
    tmpl = dataclasses.replace(tmpl, base_camera_distance=1.0)
    with pytest.raises(RenderError):
        prepare_scene(_plain_scene(height=0.05), geom, tmpl)


def test_composite_background_masks():
    tmpl, geom = _center_bump_setup()
    lights = [LightSource(kind="parallel", position=(0.0, 0.0, 300.0), intensity=(0.5,) * 3)]
    out = render_image(_plain_scene(lights=lights), geom, tmpl)
    bg = procedural_background(256, 256, seed=1)
    comp = composite_background(out, bg)
    assert np.array_equal(comp[out.foreground], out.rgb[out.foreground])
    assert np.array_equal(comp[~out.foreground], bg[~out.foreground])


def test_procedural_background_range_and_determinism():
    a = procedural_background(64, 48, seed=7)
    b = procedural_background(64, 48, seed=7)
    assert a.shape == (64, 48, 3)
    assert np.array_equal(a, b)
    assert a.min() >= 0.0 and a.max() <= 1.0


def test_landmarks_render_with_their_hue(small_scene):
    from bumpmark.textures import rgb_to_hcv
    from bumpmark.watermark import LANDMARK_HUES

    tmpl, geom, scene = small_scene["template"], small_scene["geom"], small_scene["scene"]
    ps = prepare_scene(scene, geom, tmpl)
    img = small_scene["img"]
    for k in range(4):
        px, py = project_point(ps, geom.landmark_centers[k])
        patch = img[int(py) - 1 : int(py) + 2, int(px) - 1 : int(px) + 2].reshape(-1, 3)
        h, c, v = rgb_to_hcv(patch)
        ok = c > 0.1
        assert ok.any()
        d = np.abs((h[ok] - LANDMARK_HUES[k] + 180.0) % 360.0 - 180.0)
        assert d.min() <= 20.0
