import numpy as np
import pytest

from bumpmark.errors import InvalidArgument
from bumpmark.textures import (
    HUE_EXCLUSION,
    TEXTURE_FAMILIES,
    exclude_landmark_hues,
    fbm_noise,
    rgb_to_hcv,
    sample_texture,
    value_noise,
)
from bumpmark.watermark import LANDMARK_HUES


def _points(n, seed, scale=50.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=(n, 3))


def test_texture_families_distinct():
    assert len(TEXTURE_FAMILIES) == len(set(TEXTURE_FAMILIES)) >= 10


@pytest.mark.parametrize("family", TEXTURE_FAMILIES)
def test_every_family_in_range_and_deterministic(family):
    pts = _points(500, 3)
    a = sample_texture(family, scale=8.0, seed=11, points=pts, base_color=(0.7, 0.5, 0.3), secondary_color=(0.2, 0.3, 0.6))
    b = sample_texture(family, scale=8.0, seed=11, points=pts, base_color=(0.7, 0.5, 0.3), secondary_color=(0.2, 0.3, 0.6))
    assert a.shape == (500, 3)
    assert np.all(a >= 0.0) and np.all(a <= 1.0)
    assert np.array_equal(a, b)


def test_unknown_family_rejected():
    with pytest.raises(InvalidArgument):
        sample_texture("no_such_family", scale=1.0, seed=0, points=_points(4, 0), base_color=(0.5, 0.5, 0.5), secondary_color=(0.1, 0.1, 0.1))


def test_value_noise_mean_near_half():
    # Monte-Carlo: value noise over many points should straddle the midpoint
    pts = _points(10_000, 21)
    vals = value_noise(pts * 0.13, seed=4)
    assert abs(float(vals.mean()) - 0.5) <= 0.1


def test_fbm_in_unit_range():
    pts = _points(2000, 8)
    vals = fbm_noise(pts * 0.2, seed=9, octaves=4)
    assert np.all(vals >= 0.0) and np.all(vals <= 1.0)


def test_rgb_to_hcv_primaries():
    rgb = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    h, c, v = rgb_to_hcv(rgb)
    assert np.allclose(h, [0.0, 120.0, 240.0, 60.0])
    assert np.allclose(c, 1.0)
    assert np.allclose(v, 1.0)


def test_hue_exclusion_moves_forbidden_hues():
    # saturate colors exactly at the four landmark hues; all must exit the window
    from bumpmark.textures import _hue_to_rgb

    rgb = _hue_to_rgb(LANDMARK_HUES, np.ones(4), np.ones(4))
    out = exclude_landmark_hues(rgb)
    h, c, _ = rgb_to_hcv(out)
    for hue in h[c > 0.05]:
        d = np.abs((hue - LANDMARK_HUES + 180.0) % 360.0 - 180.0)
        assert np.all(d >= HUE_EXCLUSION - 1e-6)


def test_hue_exclusion_identity_on_allowed():
    from bumpmark.textures import _hue_to_rgb

    hues = np.array([30.0, 90.0, 180.0, 300.0])  # all >= 25 deg from landmark hues
    rgb = _hue_to_rgb(hues, np.full(4, 0.8), np.full(4, 0.9))
    out = exclude_landmark_hues(rgb)
    assert np.allclose(out, rgb, atol=1e-6)


def test_hue_exclusion_skips_near_gray():
    gray = np.full((5, 3), 0.42)
    assert np.allclose(exclude_landmark_hues(gray), gray)


def test_sampled_textures_avoid_landmark_hues():
    for family in TEXTURE_FAMILIES:
        rgb = sample_texture(family, scale=6.0, seed=2, points=_points(800, 14), base_color=(0.9, 0.1, 0.1), secondary_color=(0.1, 0.9, 0.2))
        h, c, _ = rgb_to_hcv(rgb)
        h = h[c > 0.05]
        for hue0 in LANDMARK_HUES:
            d = np.abs((h - hue0 + 180.0) % 360.0 - 180.0)
            assert np.all(d >= HUE_EXCLUSION - 1e-4), family
