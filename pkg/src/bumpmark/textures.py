"""Procedural albedo textures for the plate surface and backgrounds.

All textures are pure functions of (family, scale, seed, surface point):
no global RNG state, so re-evaluating a point always yields the same color.
Randomness comes from an integer lattice hash keyed by the seed.

Plate albedos are kept out of the four landmark hue windows (red, yellow,
green, blue +-HUE_EXCLUSION degrees) so that landmark detection can key on
hue alone; see exclude_landmark_hues().
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgument
from .watermark import LANDMARK_HUES

TEXTURE_FAMILIES = (
    "checker",
    "stripes",
    "value_noise",
    "turbulence",
    "marble",
    "wood_rings",
    "dots",
    "gradient",
    "cells",
    "brick",
    "fbm",
    "speckle",
)

# Families ranked from least to most structured. Restricting a texture pool
# (e.g. for ablations) takes a prefix of this list, so a reduced pool is
# systematically narrow: it keeps the smooth families and drops the
# high-frequency ones whose features resemble bump highlights.
TEXTURE_DIVERSITY_ORDER = (
    "gradient",
    "value_noise",
    "fbm",
    "turbulence",
    "marble",
    "wood_rings",
    "stripes",
    "cells",
    "brick",
    "dots",
    "checker",
    "speckle",
)

# Half-width of the hue window reserved for each landmark color. Detection
# uses a slightly tighter window (see decode.RetrievalParams) so that small
# hue shifts from tinted lights cannot push plate pixels into a window.
HUE_EXCLUSION = 30.0


def _hash01(ix, iy, iz, seed: int):
    """Deterministic uint lattice hash -> float in [0, 1)."""
    h = (
        ix.astype(np.uint32) * np.uint32(73856093)
        ^ iy.astype(np.uint32) * np.uint32(19349663)
        ^ iz.astype(np.uint32) * np.uint32(83492791)
        ^ np.uint32((seed * 2654435761) & 0xFFFFFFFF)
    )
    h ^= h >> np.uint32(13)
    h *= np.uint32(0x5BD1E995)
    h ^= h >> np.uint32(15)
    return h.astype(np.float64) / 4294967296.0


def _smooth(t):
    return t * t * (3.0 - 2.0 * t)


def value_noise(p: np.ndarray, seed: int) -> np.ndarray:
    """Trilinearly interpolated lattice noise in [0, 1); p is (N, 3)."""
    p0 = np.floor(p)
    f = _smooth(p - p0)
    i0 = p0.astype(np.int64)
    out = np.zeros(len(p))
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                w = (
                    (f[:, 0] if dx else 1 - f[:, 0])
                    * (f[:, 1] if dy else 1 - f[:, 1])
                    * (f[:, 2] if dz else 1 - f[:, 2])
                )
                out += w * _hash01(i0[:, 0] + dx, i0[:, 1] + dy, i0[:, 2] + dz, seed)
    return out


def fbm_noise(p: np.ndarray, seed: int, octaves: int = 4) -> np.ndarray:
    total = np.zeros(len(p))
    amp, norm = 1.0, 0.0
    for o in range(octaves):
        total += amp * value_noise(p * (2.0**o), seed + o)
        norm += amp
        amp *= 0.5
    return total / norm


def turbulence(p: np.ndarray, seed: int, octaves: int = 4) -> np.ndarray:
    total = np.zeros(len(p))
    amp, norm = 1.0, 0.0
    for o in range(octaves):
        total += amp * np.abs(value_noise(p * (2.0**o), seed + o) * 2.0 - 1.0)
        norm += amp
        amp *= 0.5
    return total / norm


def rgb_to_hcv(rgb: np.ndarray):
    """Hue (deg), chroma, value for an (N, 3) array."""
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    c = mx - mn
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    safe = np.where(c > 0, c, 1.0)
    h = np.where(
        mx == r,
        (g - b) / safe % 6.0,
        np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    h = np.where(c > 0, h * 60.0, 0.0)
    return h, c, mx


def _hue_to_rgb(h, c, v):
    hp = (h / 60.0) % 6.0
    x = c * (1.0 - np.abs(hp % 2.0 - 1.0))
    z = np.zeros_like(c)
    idx = hp.astype(np.int64) % 6
    r = np.select([idx == 0, idx == 1, idx == 2, idx == 3, idx == 4, idx == 5],
                  [c, x, z, z, x, c])
    g = np.select([idx == 0, idx == 1, idx == 2, idx == 3, idx == 4, idx == 5],
                  [x, c, c, x, z, z])
    b = np.select([idx == 0, idx == 1, idx == 2, idx == 3, idx == 4, idx == 5],
                  [z, z, x, c, c, x])
    m = v - c
    return np.stack([r + m, g + m, b + m], axis=-1)


def exclude_landmark_hues(rgb: np.ndarray) -> np.ndarray:
    """Push chromatic colors out of the landmark hue windows.

    Hues within +-HUE_EXCLUSION of a landmark hue are clamped to the nearest
    window edge; hues outside every window are untouched, so allowed colors
    round-trip unchanged. Near-gray pixels (chroma < 0.05) are left alone.
    """
    rgb = np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0)
    flat = rgb.reshape(-1, 3)
    h, c, v = rgb_to_hcv(flat)
    moved = np.zeros(len(h), dtype=bool)
    for hue in LANDMARK_HUES:
        d = (h - hue + 180.0) % 360.0 - 180.0
        inside = (np.abs(d) < HUE_EXCLUSION) & (c >= 0.05)
        h = np.where(inside, (hue + np.sign(d + 1e-9) * HUE_EXCLUSION) % 360.0, h)
        moved |= inside
    if not moved.any():
        return rgb
    fixed = _hue_to_rgb(h, c, v)
    out = np.where(moved[:, None], fixed, flat)
    return out.reshape(rgb.shape)


def _mix(a, b, t):
    t = np.clip(np.asarray(t), 0.0, 1.0)[..., None]
    return (1.0 - t) * np.asarray(a) + t * np.asarray(b)


def sample_texture(
    family: str,
    scale: float,
    seed: int,
    points: np.ndarray,
    base_color,
    secondary_color,
) -> np.ndarray:
    """Albedo at each 3D surface point; (N, 3) in [0, 1].

    base/secondary are RGB triples; `scale` is the feature size in model
    units. Output hues avoid the landmark windows.
    """
    if family not in TEXTURE_FAMILIES:
        raise InvalidArgument(f"unknown texture family: {family}")
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3) / float(scale)
    a = np.asarray(base_color, dtype=np.float64)
    b = np.asarray(secondary_color, dtype=np.float64)

    if family == "checker":
        t = (np.floor(p).sum(axis=1).astype(np.int64) % 2).astype(np.float64)
    elif family == "stripes":
        t = 0.5 + 0.5 * np.sin(2.0 * np.pi * p[:, 0])
        t = (t > 0.5).astype(np.float64)
    elif family == "value_noise":
        t = value_noise(p, seed)
    elif family == "turbulence":
        t = turbulence(p, seed)
    elif family == "marble":
        t = 0.5 + 0.5 * np.sin(np.pi * p[:, 0] + 5.0 * turbulence(p, seed))
    elif family == "wood_rings":
        r = np.hypot(p[:, 0], p[:, 1]) + 0.3 * value_noise(p, seed)
        t = (r % 1.0 > 0.5).astype(np.float64)
    elif family == "dots":
        cell = np.floor(p)
        jx = _hash01(cell[:, 0].astype(np.int64), cell[:, 1].astype(np.int64),
                     cell[:, 2].astype(np.int64), seed)
        jy = _hash01(cell[:, 0].astype(np.int64), cell[:, 1].astype(np.int64),
                     cell[:, 2].astype(np.int64), seed + 1)
        f = p - cell
        d = np.hypot(f[:, 0] - (0.3 + 0.4 * jx), f[:, 1] - (0.3 + 0.4 * jy))
        t = (d < 0.3).astype(np.float64)
    elif family == "gradient":
        t = (p[:, 0] + p[:, 1]) % 2.0 / 2.0
    elif family == "cells":
        # Voronoi-style F1 distance on a jittered lattice (xy plane).
        cell = np.floor(p[:, :2])
        best = np.full(len(p), np.inf)
        z0 = np.zeros(len(p), dtype=np.int64)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                cx = cell[:, 0].astype(np.int64) + dx
                cy = cell[:, 1].astype(np.int64) + dy
                px = cx + _hash01(cx, cy, z0, seed)
                py = cy + _hash01(cx, cy, z0 + 1, seed)
                best = np.minimum(best, np.hypot(p[:, 0] - px, p[:, 1] - py))
        t = np.clip(best, 0.0, 1.0)
    elif family == "brick":
        row = np.floor(p[:, 1])
        x = p[:, 0] + 0.5 * (row.astype(np.int64) % 2)
        fx, fy = x % 1.0, p[:, 1] % 1.0
        mortar = (fx < 0.08) | (fy < 0.12)
        t = mortar.astype(np.float64)
    elif family == "fbm":
        t = fbm_noise(p, seed)
    else:  # speckle
        cell = np.floor(p * 4.0)
        h = _hash01(cell[:, 0].astype(np.int64), cell[:, 1].astype(np.int64),
                    cell[:, 2].astype(np.int64), seed)
        t = (h > 0.85).astype(np.float64)

    return exclude_landmark_hues(_mix(a, b, t))
