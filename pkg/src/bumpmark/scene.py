"""Clock-driven scene randomization.

One render cycle spans clock in [0, 1]. Within a cycle the plate spins about
its own axis at 30 revolutions, orbits the central light at 1 revolution,
and the camera orbits at 12 revolutions while its height follows a raised
cosine. Colors, textures, light intensities and camera jitter are drawn from
a per-frame seed, so a (template, clock, seed) triple fully determines the
scene.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import InvalidArgument
from .textures import TEXTURE_FAMILIES, exclude_landmark_hues
from .watermark import GridLayout, default_layout

LIGHT_KINDS = ("parallel", "point", "spot", "area", "fading")


@dataclass
class LightSource:
    kind: str
    position: tuple  # world frame; for "parallel" only the aim matters
    intensity: tuple  # RGB, each >= 0
    # kind-specific extras
    direction: tuple | None = None  # parallel / spot aim direction (unit)
    cone_inner_deg: float = 20.0
    cone_outer_deg: float = 35.0
    area_u: tuple | None = None  # half-extent vectors of the rectangle
    area_v: tuple | None = None
    area_samples: int = 4
    fade_radius: float = 300.0
    fade_exponent: float = 2.0
    range_ref: float = 300.0  # inverse-square reference distance

    def __post_init__(self):
        if self.kind not in LIGHT_KINDS:
            raise InvalidArgument(f"unknown light kind {self.kind!r}")
        if any(c < 0 for c in self.intensity):
            raise InvalidArgument("light intensity components must be >= 0")


@dataclass
class SceneTemplate:
    """Static description of the generator setup."""

    layout: GridLayout
    m: int = 20
    frames_per_cycle: int = 120
    j_start: float = 0.1
    j_height: float = 0.6
    camera_fov_deg: float = 45.0
    base_camera_distance: float = 220.0
    shift_range: float = 0.08  # camera jitter half-side, fraction of distance
    orbit_radius: float = 55.0  # model orbit around the central light
    texture_pool: tuple = TEXTURE_FAMILIES
    render_size: tuple = (512, 512)  # (height, width)
    supersample: int = 2
    ambient: float = 0.25  # fraction of primary-light luminance

    def __post_init__(self):
        if self.frames_per_cycle < 1:
            raise InvalidArgument("frames_per_cycle must be >= 1")
        if min(self.render_size) <= 0:
            raise InvalidArgument("render_size must be positive")
        if not self.texture_pool:
            raise InvalidArgument("texture_pool must be non-empty")


def default_template(m: int = 20, render_size=(512, 512), **kw) -> SceneTemplate:
    layout = kw.pop("layout", default_layout(m))
    dist = kw.pop("base_camera_distance", 3.6 * layout.plate_half_extent)
    return SceneTemplate(layout=layout, m=m, render_size=tuple(render_size),
                         base_camera_distance=dist, **kw)


@dataclass
class SceneConfig:
    """Fully resolved scene at one clock value."""

    clock: float
    model_spin_deg: float
    model_orbit_deg: float
    camera_orbit_deg: float
    camera_height: float  # fraction of base_camera_distance, vertical axis
    camera_jitter: tuple  # (dx, dy, dz) model units
    model_color: tuple
    texture_family: str
    texture_scale: float
    texture_secondary: tuple
    lights: list = field(default_factory=list)
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        d = dict(d)
        d["lights"] = [LightSource(**ld) for ld in d["lights"]]
        return cls(**d)


def randomize_color(clock: float, seed: int) -> tuple:
    """RGB from the clock schedule: frac(a*clock) per channel, a ~ U(0, 5)."""
    if not 0.0 <= clock <= 1.0:
        raise InvalidArgument(f"clock must be in [0, 1], got {clock}")
    rng = np.random.Generator(np.random.PCG64(seed))
    coeffs = rng.uniform(0.0, 5.0, size=3)
    return tuple(float(v) for v in (coeffs * clock) % 1.0)


def camera_height_at(clock: float, j_start: float, j_height: float) -> float:
    return j_start + j_height * (1.0 - math.cos(4.0 * math.pi * (clock - j_start))) / 2.0


def _random_lights(rng: np.random.Generator, dist: float) -> list:
    """One light of each kind, positions/intensities jittered per scene."""

    def tint(scale):
        base = rng.uniform(0.92, 1.0, size=3)
        return tuple(float(v) for v in base * scale)

    az = rng.uniform(0.0, 2.0 * math.pi, size=4)
    radius = dist * rng.uniform(1.2, 2.0, size=4)
    height = dist * rng.uniform(0.8, 1.8, size=4)
    pos = [
        (radius[k] * math.cos(az[k]), radius[k] * math.sin(az[k]), height[k])
        for k in range(4)
    ]
    lights = [
        LightSource(
            kind="parallel",
            position=(0.0, 0.0, 2.5 * dist),
            intensity=tint(rng.uniform(0.6, 1.1)),
        ),
        LightSource(kind="point", position=pos[0],
                    intensity=tint(rng.uniform(0.15, 0.5)), range_ref=1.5 * dist),
        LightSource(
            kind="spot",
            position=pos[1],
            intensity=tint(rng.uniform(0.2, 0.7)),
            cone_inner_deg=float(rng.uniform(10.0, 25.0)),
            cone_outer_deg=float(rng.uniform(30.0, 50.0)),
            range_ref=1.5 * dist,
        ),
        LightSource(
            kind="area",
            position=pos[2],
            intensity=tint(rng.uniform(0.15, 0.5)),
            area_u=(0.3 * dist, 0.0, 0.0),
            area_v=(0.0, 0.3 * dist, 0.0),
            area_samples=4,
            range_ref=1.5 * dist,
        ),
        LightSource(
            kind="fading",
            position=pos[3],
            intensity=tint(rng.uniform(0.2, 0.6)),
            fade_radius=float(rng.uniform(0.8, 1.6)) * dist,
            fade_exponent=float(rng.uniform(1.5, 3.0)),
            range_ref=1.5 * dist,
        ),
    ]
    return lights


def scene_at_clock(tmpl: SceneTemplate, clock: float, seed: int) -> SceneConfig:
    """Resolve every randomized quantity for one frame."""
    if not 0.0 <= clock <= 1.0:
        raise InvalidArgument(f"clock must be in [0, 1], got {clock}")
    rng = np.random.Generator(np.random.PCG64(seed))

    shift = tmpl.shift_range * tmpl.base_camera_distance
    jitter = tuple(float(v) for v in rng.uniform(-shift, shift, size=3))

    family = tmpl.texture_pool[int(rng.integers(0, len(tmpl.texture_pool)))]
    # log-uniform feature size, roughly 1/20 .. 1/2 of the plate
    lo = 0.06 * tmpl.layout.plate_half_extent
    hi = 1.0 * tmpl.layout.plate_half_extent
    scale = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
    secondary = tuple(float(v) for v in exclude_landmark_hues(rng.uniform(0.0, 1.0, size=3)))

    return SceneConfig(
        clock=clock,
        model_spin_deg=(360.0 * clock * 30.0) % 360.0,
        model_orbit_deg=(360.0 * clock) % 360.0,
        camera_orbit_deg=(360.0 * clock * 12.0) % 360.0,
        camera_height=camera_height_at(clock, tmpl.j_start, tmpl.j_height),
        camera_jitter=jitter,
        model_color=randomize_color(clock, int(rng.integers(0, 2**63))),
        texture_family=family,
        texture_scale=scale,
        texture_secondary=secondary,
        lights=_random_lights(rng, tmpl.base_camera_distance),
        seed=seed,
    )
