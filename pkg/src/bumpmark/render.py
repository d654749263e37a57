"""CPU raycaster for the watermarked plate.

Geometry is intersected in the plate's local frame (plate box axis-aligned,
top face at z = 0), so the model's spin/orbit and the camera orbit reduce to
transforming the camera and lights into that frame. Bump intersection is
accelerated by the regular grid: a ray can only hit bumps in cells near the
points where it crosses the bump slab (0 <= z <= bump radius), so each ray
tests at most 27 candidate spheres.

Two passes share identical camera rays: the beauty pass (supersampled,
shaded, textured) and the ground-truth pass (one center ray per pixel,
binary "first hit is a bump").
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RenderError
from .scene import SceneConfig, SceneTemplate
from .textures import sample_texture, exclude_landmark_hues, TEXTURE_FAMILIES
from .watermark import BumpSet, LANDMARK_COLORS

_EPS = 1e-6
_CHUNK = 131072
_SPEC_POWER = 32.0
_SPEC_STRENGTH = 0.2


@dataclass
class ImageRender:
    """Beauty render plus the background flags needed for compositing."""

    rgb: np.ndarray  # (H, W, 3) float32 in [0, 1]
    foreground: np.ndarray  # (H, W) bool, False where no geometry was hit


def _rot_z(deg: float) -> np.ndarray:
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _normalize(v):
    return v / np.linalg.norm(v)


@dataclass
class PreparedScene:
    """Everything the ray loop needs, already in the plate-local frame."""

    cam_pos: np.ndarray
    cam_right: np.ndarray
    cam_up: np.ndarray
    cam_fwd: np.ndarray
    tan_half: float
    width: int
    height: int
    supersample: int
    # geometry
    m: int
    pitch: float
    grid_half: float  # (m-1)*pitch/2
    present: np.ndarray  # (m, m) bool
    bump_radius: float
    lm_centers: np.ndarray  # (4, 3)
    lm_radius: float
    half_extent: float
    thickness: float
    # appearance
    lights: list  # dicts with local-frame vectors
    ambient: float
    texture_family: str
    texture_scale: float
    texture_seed: int
    base_color: np.ndarray
    secondary_color: np.ndarray


def camera_elevation_deg(scene: SceneConfig) -> float:
    """Elevation angle implied by the scene's vertical-axis position."""
    return math.degrees(math.asin(min(max(scene.camera_height, 0.05), 0.95)))


def prepare_scene(scene: SceneConfig, geometry: BumpSet, tmpl: SceneTemplate) -> PreparedScene:
    lay = geometry.layout
    dist = tmpl.base_camera_distance

    orbit = math.radians(scene.model_orbit_deg)
    model_center = tmpl.orbit_radius * np.array([math.cos(orbit), math.sin(orbit), 0.0])
    world_to_local = _rot_z(-scene.model_spin_deg)

    # camera on a sphere of radius base_camera_distance around the model;
    # the clock formula drives the vertical coordinate (sin of elevation)
    s = min(max(scene.camera_height, 0.05), 0.95)
    el = math.asin(s)
    az = math.radians(scene.camera_orbit_deg)
    cam_world = model_center + dist * np.array(
        [math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), s]
    )
    cam_world = cam_world + np.asarray(scene.camera_jitter)
    cam_local = world_to_local @ (cam_world - model_center)

    inside_xy = max(abs(cam_local[0]), abs(cam_local[1])) < lay.plate_half_extent + 2.0
    if cam_local[2] < lay.bump_radius + 1.0 and inside_xy:
        raise RenderError("camera is inside (or grazing) the plate geometry")

    fwd = _normalize(-cam_local)  # look at the plate center
    up_hint = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(fwd, up_hint)) > 0.999:
        up_hint = np.array([0.0, 1.0, 0.0])
    right = _normalize(np.cross(fwd, up_hint))
    up = np.cross(right, fwd)

    lights = []
    for ls in scene.lights:
        pos_local = world_to_local @ (np.asarray(ls.position) - model_center)
        entry = {
            "kind": ls.kind,
            "position": pos_local,
            "intensity": np.asarray(ls.intensity, dtype=np.float64),
            "range_ref": ls.range_ref,
        }
        if ls.kind == "parallel":
            aim = ls.direction
            if aim is None:
                aim = -np.asarray(ls.position) + model_center  # toward the model
            entry["direction"] = _normalize(world_to_local @ np.asarray(aim))
        elif ls.kind == "spot":
            aim = ls.direction
            if aim is None:
                aim = model_center - np.asarray(ls.position)
            entry["direction"] = _normalize(world_to_local @ np.asarray(aim))
            entry["cos_inner"] = math.cos(math.radians(ls.cone_inner_deg))
            entry["cos_outer"] = math.cos(math.radians(ls.cone_outer_deg))
        elif ls.kind == "area":
            entry["area_u"] = world_to_local @ np.asarray(ls.area_u)
            entry["area_v"] = world_to_local @ np.asarray(ls.area_v)
            entry["area_samples"] = ls.area_samples
        elif ls.kind == "fading":
            entry["fade_radius"] = ls.fade_radius
            entry["fade_exponent"] = ls.fade_exponent
        lights.append(entry)

    h, w = tmpl.render_size
    return PreparedScene(
        cam_pos=cam_local,
        cam_right=right,
        cam_up=up,
        cam_fwd=fwd,
        tan_half=math.tan(math.radians(tmpl.camera_fov_deg) / 2.0),
        width=w,
        height=h,
        supersample=tmpl.supersample,
        m=geometry.m,
        pitch=lay.pitch,
        grid_half=lay.grid_span(geometry.m) / 2.0,
        present=geometry.present,
        bump_radius=geometry.bump_radius,
        lm_centers=geometry.landmark_centers,
        lm_radius=geometry.landmark_radius,
        half_extent=lay.plate_half_extent,
        thickness=lay.plate_thickness,
        lights=lights,
        ambient=tmpl.ambient,
        texture_family=scene.texture_family,
        texture_scale=scene.texture_scale,
        texture_seed=scene.seed & 0x7FFFFFFF,
        base_color=np.asarray(scene.model_color, dtype=np.float64),
        secondary_color=np.asarray(scene.texture_secondary, dtype=np.float64),
    )


def _ray_dirs(ps: PreparedScene, scale: int) -> np.ndarray:
    """Unit directions for an (H*scale, W*scale) grid of pixel centers."""
    h, w = ps.height * scale, ps.width * scale
    xs = (np.arange(w) + 0.5) / scale
    ys = (np.arange(h) + 0.5) / scale
    u = (2.0 * xs / ps.width - 1.0) * ps.tan_half * (ps.width / ps.height)
    v = (2.0 * ys / ps.height - 1.0) * ps.tan_half
    uu, vv = np.meshgrid(u, v)
    dirs = (
        ps.cam_fwd[None, None, :]
        + uu[..., None] * ps.cam_right[None, None, :]
        - vv[..., None] * ps.cam_up[None, None, :]
    )
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return dirs.reshape(-1, 3)


def _box_hit(o, d, ps: PreparedScene):
    """Slab test against the plate box. Returns (t, normal) with t=inf on miss."""
    lo = np.array([-ps.half_extent, -ps.half_extent, -ps.thickness])
    hi = np.array([ps.half_extent, ps.half_extent, 0.0])
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
    t1 = (lo[None, :] - o) * inv
    t2 = (hi[None, :] - o) * inv
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    tmin = np.where(np.isnan(tmin), -np.inf, tmin)
    tmax = np.where(np.isnan(tmax), np.inf, tmax)
    axis = np.argmax(tmin, axis=1)
    tnear = tmin[np.arange(len(o)), axis]
    tfar = tmax.min(axis=1)
    hit = (tnear < tfar) & (tnear > _EPS)
    t = np.where(hit, tnear, np.inf)
    normal = np.zeros_like(o)
    rows = np.arange(len(o))
    normal[rows, axis] = -np.sign(d[rows, axis])
    return t, normal


def _sphere_min_hit(o, d, centers, radius, valid):
    """Smallest positive t against per-ray candidate spheres.

    o, d: (N, 3); centers: (N, C, 3); valid: (N, C) mask.
    Returns (t, centers_of_best) with t=inf on miss.
    """
    oc = o[:, None, :] - centers
    b = np.einsum("ncd,nd->nc", oc, d)
    c2 = np.einsum("ncd,ncd->nc", oc, oc) - radius * radius
    disc = b * b - c2
    ok = valid & (disc > 0.0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t = -b - sq
    ok &= t > _EPS
    t = np.where(ok, t, np.inf)
    best = np.argmin(t, axis=1)
    rows = np.arange(len(o))
    return t[rows, best], centers[rows, best]


_NEIGHBOR = np.array([(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1)])


def _bump_hit(o, d, ps: PreparedScene):
    """Grid-accelerated first hit against the bump hemispheres."""
    n = len(o)
    r = ps.bump_radius
    dz = d[:, 2]
    oz = o[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_top = (r - oz) / dz
        t_bot = (0.0 - oz) / dz
    flat = np.abs(dz) < 1e-12
    t_top = np.where(flat, np.inf, t_top)
    t_bot = np.where(flat, np.inf, t_bot)
    # ray misses the slab entirely for t > 0
    miss = flat | (np.maximum(t_top, t_bot) < 0.0)
    t_top = np.clip(t_top, 0.0, None)
    t_bot = np.clip(t_bot, 0.0, None)
    samples = np.stack([t_top, 0.5 * (t_top + t_bot), t_bot], axis=1)  # (N, 3)

    pts = o[:, None, :] + samples[:, :, None] * d[:, None, :]  # (N, 3, 3)
    gx = (pts[:, :, 0] + ps.grid_half) / ps.pitch
    gy = (pts[:, :, 1] + ps.grid_half) / ps.pitch
    cj = np.rint(gx).astype(np.int64)[:, :, None] + _NEIGHBOR[None, None, :, 1]
    ci = np.rint(gy).astype(np.int64)[:, :, None] + _NEIGHBOR[None, None, :, 0]
    ci = ci.reshape(n, -1)
    cj = cj.reshape(n, -1)
    inside = (ci >= 0) & (ci < ps.m) & (cj >= 0) & (cj < ps.m)
    ci_c = np.clip(ci, 0, ps.m - 1)
    cj_c = np.clip(cj, 0, ps.m - 1)
    valid = inside & ps.present[ci_c, cj_c] & ~miss[:, None]

    centers = np.empty(ci.shape + (3,))
    centers[:, :, 0] = cj * ps.pitch - ps.grid_half
    centers[:, :, 1] = ci * ps.pitch - ps.grid_half
    centers[:, :, 2] = 0.0
    return _sphere_min_hit(o, d, centers, r, valid)


def _landmark_hit(o, d, ps: PreparedScene):
    n = len(o)
    centers = np.broadcast_to(ps.lm_centers[None, :, :], (n, 4, 3))
    valid = np.ones((n, 4), dtype=bool)
    oc = o[:, None, :] - centers
    b = np.einsum("ncd,nd->nc", oc, d)
    c2 = np.einsum("ncd,ncd->nc", oc, oc) - ps.lm_radius**2
    disc = b * b - c2
    ok = valid & (disc > 0.0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t = np.where(ok & (-b - sq > _EPS), -b - sq, np.inf)
    best = np.argmin(t, axis=1)
    rows = np.arange(n)
    return t[rows, best], best


def first_hit(o, d, ps: PreparedScene):
    """First intersection along each ray.

    Returns (t, kind, lm_idx, point, normal); kind is 0 = none, 1 = plate,
    2 = bump, 3 = landmark.
    """
    t_box, n_box = _box_hit(o, d, ps)
    t_bump, bump_centers = _bump_hit(o, d, ps)
    t_lm, lm_idx = _landmark_hit(o, d, ps)

    t = np.minimum(np.minimum(t_box, t_bump), t_lm)
    kind = np.zeros(len(o), dtype=np.int8)
    kind[np.isfinite(t_box) & (t_box <= t)] = 1
    kind[np.isfinite(t_bump) & (t_bump <= t)] = 2
    kind[np.isfinite(t_lm) & (t_lm <= t)] = 3

    point = o + t[:, None] * d
    normal = n_box.copy()
    is_bump = kind == 2
    normal[is_bump] = (point[is_bump] - bump_centers[is_bump]) / ps.bump_radius
    is_lm = kind == 3
    normal[is_lm] = (point[is_lm] - ps.lm_centers[lm_idx[is_lm]]) / ps.lm_radius
    return t, kind, lm_idx, point, normal


def _occluded(points, normals, light_dir, ps: PreparedScene):
    """Hard-shadow test toward a parallel light (direction is light->scene)."""
    o = points + normals * 1e-3
    d = np.broadcast_to(-light_dir[None, :], o.shape)
    d = np.ascontiguousarray(d)
    t_bump, _ = _bump_hit(o, d, ps)
    t_lm, _ = _landmark_hit(o, d, ps)
    return np.isfinite(np.minimum(t_bump, t_lm))


def _point_contrib(points, normals, lpos, ref):
    v = lpos[None, :] - points
    dist = np.linalg.norm(v, axis=1)
    L = v / dist[:, None]
    ndl = np.clip(np.einsum("nd,nd->n", normals, L), 0.0, None)
    atten = 1.0 / (1.0 + (dist / ref) ** 2)
    return L, ndl * atten


def _shade(points, normals, kinds, lm_idx, view_dirs, ps: PreparedScene):
    """Color for every hit ray (pre-clamp radiometry is linear in light power)."""
    n = len(points)
    is_lm = kinds == 3
    is_surface = (kinds == 1) | (kinds == 2)

    albedo = np.zeros((n, 3))
    if is_surface.any():
        albedo[is_surface] = sample_texture(
            ps.texture_family,
            ps.texture_scale,
            ps.texture_seed,
            points[is_surface],
            ps.base_color,
            ps.secondary_color,
        )

    diffuse = np.zeros((n, 3))
    spec = np.zeros(n)
    total_lum = 0.0
    primary_lum = 0.0
    for light in ps.lights:
        I = light["intensity"]
        lum = float(I.mean())
        total_lum += lum
        contribs = []  # (L, scalar weight) pairs
        if light["kind"] == "parallel":
            primary_lum = lum
            L = -light["direction"]
            ndl = np.clip(normals @ L, 0.0, None)
            shadow = _occluded(points, normals, light["direction"], ps)
            w = ndl * ~shadow
            contribs.append((np.broadcast_to(L[None, :], points.shape), w))
        elif light["kind"] == "point":
            contribs.append(_point_contrib(points, normals, light["position"], light["range_ref"]))
        elif light["kind"] == "spot":
            L, w = _point_contrib(points, normals, light["position"], light["range_ref"])
            cosang = -L @ light["direction"]
            ci, co = light["cos_inner"], light["cos_outer"]
            cone = np.clip((cosang - co) / max(ci - co, 1e-6), 0.0, 1.0)
            contribs.append((L, w * cone * cone * (3.0 - 2.0 * cone)))
        elif light["kind"] == "area":
            ns = max(int(round(math.sqrt(light["area_samples"]))), 1)
            offs = (np.arange(ns) + 0.5) / ns * 2.0 - 1.0
            for su in offs:
                for sv in offs:
                    lp = light["position"] + su * light["area_u"] + sv * light["area_v"]
                    L, w = _point_contrib(points, normals, lp, light["range_ref"])
                    contribs.append((L, w / (ns * ns)))
        else:  # fading
            v = light["position"][None, :] - points
            dist = np.linalg.norm(v, axis=1)
            L = v / dist[:, None]
            ndl = np.clip(np.einsum("nd,nd->n", normals, L), 0.0, None)
            atten = 1.0 / (1.0 + (dist / light["fade_radius"]) ** light["fade_exponent"])
            contribs.append((L, ndl * atten))

        for L, w in contribs:
            diffuse += I[None, :] * w[:, None]
            if is_surface.any():
                half = L - view_dirs
                half /= np.maximum(np.linalg.norm(half, axis=1, keepdims=True), 1e-12)
                ndh = np.clip(np.einsum("nd,nd->n", normals, half), 0.0, None)
                spec += lum * w * ndh**_SPEC_POWER

    ambient = ps.ambient * primary_lum if primary_lum > 0 else ps.ambient * total_lum / 5.0

    color = np.zeros((n, 3))
    if is_surface.any():
        shading = diffuse[is_surface] + ambient
        color[is_surface] = albedo[is_surface] * shading + (
            _SPEC_STRENGTH * spec[is_surface, None]
        )
    if is_lm.any():
        # landmarks keep their pure hue: scalar (luminance) modulation only
        shade_scalar = diffuse[is_lm].mean(axis=1) + ambient
        color[is_lm] = LANDMARK_COLORS[lm_idx[is_lm]] * shade_scalar[:, None]
    return color


def render_image(scene: SceneConfig, geometry: BumpSet, tmpl: SceneTemplate) -> ImageRender:
    """Supersampled beauty pass; background pixels are flagged, not shaded."""
    ps = prepare_scene(scene, geometry, tmpl)
    ss = ps.supersample
    dirs = _ray_dirs(ps, ss)
    n = len(dirs)
    colors = np.zeros((n, 3))
    hits = np.zeros(n, dtype=bool)
    o_cam = ps.cam_pos[None, :]
    for lo in range(0, n, _CHUNK):
        sl = slice(lo, min(lo + _CHUNK, n))
        d = dirs[sl]
        o = np.broadcast_to(o_cam, d.shape)
        t, kind, lm_idx, point, normal = first_hit(o, d, ps)
        hit = kind > 0
        if hit.any():
            colors[sl][hit] = _shade(point[hit], normal[hit], kind[hit], lm_idx[hit], d[hit], ps)
        hits[sl] = hit

    h, w = ps.height, ps.width
    colors = colors.reshape(h, ss, w, ss, 3)
    hits = hits.reshape(h, ss, w, ss)
    count = hits.sum(axis=(1, 3))
    summed = (colors * hits[..., None]).sum(axis=(1, 3))
    rgb = np.where(count[..., None] > 0, summed / np.maximum(count[..., None], 1), 0.0)
    return ImageRender(
        rgb=np.clip(rgb, 0.0, 1.0).astype(np.float32),
        foreground=count > 0,
    )


def render_ground_truth(scene: SceneConfig, geometry: BumpSet, tmpl: SceneTemplate) -> np.ndarray:
    """Binary bump mask, one center ray per pixel; aligned with render_image."""
    ps = prepare_scene(scene, geometry, tmpl)
    dirs = _ray_dirs(ps, 1)
    n = len(dirs)
    out = np.zeros(n, dtype=np.float32)
    o_cam = ps.cam_pos[None, :]
    for lo in range(0, n, _CHUNK):
        sl = slice(lo, min(lo + _CHUNK, n))
        d = dirs[sl]
        o = np.broadcast_to(o_cam, d.shape)
        _, kind, _, _, _ = first_hit(o, d, ps)
        out[sl] = (kind == 2).astype(np.float32)
    return out.reshape(ps.height, ps.width)


def project_point(ps: PreparedScene, p) -> tuple:
    """Pixel (x, y) of a local-frame 3D point; oracle for projection tests."""
    v = np.asarray(p, dtype=np.float64) - ps.cam_pos
    x = v @ ps.cam_right
    y = v @ ps.cam_up
    z = v @ ps.cam_fwd
    if z <= 0:
        raise RenderError("point is behind the camera")
    u = x / (z * ps.tan_half * (ps.width / ps.height))
    vv = -y / (z * ps.tan_half)
    px = (u + 1.0) * ps.width / 2.0 - 0.5
    py = (vv + 1.0) * ps.height / 2.0 - 0.5
    return px, py


def composite_background(img: ImageRender, bg: np.ndarray) -> np.ndarray:
    """Replace background-flagged pixels with (tiled/cropped) bg content."""
    h, w = img.rgb.shape[:2]
    bh, bw = bg.shape[:2]
    if bh < h or bw < w:
        reps = (math.ceil(h / bh), math.ceil(w / bw), 1)
        bg = np.tile(bg, reps)
    bg = bg[:h, :w]
    out = np.where(img.foreground[..., None], img.rgb, bg.astype(np.float32))
    return out.astype(np.float32)


def procedural_background(height: int, width: int, seed: int) -> np.ndarray:
    """Texture-based background; hue-excluded like plate albedos."""
    rng = np.random.Generator(np.random.PCG64(seed))
    family = TEXTURE_FAMILIES[int(rng.integers(0, len(TEXTURE_FAMILIES)))]
    scale = float(np.exp(rng.uniform(np.log(8.0), np.log(max(width, height) / 2.0))))
    c1 = exclude_landmark_hues(rng.uniform(0.0, 1.0, size=3))
    c2 = exclude_landmark_hues(rng.uniform(0.0, 1.0, size=3))
    ys, xs = np.mgrid[0:height, 0:width]
    pts = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(height * width)]).astype(float)
    rgb = sample_texture(family, scale, int(rng.integers(0, 2**31)), pts, c1, c2)
    dim = rng.uniform(0.3, 0.9)
    return (rgb.reshape(height, width, 3) * dim).astype(np.float32)
