"""From photograph + confidence map to the decoded bit matrix.

Pipeline: locate the four colored corner landmarks in the photo, estimate
the exact 4-point homography that sends them to the corners of an S x S
square, warp the confidence map onto that square, binarize at
beta * (Otsu threshold), analyze connected regions, keep regions whose
semi-axis sum clears a speck threshold, and cluster the surviving centroids
per axis with k-means (k = m) to vote bits into the m x m matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (
    DegenerateConfiguration,
    InvalidArgument,
    LandmarkAmbiguous,
    LandmarkNotFound,
)
from .textures import rgb_to_hcv
from .watermark import GridLayout, LANDMARK_HUES

_EIGHT = np.ones((3, 3), dtype=int)


@dataclass
class RetrievalParams:
    m: int = 20
    beta: float = 0.35
    square_size: int = 640  # registered map side, divisible by m
    min_axis_sum: float = 8.0  # px in the registered square
    hue_tolerance_deg: float = 20.0
    chroma_min: float = 0.2
    saturation_min: float = 0.85
    # fraction of the landmark-square side taken by the landmark offset and
    # the grid pitch; ties decoding geometry to the physical layout
    offset_frac: float = 4.0 / 84.0
    pitch_frac: float = 4.0 / 84.0

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise InvalidArgument(f"beta must be in (0, 1], got {self.beta}")
        if self.square_size % self.m:
            raise InvalidArgument("square_size must be divisible by m")

    @classmethod
    def from_layout(cls, layout: GridLayout, m: int, **kw) -> "RetrievalParams":
        side = layout.landmark_side(m)
        s = kw.pop("square_size", 32 * m)
        kw.setdefault("min_axis_sum", 0.25 * s / m)
        return cls(
            m=m,
            square_size=s,
            offset_frac=layout.landmark_offset / side,
            pitch_frac=layout.pitch / side,
            **kw,
        )

    def cell_positions(self) -> np.ndarray:
        """Nominal registered-square coordinate of each grid line (per axis)."""
        s = self.square_size - 1
        return s * (self.offset_frac + np.arange(self.m) * self.pitch_frac)

    def corners(self) -> np.ndarray:
        s = self.square_size - 1
        return np.array([[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]])


@dataclass
class RegionProps:
    label: int
    area: int
    centroid: tuple  # (x, y) px
    semi_axes: tuple  # (a, b), a >= b


@dataclass
class Diagnostics:
    """Every intermediate of a retrieval, for inspection and overlays."""

    landmarks_px: np.ndarray | None = None
    homography: np.ndarray | None = None
    confidence_map: np.ndarray | None = None
    warped: np.ndarray | None = None
    otsu: float = 0.0
    threshold: float = 0.0
    degenerate_histogram: bool = False
    binary: np.ndarray | None = None
    regions: list = field(default_factory=list)
    centroids: np.ndarray | None = None
    used_grid_fallback: bool = False
    bits: np.ndarray | None = None


def detect_landmarks(img: np.ndarray, params: RetrievalParams) -> np.ndarray:
    """Centroids of the four colored landmarks, ordered by color id.

    Pixels within the hue window, above the chroma floor, and close to full
    saturation are segmented; the largest 8-connected component wins. The
    saturation floor rejects bright surface pixels whose hue drifted into the
    window through channel clipping — landmarks are pure hues scaled by
    luminance, so their saturation stays at 1. A second far-away component of
    comparable size raises LandmarkAmbiguous.
    """
    h, c, v = rgb_to_hcv(np.asarray(img, dtype=np.float64))
    sat = c / np.maximum(v, 1e-12)
    diag = float(np.hypot(*img.shape[:2]))
    out = np.zeros((4, 2))
    for color_id, hue in enumerate(LANDMARK_HUES):
        d = np.abs((h - hue + 180.0) % 360.0 - 180.0)
        mask = (
            (d <= params.hue_tolerance_deg)
            & (c >= params.chroma_min)
            & (sat >= params.saturation_min)
        )
        if not mask.any():
            raise LandmarkNotFound(color_id)
        labels, n = ndimage.label(mask, structure=_EIGHT)
        areas = np.bincount(labels.ravel())[1:]
        order = np.argsort(areas)[::-1]
        main = order[0] + 1
        ys, xs = np.nonzero(labels == main)
        cx, cy = xs.mean(), ys.mean()
        if len(order) > 1 and areas[order[1]] >= 0.6 * areas[order[0]]:
            ys2, xs2 = np.nonzero(labels == order[1] + 1)
            if np.hypot(xs2.mean() - cx, ys2.mean() - cy) > 0.1 * diag:
                raise LandmarkAmbiguous(color_id)
        out[color_id] = (cx, cy)
    return out


def _collinear(pts: np.ndarray) -> bool:
    scale = max(np.ptp(pts, axis=0).max(), 1.0)
    for drop in range(4):
        tri = np.delete(pts, drop, axis=0)
        u, v = tri[1] - tri[0], tri[2] - tri[0]
        area = abs(u[0] * v[1] - u[1] * v[0])
        if area < 1e-9 * scale * scale:
            return True
    return False


def estimate_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Exact 4-point direct linear transform with Hartley normalization."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != (4, 2) or dst.shape != (4, 2):
        raise InvalidArgument("estimate_homography expects 4 source and 4 target points")
    if _collinear(src) or _collinear(dst):
        raise DegenerateConfiguration("three correspondences are collinear")

    def norm_transform(p):
        mean = p.mean(axis=0)
        scale = np.sqrt(2.0) / max(np.linalg.norm(p - mean, axis=1).mean(), 1e-12)
        T = np.array([[scale, 0, -scale * mean[0]], [0, scale, -scale * mean[1]], [0, 0, 1.0]])
        return T

    Ts, Td = norm_transform(src), norm_transform(dst)
    sn = (Ts @ np.column_stack([src, np.ones(4)]).T).T
    dn = (Td @ np.column_stack([dst, np.ones(4)]).T).T

    rows = []
    for (x, y, _), (u, v, _) in zip(sn, dn):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    a = np.asarray(rows)
    _, _, vt = np.linalg.svd(a)
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(Td) @ hn @ Ts
    if abs(np.linalg.det(h)) < 1e-12:
        raise DegenerateConfiguration("homography is singular")
    if abs(h[2, 2]) > 1e-12:
        h = h / h[2, 2]
    return h


def apply_homography(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    ph = np.column_stack([pts, np.ones(len(pts))]) @ h.T
    return ph[:, :2] / ph[:, 2:3]


def warp_map(conf: np.ndarray, h: np.ndarray, size: int) -> np.ndarray:
    """Inverse-map + bilinear sample onto a size x size square; outside -> 0."""
    hinv = np.linalg.inv(h)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    pts = np.column_stack([xs.ravel(), ys.ravel()])
    src = apply_homography(hinv, pts)
    sx, sy = src[:, 0], src[:, 1]
    hh, ww = conf.shape
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx, fy = sx - x0, sy - y0

    def at(yy, xx):
        inside = (yy >= 0) & (yy < hh) & (xx >= 0) & (xx < ww)
        vals = np.zeros(len(yy))
        vals[inside] = conf[yy[inside], xx[inside]]
        return vals

    v = (
        at(y0, x0) * (1 - fx) * (1 - fy)
        + at(y0, x0 + 1) * fx * (1 - fy)
        + at(y0 + 1, x0) * (1 - fx) * fy
        + at(y0 + 1, x0 + 1) * fx * fy
    )
    return v.reshape(size, size).astype(np.float64)


def otsu_threshold(conf: np.ndarray) -> float:
    """256-bin Otsu on [0, 1]; for a constant map returns the constant.

    Candidate threshold T_k is the center of bin k; the split assigns bins
    <= k to the lower class. Equivalent to exhaustive inter-class-variance
    maximization over all 256 candidates (lowest k wins ties).
    """
    v = np.asarray(conf, dtype=np.float64).ravel()
    if v.size == 0:
        raise InvalidArgument("empty confidence map")
    if v.max() - v.min() < 1e-12:
        return float(v[0])  # degenerate histogram: caller treats as empty
    hist = np.histogram(v, bins=256, range=(0.0, 1.0))[0].astype(np.float64)
    centers = (np.arange(256) + 0.5) / 256.0
    w0 = np.cumsum(hist)
    w1 = w0[-1] - w0
    s0 = np.cumsum(hist * centers)
    mu0 = np.where(w0 > 0, s0 / np.maximum(w0, 1), 0.0)
    mu1 = np.where(w1 > 0, (s0[-1] - s0) / np.maximum(w1, 1), 0.0)
    var_b = w0 * w1 * (mu0 - mu1) ** 2
    k = int(np.argmax(var_b[:-1]))  # k = 255 would put everything in one class
    return float(centers[k])


def binarize(conf: np.ndarray, beta: float, thre: float) -> np.ndarray:
    """1 where value strictly exceeds beta * thre, else 0."""
    if not 0.0 < beta <= 1.0:
        raise InvalidArgument(f"beta must be in (0, 1], got {beta}")
    return (np.asarray(conf) > beta * thre).astype(np.uint8)


def region_analysis(binary: np.ndarray) -> list:
    """8-connected regions with centroid and 2*sqrt(eigenvalue) semi-axes."""
    binary = np.asarray(binary)
    labels, n = ndimage.label(binary > 0, structure=_EIGHT)
    if n == 0:
        return []
    ys, xs = np.nonzero(labels)
    lab = labels[ys, xs]
    area = np.bincount(lab, minlength=n + 1).astype(np.float64)
    sx = np.bincount(lab, weights=xs, minlength=n + 1)
    sy = np.bincount(lab, weights=ys, minlength=n + 1)
    sxx = np.bincount(lab, weights=xs * xs.astype(np.float64), minlength=n + 1)
    syy = np.bincount(lab, weights=ys * ys.astype(np.float64), minlength=n + 1)
    sxy = np.bincount(lab, weights=xs * ys.astype(np.float64), minlength=n + 1)
    out = []
    for k in range(1, n + 1):
        a = area[k]
        mx, my = sx[k] / a, sy[k] / a
        cxx = sxx[k] / a - mx * mx
        cyy = syy[k] / a - my * my
        cxy = sxy[k] / a - mx * my
        tr, det = cxx + cyy, cxx * cyy - cxy * cxy
        disc = max(tr * tr / 4.0 - det, 0.0)
        l1 = tr / 2.0 + np.sqrt(disc)
        l2 = max(tr / 2.0 - np.sqrt(disc), 0.0)
        out.append(
            RegionProps(
                label=k,
                area=int(a),
                centroid=(mx, my),
                semi_axes=(2.0 * np.sqrt(l1), 2.0 * np.sqrt(l2)),
            )
        )
    return out


def filter_regions(props: list, min_axis_sum: float) -> np.ndarray:
    """Centroids of regions with semi-axis sum strictly above the threshold."""
    keep = [p.centroid for p in props if p.semi_axes[0] + p.semi_axes[1] > min_axis_sum]
    return np.asarray(keep, dtype=np.float64).reshape(-1, 2)


def kmeans_1d(values, k: int, seed: int, restarts: int = 5):
    """Lloyd iterations with squared-distance-weighted (k-means++) seeding.

    Runs a few deterministic restarts and keeps the lowest-cost result.
    Returns (centers ascending, assignment per value); raises
    InvalidArgument when there are fewer values than clusters.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if len(values) < k:
        raise InvalidArgument(f"need at least {k} values, got {len(values)}")
    best = None
    for r in range(max(restarts, 1)):
        centers, assign = _kmeans_1d_once(values, k, seed + 7919 * r)
        cost = float(((values - centers[assign]) ** 2).sum())
        if best is None or cost < best[0]:
            best = (cost, centers, assign)
    return best[1], best[2]


def _kmeans_1d_once(values: np.ndarray, k: int, seed: int):
    rng = np.random.Generator(np.random.PCG64(seed))

    centers = [values[int(rng.integers(0, len(values)))]]
    for _ in range(1, k):
        d2 = np.min((values[:, None] - np.asarray(centers)[None, :]) ** 2, axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(values[int(rng.integers(0, len(values)))])
            continue
        centers.append(values[int(rng.choice(len(values), p=d2 / total))])
    centers = np.asarray(centers, dtype=np.float64)

    assign = None
    for _ in range(100):
        dist = np.abs(values[:, None] - centers[None, :])
        new_assign = np.argmin(dist, axis=1)
        for j in range(k):
            sel = new_assign == j
            if sel.any():
                centers[j] = values[sel].mean()
            else:  # re-seed an empty cluster at the worst-fit value
                far = int(np.argmax(dist[np.arange(len(values)), new_assign]))
                centers[j] = values[far]
                new_assign[far] = j
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign

    order = np.argsort(centers, kind="stable")
    rank = np.empty(k, dtype=np.int64)
    rank[order] = np.arange(k)
    return centers[order], rank[assign]


def decode_matrix(centroids: np.ndarray, params: RetrievalParams, seed: int = 0):
    """Vote centroids into the m x m matrix via per-axis clustering.

    Falls back to nominal-grid assignment (within half a pitch of a cell
    center) when an axis cannot provide m well-separated clusters.
    """
    m = params.m
    bits = np.zeros((m, m), dtype=np.uint8)
    centroids = np.asarray(centroids, dtype=np.float64).reshape(-1, 2)
    if len(centroids) == 0:
        return bits, False

    cells = params.cell_positions()
    pitch_px = params.pitch_frac * (params.square_size - 1)
    fallback = len(centroids) < m

    cols = rows = None
    if not fallback:
        cx, cols = kmeans_1d(centroids[:, 0], m, seed)
        cy, rows = kmeans_1d(centroids[:, 1], m, seed + 1)
        # Lloyd result is degenerate when two centers land closer than half
        # a pitch: some true column/row was empty and another got split.
        if np.diff(cx).min() < 0.5 * pitch_px or np.diff(cy).min() < 0.5 * pitch_px:
            fallback = True

    if fallback:
        half = params.square_size / (2.0 * m)
        for x, y in centroids:
            j = int(np.argmin(np.abs(cells - x)))
            i = int(np.argmin(np.abs(cells - y)))
            if np.hypot(cells[j] - x, cells[i] - y) <= half:
                bits[i, j] = 1
        return bits, True

    bits[rows, cols] = 1
    return bits, False


def decode_map(img: np.ndarray, conf: np.ndarray, params: RetrievalParams, seed: int = 0) -> Diagnostics:
    """Run the full decoding pipeline on an image + confidence map pair.

    The map may be at the image resolution (oracle/ground-truth mode) or at
    the network's quarter resolution; landmark coordinates are scaled to the
    map's resolution before registration.
    """
    diag = Diagnostics(confidence_map=conf)
    lm = detect_landmarks(img, params)
    diag.landmarks_px = lm
    scale = np.array([conf.shape[1] / img.shape[1], conf.shape[0] / img.shape[0]])
    h = estimate_homography(lm * scale[None, :], params.corners())
    diag.homography = h

    if float(conf.max() - conf.min()) < 1e-12:
        diag.degenerate_histogram = True
        diag.otsu = float(conf.ravel()[0]) if conf.size else 0.0
        diag.warped = warp_map(conf, h, params.square_size)
        diag.binary = np.zeros((params.square_size,) * 2, dtype=np.uint8)
        diag.centroids = np.zeros((0, 2))
        diag.bits = np.zeros((params.m, params.m), dtype=np.uint8)
        return diag

    warped = warp_map(conf, h, params.square_size)
    diag.warped = warped
    diag.otsu = otsu_threshold(warped)
    if warped.max() - warped.min() < 1e-12:
        diag.degenerate_histogram = True
        diag.binary = np.zeros_like(warped, dtype=np.uint8)
        diag.centroids = np.zeros((0, 2))
        diag.bits = np.zeros((params.m, params.m), dtype=np.uint8)
        return diag
    diag.threshold = params.beta * diag.otsu
    diag.binary = binarize(warped, params.beta, diag.otsu)
    diag.regions = region_analysis(diag.binary)
    diag.centroids = filter_regions(diag.regions, params.min_axis_sum)
    diag.bits, diag.used_grid_fallback = decode_matrix(diag.centroids, params, seed)
    return diag


def retrieve(img: np.ndarray, net, params: RetrievalParams, seed: int = 0) -> Diagnostics:
    """Network inference + decode_map; img is (H, W, 3) with H, W % 4 == 0."""
    if img.shape[0] % 4 or img.shape[1] % 4:
        raise InvalidArgument("image dimensions must be divisible by 4")
    conf = net.infer(img)
    return decode_map(img, conf, params, seed)
