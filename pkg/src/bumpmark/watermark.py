"""Bit-matrix payload and its physical realization as a bump grid.

A watermark is an m x m array of {0,1}. It is embossed on the top face of a
plate as hemispherical bumps on a regular grid (a bump is present exactly
where the bit is 1), with four uniquely colored hemispherical landmarks just
outside the grid corners for later registration.

Plate frame conventions: x runs along columns (j), y along rows (i), z up,
plate top face at z = 0. Row 0 / column 0 is the "top-left" corner, which is
where the color-0 (red) landmark sits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, InvalidLayout

# Canonical landmark colors, indexed by color_id:
# 0 = top-left, 1 = top-right, 2 = bottom-right, 3 = bottom-left.
LANDMARK_COLORS = np.array(
    [
        [1.0, 0.0, 0.0],  # red
        [0.0, 1.0, 0.0],  # green
        [0.0, 0.0, 1.0],  # blue
        [1.0, 1.0, 0.0],  # yellow
    ],
    dtype=np.float32,
)
LANDMARK_HUES = np.array([0.0, 120.0, 240.0, 60.0])  # degrees, same order


def random_bit_matrix(m: int, seed: int) -> np.ndarray:
    """Uniform random m x m bit matrix, deterministic per (m, seed)."""
    if m < 2:
        raise InvalidArgument(f"grid size must be >= 2, got {m}")
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.integers(0, 2, size=(m, m), dtype=np.uint8)


def validate_bits(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.ndim != 2 or bits.shape[0] != bits.shape[1]:
        raise InvalidArgument(f"bit matrix must be square, got shape {bits.shape}")
    if not np.isin(bits, (0, 1)).all():
        raise InvalidArgument("bit matrix entries must be 0 or 1")
    return bits.astype(np.uint8)


def save_bits(path, bits: np.ndarray) -> None:
    """Text format: first line m, then m lines of m '0'/'1' characters."""
    bits = validate_bits(bits)
    lines = [str(bits.shape[0])]
    lines += ["".join("1" if v else "0" for v in row) for row in bits]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_bits(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw:
        raise InvalidArgument(f"empty bit-matrix file: {path}")
    m = int(raw[0])
    rows = raw[1:]
    if len(rows) != m or any(len(r) != m for r in rows):
        raise InvalidArgument(f"malformed bit-matrix file: {path}")
    return np.array([[int(c) for c in row] for row in rows], dtype=np.uint8)


@dataclass(frozen=True)
class GridLayout:
    """Physical dimensions of the bump grid, in model units (mm)."""

    pitch: float = 4.0
    bump_radius: float = 1.2  # hemisphere, so bump height == radius
    plate_half_extent: float = 60.0
    plate_thickness: float = 6.0
    landmark_offset: float = 4.0  # from outer bump row to landmark center
    landmark_radius: float = 1.6

    def __post_init__(self):
        vals = (
            self.pitch,
            self.bump_radius,
            self.plate_half_extent,
            self.plate_thickness,
            self.landmark_offset,
            self.landmark_radius,
        )
        if any(v <= 0 for v in vals):
            raise InvalidArgument("all layout lengths must be positive")
        if self.bump_radius >= self.pitch / 2:
            raise InvalidLayout("bump radius must be < pitch/2 (bumps would overlap)")

    def grid_span(self, m: int) -> float:
        """Distance between the outermost bump centers."""
        return (m - 1) * self.pitch

    def landmark_side(self, m: int) -> float:
        """Side of the square through the four landmark centers."""
        return self.grid_span(m) + 2 * self.landmark_offset

    def check_fits(self, m: int) -> None:
        reach = self.grid_span(m) / 2 + self.landmark_offset + self.landmark_radius
        if reach > self.plate_half_extent:
            raise InvalidLayout(
                f"grid+landmarks reach {reach:.2f} exceeds plate half extent "
                f"{self.plate_half_extent:.2f} for m={m}"
            )


def default_layout(m: int) -> GridLayout:
    """A layout scaled so the watermark comfortably fits the plate.

    For m=20 this reproduces the desk-scale defaults (pitch 4mm, plate
    120x120x6mm). For smaller matrices the pitch grows so bumps stay
    resolvable at the same render resolution.
    """
    pitch = 80.0 / max(m, 8)
    half = (m - 1) * pitch / 2 + pitch + 2.0 * pitch / 4 + 8.0
    return GridLayout(
        pitch=pitch,
        # quarter-pitch radius keeps a half-pitch gap between bump rims, so
        # adjacent rows stay separable even at shallow camera elevations
        bump_radius=0.25 * pitch,
        plate_half_extent=max(half, 40.0),
        plate_thickness=6.0,
        landmark_offset=pitch,
        landmark_radius=0.4 * pitch,
    )


@dataclass(frozen=True)
class BumpSet:
    """Resolved bump/landmark geometry on the plate top face."""

    m: int
    layout: GridLayout
    bump_centers: np.ndarray  # (K, 3) float, z = 0
    bump_indices: np.ndarray  # (K, 2) int, (i, j) of each bump
    bump_radius: float
    landmark_centers: np.ndarray  # (4, 3), ordered by color_id
    landmark_radius: float
    present: np.ndarray  # (m, m) bool, True where a bump exists

    def to_bits(self) -> np.ndarray:
        """Re-mark bit indices; inverse of layout_geometry."""
        bits = np.zeros((self.m, self.m), dtype=np.uint8)
        bits[self.bump_indices[:, 0], self.bump_indices[:, 1]] = 1
        return bits


def cell_center(layout: GridLayout, m: int, i, j):
    """Plate-frame (x, y) of the center of grid cell (i, j)."""
    half = layout.grid_span(m) / 2
    return (np.asarray(j) * layout.pitch - half, np.asarray(i) * layout.pitch - half)


def layout_geometry(bits: np.ndarray, layout: GridLayout) -> BumpSet:
    """Place one hemisphere per 1-bit, plus the four corner landmarks."""
    bits = validate_bits(bits)
    m = bits.shape[0]
    layout.check_fits(m)

    ii, jj = np.nonzero(bits)
    xs, ys = cell_center(layout, m, ii, jj)
    centers = np.column_stack([xs, ys, np.zeros_like(xs, dtype=float)])

    c = layout.grid_span(m) / 2 + layout.landmark_offset
    landmarks = np.array(
        [
            [-c, -c, 0.0],  # 0: top-left
            [c, -c, 0.0],  # 1: top-right
            [c, c, 0.0],  # 2: bottom-right
            [-c, c, 0.0],  # 3: bottom-left
        ]
    )
    return BumpSet(
        m=m,
        layout=layout,
        bump_centers=centers.astype(np.float64),
        bump_indices=np.column_stack([ii, jj]).astype(np.int64),
        bump_radius=layout.bump_radius,
        landmark_centers=landmarks,
        landmark_radius=layout.landmark_radius,
        present=bits.astype(bool),
    )
