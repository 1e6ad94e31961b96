"""Binary masks over pixel or token grids.

Three masks matter downstream: the expression mask (dilated keypoints),
the facial mask (filled contour polygon) and their union, which guides
cache updates once downsampled to a block's token resolution.  All
geometry is integer and deterministic: dilation uses a Chebyshev square,
polygon fill uses even-odd scanline parity over the integer lattice with
boundary points included.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegeneratePolygon, EmptyGrid, ShapeMismatch
from .geometry import Category, Landmark3D, LandmarkSet2D, project_orthographic


@dataclass(frozen=True)
class TokenMask:
    """Row-major binary grid; bits has shape (height, width)."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        if self.bits.shape != (self.height, self.width):
            raise ShapeMismatch(
                f"bits shape {self.bits.shape} != ({self.height}, {self.width})"
            )
        object.__setattr__(self, "bits", self.bits.astype(bool))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TokenMask)
            and self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.bits, other.bits))
        )

    def popcount(self) -> int:
        return int(self.bits.sum())

    def complement(self) -> "TokenMask":
        return TokenMask(self.width, self.height, ~self.bits)

    def union(self, other: "TokenMask") -> "TokenMask":
        if (self.width, self.height) != (other.width, other.height):
            raise ShapeMismatch("mask dimensions differ")
        return TokenMask(self.width, self.height, self.bits | other.bits)

    def flat(self) -> np.ndarray:
        """Row-major flattened bits, one per token."""
        return self.bits.reshape(-1)


def empty_mask(width: int, height: int) -> TokenMask:
    if width <= 0 or height <= 0:
        raise EmptyGrid(f"grid {width}x{height} has no cells")
    return TokenMask(width, height, np.zeros((height, width), dtype=bool))


def full_mask(width: int, height: int) -> TokenMask:
    if width <= 0 or height <= 0:
        raise EmptyGrid(f"grid {width}x{height} has no cells")
    return TokenMask(width, height, np.ones((height, width), dtype=bool))


def _to_pixels(points: LandmarkSet2D, width: int, height: int) -> list[tuple[int, int]]:
    # normalized [0,1]^2 -> integer pixels by floor, clipped to the border
    out = []
    for _, x, y in points.points:
        px = min(max(int(np.floor(x * width)), 0), width - 1)
        py = min(max(int(np.floor(y * height)), 0), height - 1)
        out.append((px, py))
    return out


def dilate_points(
    points: LandmarkSet2D, radius: int, width: int, height: int
) -> TokenMask:
    """Set every cell within Chebyshev distance `radius` of a landmark pixel."""
    if width <= 0 or height <= 0:
        raise EmptyGrid(f"grid {width}x{height} has no cells")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    bits = np.zeros((height, width), dtype=bool)
    for px, py in _to_pixels(points, width, height):
        x0, x1 = max(px - radius, 0), min(px + radius, width - 1)
        y0, y1 = max(py - radius, 0), min(py + radius, height - 1)
        bits[y0 : y1 + 1, x0 : x1 + 1] = True
    return TokenMask(width, height, bits)


def fill_contour(
    contour: list[tuple[float, float]], width: int, height: int
) -> TokenMask:
    """Even-odd fill of a closed polygon given in pixel coordinates.

    Lattice points (i, j) with odd ray-crossing parity are set; points
    lying on a polygon edge are set regardless of parity, so thin or
    axis-aligned shapes keep their boundary.
    """
    if width <= 0 or height <= 0:
        raise EmptyGrid(f"grid {width}x{height} has no cells")
    if len(contour) < 3:
        raise DegeneratePolygon(f"need >= 3 points, got {len(contour)}")
    pts = np.asarray(contour, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    area2 = float(np.sum(x * y2 - x2 * y))
    if abs(area2) <= 1e-12 * max(1.0, float(np.abs(pts).max()) ** 2):
        raise DegeneratePolygon("polygon has zero area")

    jj, ii = np.meshgrid(
        np.arange(height, dtype=np.float64),
        np.arange(width, dtype=np.float64),
        indexing="ij",
    )
    crossings = np.zeros((height, width), dtype=np.int64)
    on_edge = np.zeros((height, width), dtype=bool)
    for (x1, y1), (x2_, y2_) in zip(pts, np.roll(pts, -1, axis=0)):
        # half-open vertical range avoids double-counting shared vertices
        if y1 != y2_:
            lo, hi = (y1, y2_) if y1 < y2_ else (y2_, y1)
            in_range = (jj >= lo) & (jj < hi)
            cx = x1 + (jj - y1) * (x2_ - x1) / (y2_ - y1)
            crossings += (in_range & (cx > ii)).astype(np.int64)
        # boundary test: perpendicular distance ~ 0 within segment extent
        ex, ey = x2_ - x1, y2_ - y1
        seg_len2 = ex * ex + ey * ey
        if seg_len2 == 0.0:
            on_edge |= (np.abs(ii - x1) < 1e-9) & (np.abs(jj - y1) < 1e-9)
            continue
        tproj = ((ii - x1) * ex + (jj - y1) * ey) / seg_len2
        cross = (ii - x1) * ey - (jj - y1) * ex
        on_edge |= (
            (np.abs(cross) <= 1e-9 * np.sqrt(seg_len2))
            & (tproj >= 0.0)
            & (tproj <= 1.0)
        )
    bits = ((crossings % 2) == 1) | on_edge
    return TokenMask(width, height, bits)


def downsample_any(mask: TokenMask, factor: int) -> TokenMask:
    """Max-pool downsample: an output cell is set iff any covered cell is."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if mask.width % factor or mask.height % factor:
        raise ShapeMismatch(
            f"{mask.width}x{mask.height} not divisible by factor {factor}"
        )
    h, w = mask.height // factor, mask.width // factor
    bits = mask.bits.reshape(h, factor, w, factor).any(axis=(1, 3))
    return TokenMask(w, h, bits)


def default_dilation_radius(resolution: int) -> int:
    """2 px at a 64-wide grid, scaled proportionally; never below 1."""
    return max(1, round(2 * resolution / 64))


def expression_mask(
    face: list[Landmark3D], width: int, height: int, radius: int | None = None
) -> TokenMask:
    """Dilate the expression-aware (non-contour) landmarks."""
    keep = [p for p in face if p.category is not Category.CONTOUR]
    pts = project_orthographic(keep)
    r = default_dilation_radius(width) if radius is None else radius
    return dilate_points(pts, r, width, height)


def facial_mask(face: list[Landmark3D], width: int, height: int) -> TokenMask:
    """Fill the projected facial contour polygon."""
    contour = [p for p in face if p.category is Category.CONTOUR]
    if len(contour) < 3:
        raise DegeneratePolygon("face has fewer than 3 contour points")
    px = [(p.x * width, p.y * height) for p in contour]
    return fill_contour(px, width, height)


def landmark_cache_mask(
    face: list[Landmark3D],
    latent_size: int,
    token_size: int,
    radius: int | None = None,
) -> TokenMask:
    """Union of expression and facial masks, pooled to the token grid."""
    if latent_size % token_size:
        raise ShapeMismatch(
            f"latent grid {latent_size} not divisible by token grid {token_size}"
        )
    m = expression_mask(face, latent_size, latent_size, radius).union(
        facial_mask(face, latent_size, latent_size)
    )
    return downsample_any(m, latent_size // token_size)


def save_pgm(mask: TokenMask, path: str | Path) -> None:
    """Binary PGM (P5, maxval 255): set cells are 255, clear cells 0."""
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    payload = (mask.bits.astype(np.uint8) * 255).tobytes()
    Path(path).write_bytes(header + payload)
