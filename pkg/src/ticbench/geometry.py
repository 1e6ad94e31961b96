"""Landmark geometry: projection, expression filtering, motion alignment, pupils.

Canonical 3D keypoints come in with a semantic category per point.  The
pipeline here is: drop contour points, orthographically project the rest,
estimate a similarity transform from the first driving frame onto the
reference portrait, warp every frame with it, then re-seat the pupils
inside the reference eye sockets so gaze survives the retargeting.

No detector is bundled; labeled JSON files and `synthetic_face` stand in
for detector output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import rng
from .errors import (
    DegenerateConfiguration,
    EmptyLandmarkSet,
    IncompleteEyeSet,
    InsufficientPoints,
)


class Category(Enum):
    CONTOUR = "contour"
    FEATURE = "feature"
    PUPIL = "pupil"
    EYE = "eye"


@dataclass(frozen=True)
class Landmark3D:
    id: int
    x: float
    y: float
    z: float
    category: Category


@dataclass(frozen=True)
class LandmarkSet2D:
    """Labeled 2D points for one frame: list of (id, x, y)."""

    points: list[tuple[int, float, float]]
    frame_index: int = 0

    def ids(self) -> list[int]:
        return [p[0] for p in self.points]

    def coords(self) -> np.ndarray:
        return np.array([(p[1], p[2]) for p in self.points], dtype=np.float64)


@dataclass(frozen=True)
class LandmarkFrame:
    """One frame of labeled 3D points, as stored in landmark JSON files."""

    index: int
    points: list[Landmark3D]


@dataclass(frozen=True)
class SimilarityTransform2D:
    scale: float
    rotation: float
    translation: tuple[float, float]

    def apply(self, pts: LandmarkSet2D) -> LandmarkSet2D:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        tx, ty = self.translation
        out = [
            (
                pid,
                self.scale * (c * x - s * y) + tx,
                self.scale * (s * x + c * y) + ty,
            )
            for pid, x, y in pts.points
        ]
        return LandmarkSet2D(points=out, frame_index=pts.frame_index)

    def invert(self) -> "SimilarityTransform2D":
        inv_scale = 1.0 / self.scale
        c, s = math.cos(-self.rotation), math.sin(-self.rotation)
        tx, ty = self.translation
        return SimilarityTransform2D(
            scale=inv_scale,
            rotation=-self.rotation,
            translation=(
                -inv_scale * (c * tx - s * ty),
                -inv_scale * (s * tx + c * ty),
            ),
        )


def project_orthographic(points: list[Landmark3D], frame_index: int = 0) -> LandmarkSet2D:
    """Drop z; ids and order are preserved."""
    if not points:
        raise EmptyLandmarkSet("cannot project an empty landmark set")
    return LandmarkSet2D(
        points=[(p.id, p.x, p.y) for p in points], frame_index=frame_index
    )


def filter_expression_aware(points: list[Landmark3D]) -> list[Landmark3D]:
    """Keep feature, pupil and eye points; discard the facial contour."""
    return [p for p in points if p.category is not Category.CONTOUR]


def estimate_similarity(
    source: LandmarkSet2D, target: LandmarkSet2D
) -> tuple[SimilarityTransform2D, float]:
    """Least-squares similarity (scale, rotation, translation) source -> target.

    Points are matched by id.  Solved in closed form by treating points as
    complex numbers: T(s) = a*s + b with a = sum(t0 * conj(s0)) / sum(|s0|^2)
    over centered coordinates.  Returns (transform, residual RMSE).
    """
    src = {pid: (x, y) for pid, x, y in source.points}
    tgt = {pid: (x, y) for pid, x, y in target.points}
    common = sorted(set(src) & set(tgt))
    if len(common) < 3:
        raise InsufficientPoints(
            f"need >= 3 corresponding points, got {len(common)}"
        )

    s = np.array([complex(*src[i]) for i in common])
    t = np.array([complex(*tgt[i]) for i in common])
    s0 = s - s.mean()
    t0 = t - t.mean()

    # a similarity is underdetermined (up to reflection) for a degenerate
    # source: all points on one line collapse the smaller singular value
    coords = np.column_stack([s0.real, s0.imag])
    sv = np.linalg.svd(coords, compute_uv=False)
    if sv[-1] <= 1e-9 * max(sv[0], 1e-30):
        raise DegenerateConfiguration("source landmarks are collinear")

    a = np.vdot(s0, t0) / np.vdot(s0, s0).real  # vdot conjugates first arg
    scale = abs(a)
    if scale <= 0.0:
        raise DegenerateConfiguration("estimated scale is zero")
    b = t.mean() - a * s.mean()
    residual = a * s + b - t
    rmse = float(np.sqrt(np.mean(np.abs(residual) ** 2)))
    return (
        SimilarityTransform2D(
            scale=float(scale),
            rotation=float(np.angle(a)),
            translation=(float(b.real), float(b.imag)),
        ),
        rmse,
    )


def retarget_sequence(
    driving: list[LandmarkSet2D], reference: LandmarkSet2D
) -> list[LandmarkSet2D]:
    """Warp every driving frame with the frame-0 -> reference transform.

    The transform is estimated once, from the first frame only; per-frame
    re-estimation would cancel the head motion we are trying to keep.
    """
    if not driving:
        raise EmptyLandmarkSet("driving sequence is empty")
    transform, _ = estimate_similarity(driving[0], reference)
    return [transform.apply(frame) for frame in driving]


def _socket_stats(eye_points: list[Landmark3D]) -> tuple[np.ndarray, float, np.ndarray, list[int]]:
    sockets = [p for p in eye_points if p.category is Category.EYE]
    xyz = np.array([(p.x, p.y, p.z) for p in sockets], dtype=np.float64)
    centroid = xyz.mean(axis=0)
    diffs = xyz[:, None, :] - xyz[None, :, :]
    extent = float(np.sqrt((diffs**2).sum(axis=2)).max())
    return centroid, extent, xyz, [p.id for p in sockets]


def _socket_rotation(
    d_xyz: np.ndarray, d_ids: list[int], r_xyz: np.ndarray, r_ids: list[int]
) -> np.ndarray:
    """Best-fit rotation from driving socket to reference socket (Kabsch).

    Points are paired by id when the sets share >= 3 ids (same detector
    topology on both faces), otherwise by list order over the shorter set.
    """
    common = sorted(set(d_ids) & set(r_ids))
    if len(common) >= 3:
        d = np.array([d_xyz[d_ids.index(i)] for i in common])
        r = np.array([r_xyz[r_ids.index(i)] for i in common])
    else:
        n = min(len(d_ids), len(r_ids))
        d, r = d_xyz[:n], r_xyz[:n]
    d = d - d.mean(axis=0)
    r = r - r.mean(axis=0)
    u, _, vt = np.linalg.svd(d.T @ r)
    rot = (u @ vt).T
    if np.linalg.det(rot) < 0:  # exclude reflections
        vt[-1] *= -1.0
        rot = (u @ vt).T
    return rot


def transfer_pupils(
    driving_eye: list[Landmark3D], reference_eye: list[Landmark3D]
) -> list[tuple[int, float, float]]:
    """Re-seat driving pupils inside the reference eye socket.

    The pupil offset from the driving socket centroid, normalized by the
    socket extent (max pairwise distance among socket points), is rotated
    into the reference socket's orientation and re-applied at the
    reference extent.  The result is projected by dropping z.
    """
    d_pupils = [p for p in driving_eye if p.category is Category.PUPIL]
    d_sockets = [p for p in driving_eye if p.category is Category.EYE]
    r_sockets = [p for p in reference_eye if p.category is Category.EYE]
    if not d_pupils or len(d_sockets) < 3 or len(r_sockets) < 3:
        raise IncompleteEyeSet(
            "need >= 1 pupil and >= 3 socket points in each eye set"
        )

    d_centroid, d_extent, d_xyz, d_ids = _socket_stats(driving_eye)
    r_centroid, r_extent, r_xyz, r_ids = _socket_stats(reference_eye)
    if d_extent <= 0.0 or r_extent <= 0.0:
        raise DegenerateConfiguration("socket points are coincident")

    rot = _socket_rotation(d_xyz, d_ids, r_xyz, r_ids)
    out = []
    for p in d_pupils:
        offset = (np.array([p.x, p.y, p.z]) - d_centroid) / d_extent
        seated = r_centroid + r_extent * (rot @ offset)
        out.append((p.id, float(seated[0]), float(seated[1])))
    return out


def split_eyes(points: list[Landmark3D]) -> tuple[list[Landmark3D], list[Landmark3D]]:
    """Split eye and pupil points into (left, right) groups.

    Socket points are clustered by the largest x gap; pupils join the
    socket group with the nearer centroid.  Deterministic and parameter
    free, so it works on any two-eye topology without detector metadata.
    """
    sockets = sorted(
        (p for p in points if p.category is Category.EYE), key=lambda p: (p.x, p.id)
    )
    pupils = [p for p in points if p.category is Category.PUPIL]
    if len(sockets) < 2:
        return list(sockets) + list(pupils), []
    gaps = [sockets[i + 1].x - sockets[i].x for i in range(len(sockets) - 1)]
    cut = int(np.argmax(gaps)) + 1
    left, right = sockets[:cut], sockets[cut:]

    def centroid(group):
        return np.mean([(p.x, p.y, p.z) for p in group], axis=0)

    c_left, c_right = centroid(left), centroid(right)
    for p in pupils:
        xyz = np.array([p.x, p.y, p.z])
        if np.linalg.norm(xyz - c_left) <= np.linalg.norm(xyz - c_right):
            left = left + [p]
        else:
            right = right + [p]
    return left, right


def align_face_sequence(
    driving: list[LandmarkFrame], reference: LandmarkFrame
) -> list[LandmarkSet2D]:
    """Full alignment: filter contours, project, retarget, re-seat pupils.

    Pupil transfer runs after the global alignment, per frame, so the
    emitted pupils live inside the (static) reference socket geometry.
    """
    driving_2d = [
        project_orthographic(filter_expression_aware(f.points), f.index)
        for f in driving
    ]
    reference_2d = project_orthographic(
        filter_expression_aware(reference.points), reference.index
    )
    aligned = retarget_sequence(driving_2d, reference_2d)

    ref_left, ref_right = split_eyes(reference.points)
    out = []
    for frame, warped in zip(driving, aligned):
        drv_left, drv_right = split_eyes(frame.points)
        pupil_pos = {}
        for drv_eye, ref_eye in ((drv_left, ref_left), (drv_right, ref_right)):
            has_pupil = any(p.category is Category.PUPIL for p in drv_eye)
            sockets = sum(p.category is Category.EYE for p in drv_eye)
            ref_sockets = sum(p.category is Category.EYE for p in ref_eye)
            if has_pupil and sockets >= 3 and ref_sockets >= 3:
                for pid, x, y in transfer_pupils(drv_eye, ref_eye):
                    pupil_pos[pid] = (x, y)
        points = [
            (pid, *pupil_pos[pid]) if pid in pupil_pos else (pid, x, y)
            for pid, x, y in warped.points
        ]
        out.append(LandmarkSet2D(points=points, frame_index=warped.frame_index))
    return out


# ---------------------------------------------------------------------------
# synthetic face generator
# ---------------------------------------------------------------------------

FACE_CONTOUR_COUNT = 36
FACE_FEATURE_COUNT = 60
EYE_SOCKET_COUNT = 12
EYE_PUPIL_COUNT = 2

# face contour ellipse in normalized [0,1]^2 image coordinates
_CONTOUR_CENTER = (0.5, 0.5)
_CONTOUR_RADII = (0.32, 0.40)

_EYE_CENTERS = ((0.36, 0.40), (0.64, 0.40))  # (left, right)
_EYE_RADII = (0.07, 0.045)


def _ellipse(n, cx, cy, rx, ry, z):
    pts = []
    for k in range(n):
        theta = 2.0 * math.pi * k / n
        pts.append((cx + rx * math.cos(theta), cy + ry * math.sin(theta), z))
    return pts


def _feature_layout() -> list[tuple[float, float, float]]:
    """60 feature points: 2x8 brow arcs, 12 nose, 20 mouth, 12 accents."""
    pts = []
    for cx in (0.36, 0.64):  # brows: shallow arcs above each eye
        for k in range(8):
            u = k / 7.0
            pts.append((cx - 0.10 + 0.20 * u, 0.30 - 0.03 * math.sin(math.pi * u), 0.01))
    for k in range(4):  # nose bridge
        pts.append((0.5, 0.42 + 0.05 * k, 0.06))
    for k in range(8):  # nose base
        u = k / 7.0
        pts.append((0.44 + 0.12 * u, 0.60 + 0.02 * math.sin(math.pi * u), 0.05))
    pts.extend(_ellipse(12, 0.5, 0.72, 0.10, 0.045, 0.02))  # outer lips
    pts.extend(_ellipse(8, 0.5, 0.72, 0.06, 0.020, 0.02))  # inner lips
    for sx in (-1.0, 1.0):  # cheek accents
        for k in range(4):
            pts.append((0.5 + sx * (0.16 + 0.02 * k), 0.52 + 0.03 * k, 0.0))
    for k in range(4):  # forehead accents
        pts.append((0.38 + 0.08 * k, 0.22, 0.0))
    return pts


def synthetic_face(seed: int, jitter: float = 0.0) -> list[Landmark3D]:
    """Deterministic labeled face: 36 contour, 60 feature, 2x(12+2) eye points.

    jitter > 0 adds uniform(-jitter, jitter) noise per coordinate from the
    splitmix stream for `seed`; jitter = 0 yields the exact analytic
    layout (contour points satisfy the ellipse equation to 1e-9).
    """
    layout: list[tuple[float, float, float, Category]] = []
    cx, cy = _CONTOUR_CENTER
    rx, ry = _CONTOUR_RADII
    for x, y, z in _ellipse(FACE_CONTOUR_COUNT, cx, cy, rx, ry, -0.05):
        layout.append((x, y, z, Category.CONTOUR))
    for x, y, z in _feature_layout():
        layout.append((x, y, z, Category.FEATURE))
    for ex, ey in _EYE_CENTERS:
        for x, y, z in _ellipse(EYE_SOCKET_COUNT, ex, ey, *_EYE_RADII, 0.0):
            layout.append((x, y, z, Category.EYE))
        layout.append((ex, ey, 0.02, Category.PUPIL))
        layout.append((ex + 0.01, ey, 0.02, Category.PUPIL))

    noise = rng.uniform(seed, 3 * len(layout), -jitter, jitter) if jitter > 0 else None
    points = []
    for i, (x, y, z, cat) in enumerate(layout):
        if noise is not None:
            x, y, z = x + noise[3 * i], y + noise[3 * i + 1], z + noise[3 * i + 2]
        points.append(Landmark3D(id=i, x=x, y=y, z=z, category=cat))
    return points


# ---------------------------------------------------------------------------
# landmark file format
# ---------------------------------------------------------------------------
# {"frames":[{"index":int,"points":[{"id":int,"x":f,"y":f,"z":f,"cat":str}]}]}
# Floats are written with repr (shortest round-trip), so load(save(x)) == x
# bit for bit.


def save_landmark_frames(path: str | Path, frames: list[LandmarkFrame]) -> None:
    doc = {
        "frames": [
            {
                "index": f.index,
                "points": [
                    {"id": p.id, "x": p.x, "y": p.y, "z": p.z, "cat": p.category.value}
                    for p in f.points
                ],
            }
            for f in frames
        ]
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_landmark_frames(path: str | Path) -> list[LandmarkFrame]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    frames = []
    for f in doc["frames"]:
        points = [
            Landmark3D(
                id=int(p["id"]),
                x=float(p["x"]),
                y=float(p["y"]),
                z=float(p["z"]),
                category=Category(p["cat"]),
            )
            for p in f["points"]
        ]
        frames.append(LandmarkFrame(index=int(f["index"]), points=points))
    return frames
