"""Ripple-anchored normalization of nutriment positions and its exact inverse.

The two ripple boxes define a moving coordinate frame: the bottom-left corner
of the left ripple is the origin, the ripple-to-ripple direction is the x
axis, and the top-left-to-bottom-right diagonal length is the unit of
distance.  Positions expressed in that frame (``kappa``) are invariant to
camera translation, zoom, and (for point ripples) rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry
from .records import BoundingBox, FrameRecord

# Minimum anchor diagonal (pixels) below which the scale division is unsafe.
Z_MIN = 1e-6

Point = tuple[float, float]


@dataclass(frozen=True)
class Corners:
    """The four corners of a box, y-down image convention."""

    tl: Point
    tr: Point
    bl: Point
    br: Point


@dataclass(frozen=True)
class RipplePair:
    """Two ripple boxes plus the derived frame parameters.

    ``r1`` is the left box (ties broken by smaller cy), ``theta`` the angle of
    the center-to-center direction, ``z`` the tl(r1)-to-br(r2) distance, and
    ``anchor`` the bottom-left corner of ``r1`` (the origin of the normalized
    frame).
    """

    r1: BoundingBox
    r2: BoundingBox
    theta: float
    z: float
    anchor: Point

    @property
    def usable(self) -> bool:
        return self.z > Z_MIN


def corners_of(box: BoundingBox) -> Corners:
    """Corner points of a center/extent box."""
    x0 = box.cx - box.w / 2.0
    y0 = box.cy - box.h / 2.0
    x1 = box.cx + box.w / 2.0
    y1 = box.cy + box.h / 2.0
    return Corners(tl=(x0, y0), tr=(x1, y0), bl=(x0, y1), br=(x1, y1))


def ripple_angle(r1: BoundingBox, r2: BoundingBox) -> float:
    """Angle of the r1->r2 center direction, in (-pi, pi]; 0 if centers coincide."""
    return math.atan2(r2.cy - r1.cy, r2.cx - r1.cx)


def make_ripple_pair(r1: BoundingBox, r2: BoundingBox) -> RipplePair:
    """Bundle two ripple boxes with their derived frame parameters."""
    tl1 = corners_of(r1).tl
    br2 = corners_of(r2).br
    z = math.hypot(tl1[0] - br2[0], tl1[1] - br2[1])
    anchor = corners_of(r1).bl
    return RipplePair(r1=r1, r2=r2, theta=ripple_angle(r1, r2), z=z, anchor=anchor)


def rotate_point(p: Point, theta: float, pivot: Point) -> Point:
    """Rotate ``p`` by ``theta`` about ``pivot``.

    x' = (x - px) cos(theta) - (y - py) sin(theta) + px
    y' = (x - px) sin(theta) + (y - py) cos(theta) + py
    """
    x, y = _rotate_xy(p[0], p[1], theta, pivot[0], pivot[1])
    return (float(x), float(y))


def _rotate_xy(x, y, theta: float, px: float, py: float):
    """Vectorized body of rotate_point; works on scalars or ndarrays."""
    c = math.cos(theta)
    s = math.sin(theta)
    dx = x - px
    dy = y - py
    return dx * c - dy * s + px, dx * s + dy * c + py


@dataclass(frozen=True)
class NormalizedFrame:
    """Nutriment centers of one frame expressed in the ripple-anchored frame.

    ``kappa`` is an (n, 2) array aligned with the source record's nutriment
    order; ``pair`` is the ripple pair the frame was normalized against.
    """

    frame: int
    kappa: np.ndarray
    pair: RipplePair

    def __post_init__(self):
        k = np.asarray(self.kappa, dtype=float).reshape(-1, 2)
        if k.size and not np.all(np.isfinite(k)):
            raise DegenerateGeometry(f"non-finite normalized coordinate in frame {self.frame}")
        object.__setattr__(self, "kappa", k)


def _require_usable(pair: RipplePair) -> None:
    if not pair.usable:
        raise DegenerateGeometry(
            f"ripple anchor distance z={pair.z!r} is below the usable minimum {Z_MIN}"
        )


def to_normalized(record: FrameRecord, pair: RipplePair) -> NormalizedFrame:
    """Map every nutriment center into the ripple-anchored normalized frame.

    The rotation applied is the inverse of the ripple-pair angle so a rotated
    camera yields the same kappa; the y axis is flipped so kappa is y-up with
    the origin at the anchor.
    """
    _require_usable(pair)
    tl1 = corners_of(pair.r1).tl
    br1 = corners_of(pair.r1).br
    n = len(record.nutriments)
    if n == 0:
        return NormalizedFrame(frame=record.frame, kappa=np.empty((0, 2)), pair=pair)
    cx = np.array([b.cx for b in record.nutriments])
    cy = np.array([b.cy for b in record.nutriments])
    px, py = _rotate_xy(cx, cy, -pair.theta, pair.anchor[0], pair.anchor[1])
    xi_x = px - tl1[0]
    xi_y = br1[1] - py
    kappa = np.stack([xi_x, xi_y], axis=1) / pair.z
    return NormalizedFrame(frame=record.frame, kappa=kappa, pair=pair)


def to_pixel(kappa: np.ndarray, pair: RipplePair) -> np.ndarray:
    """Map normalized coordinates back to pixel positions (exact inverse)."""
    _require_usable(pair)
    k = np.asarray(kappa, dtype=float).reshape(-1, 2)
    tl1 = corners_of(pair.r1).tl
    br1 = corners_of(pair.r1).br
    xi = k * pair.z
    psi_x = xi[:, 0] + tl1[0]
    psi_y = br1[1] - xi[:, 1]
    x, y = _rotate_xy(psi_x, psi_y, pair.theta, pair.anchor[0], pair.anchor[1])
    return np.stack([x, y], axis=1)
