"""Per-frame detection records: bounding boxes for nutriments and ripples."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ValidationError


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box given by center, width, and height in pixels."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"bounding box {name} is not finite: {v!r}")
        if self.w < 0 or self.h < 0:
            raise ValidationError(
                f"bounding box extent must be non-negative, got w={self.w}, h={self.h}"
            )

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    def as_list(self) -> list[float]:
        return [self.cx, self.cy, self.w, self.h]


@dataclass(frozen=True)
class FrameRecord:
    """One video frame's detections.

    ``nutriments`` keeps detector order; ``ripples`` normally holds the two
    boxes bounding the feeding area, but real detectors drop or duplicate
    boxes, so any count is carried and resolved downstream.
    """

    frame: int
    nutriments: tuple[BoundingBox, ...] = field(default_factory=tuple)
    ripples: tuple[BoundingBox, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.frame < 0:
            raise ValidationError(f"frame index must be non-negative, got {self.frame}")
        object.__setattr__(self, "nutriments", tuple(self.nutriments))
        object.__setattr__(self, "ripples", tuple(self.ripples))

    @property
    def geometry_ready(self) -> bool:
        """True when the record itself carries exactly two ripple boxes."""
        return len(self.ripples) == 2


@dataclass(frozen=True)
class TruthRecord:
    """Ground-truth sidecar row: exact next positions and crossing count."""

    frame: int
    next_positions: tuple[tuple[float, float], ...]
    crossings: int

    def __post_init__(self):
        if self.crossings < 0:
            raise ValidationError(f"crossing count must be >= 0, got {self.crossings}")
        object.__setattr__(
            self,
            "next_positions",
            tuple((float(x), float(y)) for x, y in self.next_positions),
        )
