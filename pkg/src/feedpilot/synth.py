"""Synthetic detection streams with exact ground truth.

Pellets follow ballistic (constant-acceleration) trajectories from the top
edge toward the ripple region; two ripple boxes sit lower in the frame,
optionally drifting.  The generator records, for every frame, each pellet's
exact next position and the exact number of counting-line crossings, computed
by direct simulation so downstream components can be checked against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .records import BoundingBox, FrameRecord, TruthRecord

# Pellets vanish this far (px) beyond the canvas.
_EDGE_MARGIN = 10.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs of the synthetic scene.

    ``density`` is the target number of pellets concurrently in flight (at
    most one spawns per frame); ``speed`` the launch speed in px/frame toward
    the ripple midpoint; ``gravity`` the downward acceleration.  With speed
    and gravity both zero the scene is static.  ``ripple_dropout`` is the
    per-frame probability of emitting fewer than two ripple boxes, which
    exercises the carry-forward rule downstream.
    """

    frames: int = 418
    seed: int = 0
    width: float = 1920.0
    height: float = 1080.0
    density: float = 8.0
    speed: float = 30.0
    gravity: float = 0.45
    jitter: float = 0.08
    ripple_drift: float = 0.0
    ripple_dropout: float = 0.0
    max_tracks: int | None = None
    rho: float = 3.6

    def __post_init__(self):
        if self.frames < 1:
            raise ConfigError(f"frames must be >= 1, got {self.frames}")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError(f"frame size must be positive, got {self.width}x{self.height}")
        if self.density < 0:
            raise ConfigError(f"density must be >= 0, got {self.density}")
        if self.speed < 0:
            raise ConfigError(f"speed must be >= 0, got {self.speed}")
        if not 0.0 <= self.ripple_dropout < 1.0:
            raise ConfigError(f"ripple_dropout must be in [0, 1), got {self.ripple_dropout}")
        if self.rho <= 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if self.max_tracks is not None and self.max_tracks < 0:
            raise ConfigError(f"max_tracks must be >= 0, got {self.max_tracks}")


@dataclass(frozen=True)
class SyntheticScenario:
    """Generated records plus per-frame truth; lengths always match."""

    records: tuple[FrameRecord, ...]
    truths: tuple[TruthRecord, ...]
    n_tracks: int


class _Pellet:
    __slots__ = ("x", "y", "vx", "vy", "w", "h")

    def __init__(self, x, y, vx, vy, w, h):
        self.x, self.y, self.vx, self.vy = x, y, vx, vy
        self.w, self.h = w, h

    def next_position(self, gravity: float) -> tuple[float, float]:
        vy = self.vy + gravity
        return (self.x + self.vx, self.y + vy)

    def advance(self, gravity: float) -> None:
        self.vy += gravity
        self.x += self.vx
        self.y += self.vy


def _ripple_boxes(config: ScenarioConfig, frame: int) -> tuple[BoundingBox, BoundingBox]:
    w, h = config.width, config.height
    shift = config.ripple_drift * frame
    r1 = BoundingBox(0.38 * w + shift, 0.72 * h, 0.16 * w, 0.10 * h)
    r2 = BoundingBox(0.63 * w + shift, 0.70 * h, 0.16 * w, 0.11 * h)
    return r1, r2


def _line_coeffs(r1: BoundingBox, r2: BoundingBox, rho: float) -> tuple[float, float]:
    """Counting-line slope/intercept straight from the two boxes.

    Written out independently of the counting module so generator truth can
    serve as an oracle for it.
    """
    if (r2.cx, r2.cy) < (r1.cx, r1.cy):
        r1, r2 = r2, r1
    tl1x = r1.cx - r1.w / 2.0
    br1y = r1.cy + r1.h / 2.0
    br2x = r2.cx + r2.w / 2.0
    br2y = r2.cy + r2.h / 2.0
    z = math.hypot(tl1x - br2x, (r1.cy - r1.h / 2.0) - br2y)
    p1x, p1y = tl1x, br1y - z / rho
    p2x = p1x + (r2.cx - r1.cx)
    p2y = p1y - (r1.cy - r2.cy)
    alpha = (p2y - p1y) / (p2x - p1x)
    beta = p1y - alpha * p1x
    return alpha, beta


def _crossed(alpha: float, beta: float, cur, nxt) -> bool:
    d_cur = cur[1] - (alpha * cur[0] + beta)
    d_nxt = nxt[1] - (alpha * nxt[0] + beta)
    return d_cur < -1e-9 and d_nxt >= -1e-9


def synth_scenario(config: ScenarioConfig) -> SyntheticScenario:
    """Generate a deterministic scenario with exact ground truth."""
    rng = np.random.default_rng(config.seed)
    w, h = config.width, config.height
    pellets: list[_Pellet] = []
    spawned = 0
    records: list[FrameRecord] = []
    truths: list[TruthRecord] = []
    carried: tuple[BoundingBox, BoundingBox] | None = None

    for frame in range(config.frames):
        r1, r2 = _ripple_boxes(config, frame)

        drop = config.ripple_dropout > 0 and rng.random() < config.ripple_dropout
        if drop:
            emitted = (r1,) if rng.integers(0, 2) else ()
        else:
            emitted = (r1, r2) if rng.random() < 0.5 else (r2, r1)

        can_spawn = config.max_tracks is None or spawned < config.max_tracks
        if can_spawn and len(pellets) < config.density:
            x0 = rng.uniform(0.15 * w, 0.85 * w)
            y0 = rng.uniform(0.02 * h, 0.08 * h)
            aim_x = (r1.cx + r2.cx) / 2.0 + rng.normal(0.0, 0.05 * w)
            aim_y = (r1.cy + r2.cy) / 2.0
            if config.speed > 0:
                d = math.hypot(aim_x - x0, aim_y - y0)
                s = config.speed * max(0.1, 1.0 + config.jitter * rng.normal())
                vx = (aim_x - x0) / d * s
                vy = (aim_y - y0) / d * s
            else:
                vx = vy = 0.0
            pellets.append(
                _Pellet(x0, y0, vx, vy, rng.uniform(9.0, 13.0), rng.uniform(6.0, 36.0))
            )
            spawned += 1

        boxes = tuple(BoundingBox(p.x, p.y, p.w, p.h) for p in pellets)
        records.append(FrameRecord(frame=frame, nutriments=boxes, ripples=emitted))

        if len(emitted) == 2:
            carried = (r1, r2)
        nexts = tuple(p.next_position(config.gravity) for p in pellets)
        crossings = 0
        if carried is not None:
            alpha, beta = _line_coeffs(carried[0], carried[1], config.rho)
            for p, nxt in zip(pellets, nexts):
                if _crossed(alpha, beta, (p.x, p.y), nxt):
                    crossings += 1
        truths.append(TruthRecord(frame=frame, next_positions=nexts, crossings=crossings))

        for p in pellets:
            p.advance(config.gravity)
        pellets = [
            p
            for p in pellets
            if -_EDGE_MARGIN <= p.x <= w + _EDGE_MARGIN
            and -_EDGE_MARGIN <= p.y <= h + _EDGE_MARGIN
        ]

    return SyntheticScenario(records=tuple(records), truths=tuple(truths), n_tracks=spawned)
