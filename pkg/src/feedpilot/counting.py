"""Passed-line construction and direction-aware crossing counts.

The counting line sits z/rho pixels above the bottom-left corner of the left
ripple box and runs parallel to the ripple center-to-center direction.  A
nutriment is counted when its current position is on the machine side (above
the line, smaller y) and its predicted position is on the ripple side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateLine, ShapeError
from .geometry import RipplePair, corners_of

DEFAULT_RHO = 3.6

# Points within this distance (px) of the line count as the destination side.
ON_LINE_TOL = 1e-9


@dataclass(frozen=True)
class PassedLine:
    """y = alpha * x + beta through p1 and p2 (pixel coordinates)."""

    alpha: float
    beta: float
    p1: tuple[float, float]
    p2: tuple[float, float]
    rho: float

    def y_at(self, x: float) -> float:
        return self.alpha * x + self.beta


def passed_line(pair: RipplePair, rho: float = DEFAULT_RHO) -> PassedLine:
    """Build the counting line from the ripple pair.

    p1 = (tl1.x, br1.y - z/rho); p2 offsets p1 by the ripple center delta, so
    the line is parallel to the ripple axis.
    """
    if rho <= 0:
        raise ConfigError(f"rho must be positive, got {rho}")
    if not pair.usable:
        raise DegenerateLine(f"ripple pair unusable (z={pair.z!r})")
    tl1 = corners_of(pair.r1).tl
    br1 = corners_of(pair.r1).br
    p1 = (tl1[0], br1[1] - pair.z / rho)
    p2 = (p1[0] + (pair.r2.cx - pair.r1.cx), p1[1] - (pair.r1.cy - pair.r2.cy))
    dx = p2[0] - p1[0]
    if abs(dx) <= 1e-9:
        raise DegenerateLine(
            f"defining points are vertically aligned (dx={dx!r}); slope undefined"
        )
    alpha = (p2[1] - p1[1]) / dx
    beta = p1[1] - alpha * p1[0]
    return PassedLine(alpha=alpha, beta=beta, p1=p1, p2=p2, rho=rho)


def side_of(line: PassedLine, p: tuple[float, float]) -> int:
    """+1 below the line (larger y, ripple side), -1 above, 0 on the line."""
    d = p[1] - line.y_at(p[0])
    if abs(d) <= ON_LINE_TOL:
        return 0
    return 1 if d > 0 else -1


def count_crossings(current, predicted, line: PassedLine, toward_ripple: bool = True) -> int:
    """Count positions that move across the line machine-side -> ripple-side.

    ``current`` and ``predicted`` are aligned (n, 2) point sequences; index i
    of one corresponds to index i of the other.  On-line points count as the
    destination side.  ``toward_ripple=False`` counts the opposite direction.
    """
    cur = np.asarray(current, dtype=float).reshape(-1, 2)
    pred = np.asarray(predicted, dtype=float).reshape(-1, 2)
    if cur.shape != pred.shape:
        raise ShapeError(
            f"current and predicted lengths differ: {cur.shape[0]} vs {pred.shape[0]}"
        )
    if cur.shape[0] == 0:
        return 0
    d_cur = cur[:, 1] - (line.alpha * cur[:, 0] + line.beta)
    d_pred = pred[:, 1] - (line.alpha * pred[:, 0] + line.beta)
    if toward_ripple:
        # strictly above -> (below or on-line)
        crossed = (d_cur < -ON_LINE_TOL) & (d_pred >= -ON_LINE_TOL)
    else:
        crossed = (d_cur > ON_LINE_TOL) & (d_pred <= ON_LINE_TOL)
    return int(np.count_nonzero(crossed))


def windowed(series, window: int) -> list[int]:
    """Trailing-window sums; the first window-1 entries sum the available prefix."""
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    values = list(series)
    return [sum(values[max(0, i - window + 1) : i + 1]) for i in range(len(values))]


