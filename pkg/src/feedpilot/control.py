"""Feed-machine on/off decisions from the two windowed signals.

Two activity thresholds form a hysteresis band so the machine does not
chatter, and a windowed-count ceiling shuts feeding down on oversupply no
matter what the activity says.  When the run has no texture channel the
activity gate is treated as satisfied and control degrades to count-only.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError

REASON_STARTUP = "startup"
REASON_ACTIVITY_LOW = "activity_low"
REASON_ACTIVITY_HIGH = "activity_high"
REASON_OVERSUPPLY = "oversupply"


@dataclass(frozen=True)
class ControlConfig:
    """act_off <= act_on bound the hysteresis dead band; count_max caps supply."""

    act_on: float
    act_off: float
    count_max: int
    window: int = 20

    def __post_init__(self):
        if self.act_off > self.act_on:
            raise ConfigError(
                f"act_off ({self.act_off}) must be <= act_on ({self.act_on})"
            )
        if self.count_max < 0:
            raise ConfigError(f"count_max must be >= 0, got {self.count_max}")
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")


@dataclass(frozen=True)
class ControlDecision:
    frame: int
    feeding: bool
    windowed_count: int
    windowed_activity: float | None
    reason: str


def control_decide(
    state: ControlDecision | None,
    frame: int,
    windowed_count: int,
    windowed_activity: float | None,
    config: ControlConfig,
) -> ControlDecision:
    """One step of the control law.

    Oversupply forces OFF; otherwise low activity turns OFF, high activity
    turns ON, and anything inside the dead band holds the previous state.
    ``state=None`` starts OFF with reason 'startup'.  A missing activity
    value satisfies the activity gate (count-only mode).
    """
    if state is None:
        prev_feeding, prev_reason = False, REASON_STARTUP
    else:
        prev_feeding, prev_reason = state.feeding, state.reason

    if windowed_count >= config.count_max:
        feeding, reason = False, REASON_OVERSUPPLY
    elif windowed_activity is not None and windowed_activity <= config.act_off:
        feeding, reason = False, REASON_ACTIVITY_LOW
    elif windowed_activity is None or windowed_activity >= config.act_on:
        feeding, reason = True, REASON_ACTIVITY_HIGH
    else:
        feeding, reason = prev_feeding, prev_reason

    return ControlDecision(
        frame=frame,
        feeding=feeding,
        windowed_count=windowed_count,
        windowed_activity=windowed_activity,
        reason=reason,
    )
