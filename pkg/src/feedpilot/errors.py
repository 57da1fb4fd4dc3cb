"""Exception types shared across the pipeline."""


class FeedPilotError(Exception):
    """Base class for all feedpilot errors."""


class ParseError(FeedPilotError):
    """Malformed text in a detection or ground-truth stream."""


class ValidationError(FeedPilotError):
    """A value violates a declared invariant (negative extent, non-finite, ...)."""


class ConfigError(FeedPilotError):
    """An invalid configuration value (zero frame size, window 0, rho <= 0, ...)."""


class ShapeError(FeedPilotError):
    """Mismatched dimensions between model, input, or paired lists."""


class DegenerateGeometry(FeedPilotError):
    """Ripple geometry too degenerate to normalize (anchor distance ~ 0)."""


class DegenerateLine(FeedPilotError):
    """The passed line cannot be expressed as y = a*x + b (vertical or zero-length)."""


class DivergenceError(FeedPilotError):
    """Training produced a non-finite loss."""


class EmptyInputError(FeedPilotError):
    """An operation that needs at least one element received none."""


class EmptyDatasetError(FeedPilotError):
    """No training pairs could be harvested from the stream."""
