"""Exception types shared across the package."""


class LppError(Exception):
    """Base class for all lppsim errors."""


class DomainError(LppError, ValueError):
    """An argument lies outside the operation's domain."""


class InvalidRegionError(LppError, ValueError):
    """A rectangle with lo > hi, or a sink that is not the region corner."""


class CapacityError(LppError, ValueError):
    """A request exceeding the configured memory or enumeration cap."""


class OrderingError(LppError, ValueError):
    """Points violate the coordinatewise order required by the operation."""


class DepthRangeError(LppError, ValueError):
    """A line depth outside the queried path or family range."""


class GeometryError(LppError, ValueError):
    """A point-family construction with inconsistent geometry."""


class InsufficientDataError(LppError, ValueError):
    """Too few usable points for a fit."""


class InvariantViolation(LppError, RuntimeError):
    """A structural invariant failed on a sampled configuration.

    Raised by the per-trial checks inside the experiments; any occurrence
    is a bug, never an expected outcome.
    """


class CheckpointError(LppError, RuntimeError):
    """A checkpoint file that does not match the run it is resumed into."""
