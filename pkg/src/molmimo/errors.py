"""Exception types shared across the simulator.

Every error raised on a documented failure path derives from
:class:`MolmimoError`, so callers (CLI, service) can catch one base class
and map it to an exit code or HTTP status.
"""


class MolmimoError(Exception):
    """Base class for all simulator errors."""


# ---- channel / geometry ----

class InvalidTime(MolmimoError):
    """A time argument is outside its valid range (e.g. t <= 0)."""


class InvalidParameter(MolmimoError):
    """A physical or numeric parameter is out of range."""


class DegenerateGeometry(MolmimoError):
    """Emitter/sensor layout is unusable (coincident points, bad shape)."""


class InvalidParticleCount(MolmimoError):
    """Monte-Carlo particle count must be a positive integer."""


class ScheduleOutOfRange(MolmimoError):
    """A spray release time falls outside the simulation grid."""


class GridMismatch(MolmimoError):
    """Two traces that must share a time grid do not."""


# ---- detection ----

class NoStartIndicator(MolmimoError):
    """No sample in the trace exceeds the start-detection threshold."""


class PreambleNotDetected(MolmimoError):
    """The timing-reference rise in the preamble could not be measured."""


class TraceTooShort(MolmimoError):
    """The voltage trace ends before the requested symbol slots do."""


# ---- text protocol ----

class UnsupportedCharacter(MolmimoError):
    """Message contains a character outside the 5-bit alphabet."""


class EmptyMessage(MolmimoError):
    """Messages must contain at least one character."""


class MissingEndIndicator(MolmimoError):
    """Bit stream ended without the end-of-transmission code."""


class MalformedStream(MolmimoError):
    """Bit stream is not a whole number of 5-bit codes, or uses code 0."""


# ---- experiment harness ----

class InvalidSweep(MolmimoError):
    """Noise sweep request is empty or otherwise malformed."""
