"""Exception types shared across the package."""


class DfsimError(Exception):
    """Base class for all dfsim errors."""


class NegativeMass(DfsimError):
    """A probability weight was below the accepted clamping tolerance."""


class ZeroMass(DfsimError):
    """Probability weights sum to zero or less."""


class DimensionMismatch(DfsimError):
    """Operands have incompatible dimensions."""


class SizeOverflow(DfsimError):
    """A triangulation would exceed the configured size cap."""


class IndexOutOfRange(DfsimError):
    """A vertex or cell index is out of range."""


class NumericalFailure(DfsimError):
    """An internal exact solver failed; treated as a bug signal."""


class RefinementExhausted(DfsimError):
    """Mesh refinement hit its cap without certifying a solution."""

    def __init__(self, kmax, message=""):
        self.kmax = kmax
        super().__init__(message or f"refinement exhausted at kmax={kmax}")


class ValidityViolation(DfsimError):
    """A Sceptic move violated its validity constraint or declared bound."""


class ProtocolOrderViolation(DfsimError):
    """Moves were supplied out of protocol order."""


class SideBetInvalid(DfsimError):
    """A side bet has positive mean under the randomized forecast."""


class UnsupportedDimension(DfsimError):
    """A strategy does not support this outcome-space size."""


class ScriptExhausted(DfsimError):
    """A scripted strategy ran out of moves."""


class NegativeCapital(DfsimError):
    """An input capital stream went negative (illegal input)."""


class ParseError(DfsimError):
    """A transcript could not be parsed."""

    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class SchemaVersionMismatch(DfsimError):
    """Transcript schema tag is not one this build understands."""


class SinkFailure(DfsimError):
    """Writing a transcript failed."""


class ConfigError(DfsimError):
    """A scenario configuration is malformed or invalid."""
