"""Exception hierarchy shared by all hymera modules."""


class HymeraError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(HymeraError, ValueError):
    """Leg, dimension or partition mismatch."""


class MissingParameter(HymeraError, KeyError):
    """A constituent tensor was requested without one of its angles."""


class SchemaError(HymeraError, ValueError):
    """A contraction schema is malformed (unbound role, dangling leg, disconnected graph)."""


class ConstraintViolation(HymeraError):
    """A tensor or map fails an algebraic constraint it is required to satisfy."""


class SolverError(HymeraError):
    """The eigensolver failed or returned pairs above the residual tolerance."""


class DeflationError(HymeraError, ValueError):
    """A boundary word is not the image of an inflation step."""


class GrammarError(HymeraError, ValueError):
    """An inflation grammar is malformed or its matrix is not primitive."""
