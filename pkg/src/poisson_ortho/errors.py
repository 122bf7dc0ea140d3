"""Exception types shared across the package."""


class GeometryError(Exception):
    """Base class for domain-level failures (as opposed to usage bugs)."""


class EvaluationError(GeometryError):
    """A field produced a non-finite value during evaluation.

    Carries the offending point so stencil failures are attributable.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DegeneracyError(GeometryError):
    """A matrix that must be invertible is numerically singular.

    ``detail`` holds diagnostics (determinant, condition number, the
    offending matrix) for error reports.
    """

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail or {}


class RegularityError(GeometryError):
    """Bivector rank is wrong or jumps across the sampled grid."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points or []


class ConsistencyError(GeometryError):
    """Criteria that must agree produced conflicting verdicts."""


class ConfigError(GeometryError):
    """A scenario configuration failed validation; message names the field."""


class ExprError(Exception):
    """Base class for expression-language failures."""


class ExprSyntaxError(ExprError):
    """Parse failure; ``offset`` is the byte offset into the source text."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ExprDomainError(ExprError):
    """Evaluation hit a domain fault (division by zero, sqrt of a negative).

    ``where`` is the pretty-printed subexpression that failed; ``offset`` is
    its position in the original source when known, else -1.
    """

    def __init__(self, message, where=None, offset=-1):
        loc = f" in '{where}'" if where else ""
        super().__init__(f"{message}{loc}")
        self.where = where
        self.offset = offset
