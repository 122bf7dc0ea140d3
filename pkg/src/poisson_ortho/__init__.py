"""Numerical checks for integrability of the metric-orthogonal distribution.

Given a regular Poisson structure and a pseudo-Riemannian metric on the
same chart, this package builds the distribution orthogonal to the
symplectic leaves and decides whether it is integrable, evaluating a
suite of mutually independent criteria whose agreement is itself
checked.  Linear Lie-Poisson structures (so3, sl2r, so3xso3, se3) come
built in, along with a scenario runner and CLI.
"""

from .context import ChartContext
from .errors import (
    ConfigError, ConsistencyError, DegeneracyError, EvaluationError,
    ExprDomainError, ExprError, ExprSyntaxError, GeometryError,
    RegularityError,
)
from .geometry import DerivativeScheme, Grid, Point, TensorField
from .integrability import Verdict, verdict
from .liepoisson import (
    BuiltinAlgebra, StructureConstants, builtin_algebra, killing_form,
    linear_poisson, se3_metric, validate_constants, verify_integral_surface,
)
from .metric import MetricField
from .poisson import PoissonStructure, canonical_bivector, validate_poisson
from .scenarios import (
    BUILTIN_SCENARIOS, RunReport, ScenarioConfig, load_scenario, run,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_SCENARIOS",
    "BuiltinAlgebra",
    "ChartContext",
    "ConfigError",
    "ConsistencyError",
    "DegeneracyError",
    "DerivativeScheme",
    "EvaluationError",
    "ExprDomainError",
    "ExprError",
    "ExprSyntaxError",
    "GeometryError",
    "Grid",
    "MetricField",
    "Point",
    "PoissonStructure",
    "RegularityError",
    "RunReport",
    "ScenarioConfig",
    "StructureConstants",
    "TensorField",
    "Verdict",
    "builtin_algebra",
    "canonical_bivector",
    "killing_form",
    "linear_poisson",
    "load_scenario",
    "run",
    "se3_metric",
    "validate_constants",
    "validate_poisson",
    "verdict",
    "verify_integral_surface",
    "__version__",
]
