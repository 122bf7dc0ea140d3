"""Chart-level primitives: points, grids, tensor fields, derivatives, brackets.

Everything lives in a single chart on R^n. Components are plain numpy
arrays; a tensor field is its component function plus a variance signature,
one character per slot: 'u' for an upper (contravariant) index, 'l' for a
lower (covariant) one, '' for scalars. Axes are 0-based throughout the API;
the expression language's variable names x1..xN map to axes 0..N-1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError

SYMBOLIC = "symbolic-when-available"
CENTRAL_2 = "central-2nd-order"
CENTRAL_4 = "central-4th-order"
SCHEME_KINDS = (CENTRAL_2, CENTRAL_4, SYMBOLIC)


class Point:
    """An immutable point of the chart."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        arr = np.array(coords, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("a point is a non-empty 1-d coordinate array")
        arr.flags.writeable = False
        object.__setattr__(self, "coords", arr)

    @property
    def dim(self) -> int:
        return self.coords.size

    def shifted(self, axis: int, delta: float) -> "Point":
        c = self.coords.copy()
        c[axis] += delta
        return Point(c)

    def __eq__(self, other):
        return isinstance(other, Point) and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())

    def __repr__(self):
        inner = ", ".join(repr(float(c)) for c in self.coords)
        return f"Point({inner})"


def as_point(p) -> Point:
    return p if isinstance(p, Point) else Point(p)


@dataclass(frozen=True)
class DerivativeScheme:
    """How partial derivatives are taken.

    kind 'symbolic-when-available' uses a field's exact derivative when the
    field can provide one and otherwise falls back to the 4th-order central
    stencil; the two 'central-*' kinds force finite differences everywhere.
    The stencil step is ``step * max(1, |x_axis|)`` per coordinate.
    """

    kind: str = SYMBOLIC
    step: float = 1e-5

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown derivative scheme kind: {self.kind!r}")
        if not (0.0 < self.step < 1.0):
            raise ValueError("derivative step must lie in (0, 1)")

    def step_for(self, coordinate: float) -> float:
        return self.step * max(1.0, abs(coordinate))


DEFAULT_SCHEME = DerivativeScheme()


class TensorField:
    """A tensor field given by its component function.

    ``evaluate`` maps a Point to an ndarray of shape (dim,) * len(variance).
    ``partial`` is an optional exact-derivative hook: axis -> TensorField of
    the same variance holding the componentwise partial derivative. Fields
    built from parsed expressions or constant arrays provide it; generic
    numeric closures do not and are differenced instead.
    """

    __slots__ = ("dim", "variance", "_evaluate", "_partial", "_constant")

    def __init__(self, dim, variance, evaluate, partial=None, constant=None):
        if dim < 1:
            raise ValueError("dim must be positive")
        if any(ch not in "ul" for ch in variance):
            raise ValueError(f"bad variance signature: {variance!r}")
        self.dim = int(dim)
        self.variance = str(variance)
        self._evaluate = evaluate
        self._partial = partial
        self._constant = constant

    @classmethod
    def constant(cls, dim, variance, values) -> "TensorField":
        arr = np.array(values, dtype=float)
        expected = (dim,) * len(variance)
        if arr.shape != expected:
            raise ValueError(f"constant components have shape {arr.shape}, want {expected}")
        arr.flags.writeable = False
        zero = None

        def make_zero(_axis):
            nonlocal zero
            if zero is None:
                zero = cls.constant(dim, variance, np.zeros(expected))
            return zero

        return cls(dim, variance, lambda p: arr, partial=make_zero, constant=arr)

    @classmethod
    def zero(cls, dim, variance) -> "TensorField":
        return cls.constant(dim, variance, np.zeros((dim,) * len(variance)))

    @property
    def shape(self):
        return (self.dim,) * len(self.variance)

    @property
    def is_constant(self) -> bool:
        return self._constant is not None

    @property
    def constant_components(self):
        return self._constant

    @property
    def has_exact_derivative(self) -> bool:
        return self._partial is not None

    def components(self, p) -> np.ndarray:
        p = as_point(p)
        if p.dim != self.dim:
            raise ValueError(f"point dim {p.dim} != field dim {self.dim}")
        out = np.asarray(self._evaluate(p), dtype=float)
        if out.shape != self.shape:
            raise ValueError(f"field produced shape {out.shape}, want {self.shape}")
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"non-finite field value at {p!r}", point=p)
        return out

    def partial_field(self, axis: int) -> "TensorField | None":
        if self._partial is None:
            return None
        return self._partial(axis)


def partial_derivative(field: TensorField, p, axis: int, scheme: DerivativeScheme = DEFAULT_SCHEME):
    """Componentwise d/dx^axis of the field at p.

    Exact when the scheme allows it and the field carries a derivative hook;
    otherwise a central stencil. Stencil evaluations that come back
    non-finite raise EvaluationError at the offending stencil point.
    """
    p = as_point(p)
    if not (0 <= axis < field.dim):
        raise ValueError(f"axis {axis} out of range for dim {field.dim}")
    if scheme.kind == SYMBOLIC and field.has_exact_derivative:
        return field.partial_field(axis).components(p)
    h = scheme.step_for(p.coords[axis])
    if scheme.kind == CENTRAL_2:
        fp = field.components(p.shifted(axis, +h))
        fm = field.components(p.shifted(axis, -h))
        return (fp - fm) / (2.0 * h)
    fm2 = field.components(p.shifted(axis, -2.0 * h))
    fm1 = field.components(p.shifted(axis, -h))
    fp1 = field.components(p.shifted(axis, +h))
    fp2 = field.components(p.shifted(axis, +2.0 * h))
    return (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h)


def jacobian(field: TensorField, p, scheme: DerivativeScheme = DEFAULT_SCHEME):
    """All partials stacked: result[axis, ...] = d_axis components."""
    p = as_point(p)
    return np.stack([partial_derivative(field, p, a, scheme) for a in range(field.dim)])


def lie_bracket(x_field: TensorField, y_field: TensorField, p, scheme: DerivativeScheme = DEFAULT_SCHEME):
    """[X, Y]^mu = X^lam d_lam Y^mu - Y^lam d_lam X^mu at p."""
    if x_field.variance != "u" or y_field.variance != "u":
        raise ValueError("lie_bracket expects two vector fields")
    if x_field.dim != y_field.dim:
        raise ValueError("vector fields live on charts of different dimension")
    p = as_point(p)
    xv = x_field.components(p)
    yv = y_field.components(p)
    dy = jacobian(y_field, p, scheme)
    dx = jacobian(x_field, p, scheme)
    return xv @ dy - yv @ dx


@dataclass(frozen=True)
class Grid:
    """A product grid: per-axis linspace over [center - hw, center + hw].

    An axis with a single point contributes just its center. ``sample``
    enumerates points lexicographically by axis index (axis 0 slowest), so
    grid traversal order is deterministic.
    """

    center: tuple
    half_width: tuple
    points_per_axis: tuple

    def __post_init__(self):
        center = tuple(float(c) for c in _aslist(self.center))
        dim = len(center)
        hw = _broadcast(self.half_width, dim, "half_width")
        ppa = tuple(int(m) for m in _broadcast(self.points_per_axis, dim, "points_per_axis"))
        if dim == 0:
            raise ValueError("grid center must be non-empty")
        if any(w < 0 for w in hw):
            raise ValueError("half_width must be non-negative")
        if any(m < 1 for m in ppa):
            raise ValueError("points_per_axis must be >= 1")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_width", tuple(float(w) for w in hw))
        object.__setattr__(self, "points_per_axis", ppa)

    @property
    def dim(self) -> int:
        return len(self.center)

    def axis_values(self, axis: int):
        c = self.center[axis]
        w = self.half_width[axis]
        m = self.points_per_axis[axis]
        if m == 1:
            return np.array([c])
        return np.linspace(c - w, c + w, m)

    def sample(self) -> list:
        axes = [self.axis_values(a) for a in range(self.dim)]
        return [Point(combo) for combo in itertools.product(*axes)]

    @classmethod
    def cube(cls, center, half_width, points) -> "Grid":
        return cls(tuple(center), half_width, points)


def _aslist(value):
    if np.isscalar(value):
        return [value]
    return list(value)


def _broadcast(value, dim, name):
    vals = _aslist(value)
    if len(vals) == 1:
        return [float(vals[0])] * dim
    if len(vals) != dim:
        raise ValueError(f"{name} has {len(vals)} entries, grid dim is {dim}")
    return [float(v) for v in vals]
