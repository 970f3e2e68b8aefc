from dataclasses import dataclass, field
import logging
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

from .coefficients import Coefficient
from .expr import (Add, Div, Expr, Func, InfinitesimalConst, IntPow, Mul, Neg, RealConst, Sub, Var,
                   add, generator_names, max_var_index, neg, nth_derivative, substitute)
from .hyperreal import DivisionByZeroError, GeneratorRegistry, Hyperreal
from .parser import ArityError, parse
from .transcendental import lift


logger = logging.getLogger(__name__)


class OverrideError(Exception):
    pass


@dataclass(frozen=True, slots=True)
class Point:
    coordinates: tuple[Hyperreal, ...]

    def __post_init__(self):
        if not isinstance(self.coordinates, tuple):
            object.__setattr__(self, "coordinates", tuple(self.coordinates))
        for c in self.coordinates:
            if not isinstance(c, Hyperreal):
                raise TypeError(f"Point coordinates must be Hyperreal. Got {type(c)}")
        registries = {c.registry for c in self.coordinates}
        if len(registries) > 1:
            raise ValueError("Point coordinates must share one registry.")

    @classmethod
    def of(cls, registry: GeneratorRegistry, *values) -> "Point":
        return cls(tuple(registry.coerce(v) for v in values))

    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    def __len__(self) -> int:
        return len(self.coordinates)

    def __getitem__(self, i: int) -> Hyperreal:
        return self.coordinates[i]

    def __iter__(self):
        return iter(self.coordinates)

    def is_standard(self) -> bool:
        return all(c.is_standard() for c in self.coordinates)

    def is_nearstandard(self) -> bool:
        return all(c.is_finite() for c in self.coordinates)

    def standard_coordinates(self) -> tuple[Coefficient, ...]:
        return tuple(c.standard_part() for c in self.coordinates)

    def standard_point(self) -> "Point":
        return Point(tuple(c.registry.constant(c.standard_part()) for c in self.coordinates))

    def shifted(self, offsets: Sequence[Hyperreal]) -> "Point":
        return Point(tuple(c + o for c, o in zip(self.coordinates, offsets)))

    def shifted_along(self, i: int, offset: Hyperreal) -> "Point":
        return Point(tuple(c + offset if k == i else c for k, c in enumerate(self.coordinates)))

    def __sub__(self, other: "Point") -> tuple[Hyperreal, ...]:
        return tuple(x - y for x, y in zip(self.coordinates, other.coordinates))

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self.coordinates) + ")"

    def to_json(self) -> list:
        return [c.to_json() for c in self.coordinates]


def as_point(registry: GeneratorRegistry, a: Any) -> Point:
    if isinstance(a, Point):
        return a
    if isinstance(a, (list, tuple)):
        return Point.of(registry, *a)
    return Point.of(registry, a)


def evaluate_expr(e: Expr, values: Sequence[Hyperreal], registry: GeneratorRegistry) -> Hyperreal:
    """Evaluates an AST at the given variable values; shared subtrees are evaluated once."""
    memo: dict[int, Hyperreal] = {}

    def ev(node: Expr) -> Hyperreal:
        key = id(node)
        if key in memo:
            return memo[key]
        match node:
            case RealConst(value):
                result = registry.constant(value)
            case InfinitesimalConst(name, power):
                result = registry.generator(name, power)
            case Var(index):
                result = values[index - 1]
            case Neg(arg):
                result = -ev(arg)
            case Add(l, r):
                result = ev(l) + ev(r)
            case Sub(l, r):
                result = ev(l) - ev(r)
            case Mul(l, r):
                result = ev(l) * ev(r)
            case Div(l, r):
                denominator = ev(r)
                if denominator.is_zero:
                    raise DivisionByZeroError(f"Division by the Zero element in {node}")
                result = ev(l) / denominator
            case IntPow(base, k):
                b = ev(base)
                if k < 0 and b.is_zero:
                    raise DivisionByZeroError(f"Negative power of the Zero element in {node}")
                result = b ** k
            case Func(name, arg):
                result = lift(name, ev(arg))
            case _:
                raise TypeError(f"Unknown expression node: {type(node)}")
        memo[key] = result
        return result

    return ev(e)


OverrideKey = tuple[Coefficient, ...]


@dataclass(frozen=True, slots=True)
class PerturbedFn:
    """Internal function: an expression plus finitely many infinitesimal point overrides.

    Overrides model values that differ from the body by an infinitesimal at
    isolated standard points.
    """
    body: Expr
    arity: int
    registry: GeneratorRegistry = field(repr=False)
    overrides: tuple[tuple[OverrideKey, Hyperreal], ...] = ()

    def __post_init__(self):
        if not isinstance(self.body, Expr):
            raise TypeError(f"body must be Expr. Got {type(self.body)}")
        if not isinstance(self.arity, int) or self.arity < 0:
            raise ValueError(f"arity must be a non-negative int. Got {self.arity}")
        if max_var_index(self.body) > self.arity:
            raise ArityError(f"Body uses x{max_var_index(self.body)} but arity is {self.arity}")
        unknown = generator_names(self.body) - set(self.registry.names)
        if unknown:
            raise ValueError(f"Body uses unregistered generators: {sorted(unknown)}")
        object.__setattr__(self, "overrides", self._normalized_overrides(self.overrides))

    def _normalized_overrides(self, overrides) -> tuple[tuple[OverrideKey, Hyperreal], ...]:
        if isinstance(overrides, Mapping):
            overrides = overrides.items()
        normalized = []
        seen = []
        for point, value in overrides:
            if not isinstance(point, (tuple, list)):
                point = (point,)
            key = tuple(self.registry.coefficient(c) for c in point)
            if len(key) != self.arity:
                raise ArityError(f"Override point must have {self.arity} coordinates. Got {key}")
            if key in seen:
                raise OverrideError(f"Duplicate override point: {key}")
            seen.append(key)
            value = self.registry.coerce(value)
            base = evaluate_expr(self.body, tuple(self.registry.constant(c) for c in key), self.registry)
            if not value.approx_eq(base):
                raise OverrideError(f"Override value must be infinitely close to the body value {base} at {key}. Got {value}")
            normalized.append((key, value))
        return tuple(normalized)

    @classmethod
    def parse(cls, text: str, arity: int, registry: GeneratorRegistry,
              overrides: Optional[Union[Mapping, Iterable]] = None) -> "PerturbedFn":
        return cls(parse(text, arity, registry), arity, registry, overrides or ())

    def override_at(self, p: Point) -> Optional[Hyperreal]:
        if not self.overrides or not p.is_standard():
            return None
        key = p.standard_coordinates()
        for point, value in self.overrides:
            if point == key:
                return value
        return None

    def deviation_at(self, p: Point) -> Hyperreal:
        """|f(p) - body(p)|; nonzero only at override points."""
        value = self.override_at(p)
        if value is None:
            return self.registry.zero()
        return abs(value - evaluate_expr(self.body, p.coordinates, self.registry))

    def negated(self) -> "PerturbedFn":
        return PerturbedFn(neg(self.body), self.arity, self.registry,
                           tuple((point, -value) for point, value in self.overrides))

    def plus(self, term: Expr) -> "PerturbedFn":
        """f + term; override values move with the body so they stay infinitely close to it."""
        shifted = []
        for point, value in self.overrides:
            delta = evaluate_expr(term, tuple(self.registry.constant(c) for c in point), self.registry)
            shifted.append((point, value + delta))
        return PerturbedFn(add(self.body, term), self.arity, self.registry, tuple(shifted))

    def compose(self, inner: "PerturbedFn") -> "PerturbedFn":
        """self ∘ inner for a scalar outer function.

        An inner override (p, v) becomes (p, self(v)). Outer overrides act only
        through those values; elsewhere the composed body stands.
        """
        if self.arity != 1:
            raise ArityError(f"Outer function of a composition must have arity 1. Got {self.arity}")
        overrides = tuple((point, evaluate(self, Point((value,)))) for point, value in inner.overrides)
        return PerturbedFn(substitute(self.body, {1: inner.body}), inner.arity, self.registry, overrides)

    def __str__(self) -> str:
        return str(self.body)

    def to_json(self) -> dict:
        return {
            "body": str(self.body),
            "arity": self.arity,
            "overrides": [{"point": [str(c) for c in point], "value": value.to_json()}
                          for point, value in self.overrides],
        }

    @classmethod
    def from_json(cls, data: dict, registry: GeneratorRegistry) -> "PerturbedFn":
        overrides = [(tuple(item["point"]), registry.from_json(item["value"])) for item in data.get("overrides", [])]
        return cls.parse(data["body"], int(data["arity"]), registry, overrides)


def _check_point(f: PerturbedFn, p: Point):
    if len(p) != f.arity:
        raise ArityError(f"Point must have {f.arity} coordinates. Got {len(p)}")
    for c in p:
        if c.registry != f.registry:
            raise ValueError("Point and function use different registries.")


def evaluate(f: PerturbedFn, p: Point) -> Hyperreal:
    """f(p): the override value at an override point, the body value elsewhere."""
    p = as_point(f.registry, p)
    _check_point(f, p)
    value = f.override_at(p)
    if value is not None:
        return value
    return evaluate_expr(f.body, p.coordinates, f.registry)


def nth_derivative_at(f: PerturbedFn, var: int, k: int, a: Point) -> Hyperreal:
    """k-th partial derivative in x_var at a. Overrides do not affect derivatives."""
    a = as_point(f.registry, a)
    _check_point(f, a)
    if k < 0:
        raise ValueError(f"Derivative order must be >= 0. Got {k}")
    if k == 0:
        return evaluate(f, a)
    if var < 1 or var > f.arity:
        raise ArityError(f"Variable index must lie in 1..{f.arity}. Got {var}")
    return evaluate_expr(nth_derivative(f.body, var, k), a.coordinates, f.registry)


def partial_derivative_at(f: PerturbedFn, variables: Sequence[int], a: Point) -> Hyperreal:
    """Mixed partial derivative, differentiating in the listed variables in order."""
    a = as_point(f.registry, a)
    _check_point(f, a)
    if not variables:
        return evaluate(f, a)
    e = f.body
    for var in variables:
        if var < 1 or var > f.arity:
            raise ArityError(f"Variable index must lie in 1..{f.arity}. Got {var}")
        e = nth_derivative(e, var, 1)
    return evaluate_expr(e, a.coordinates, f.registry)


def gradient_at(f: PerturbedFn, a: Point) -> tuple[Hyperreal, ...]:
    return tuple(nth_derivative_at(f, i, 1, a) for i in range(1, f.arity + 1))


def _require_standard(f: PerturbedFn, a: Any) -> Point:
    a = as_point(f.registry, a)
    if not a.is_standard():
        raise ValueError(f"Point must be standard. Got {a}")
    return a


def st_function_value(f: PerturbedFn, a: Any) -> Coefficient:
    """st(f)(a) = st(f(a)) at a standard point."""
    return evaluate(f, _require_standard(f, a)).standard_part()


def st_derivative(f: PerturbedFn, var: int, k: int, a: Any) -> Coefficient:
    """st(f^(k))(a), which equals the k-th derivative of st(f) at a."""
    return nth_derivative_at(f, var, k, _require_standard(f, a)).standard_part()
