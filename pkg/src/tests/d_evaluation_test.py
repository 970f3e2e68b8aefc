from fractions import Fraction

from hyperextrema import (GeneratorRegistry, PerturbedFn, Point, OverrideError, ArityError, DivisionByZeroError,
                          evaluate, nth_derivative_at, partial_derivative_at, gradient_at, st_function_value,
                          st_derivative, parse)
from hyperextrema.expr import InfinitesimalConst
from hyperextrema.reproduction import WORKED_EXAMPLE

import pytest


REG = GeneratorRegistry(("eps", "delta"))
EPS = REG.generator("eps")
DELTA = REG.generator("delta")


@pytest.fixture
def worked():
    return PerturbedFn.parse(WORKED_EXAMPLE, 1, REG)


@pytest.mark.parametrize("k, a, expected", [
    (1, 0, EPS),
    (1, 1, EPS + 2 * DELTA),
    (1, 2, EPS + 4 * DELTA),
    (2, 0, 2 * DELTA),
    (2, 1, -1 + 2 * DELTA),
    (2, 2, 16 + 2 * DELTA),
    (3, 0, REG.zero()),
    (5, 0, REG.constant(48)),
])
def test_worked_example_derivatives(worked, k, a, expected):
    assert nth_derivative_at(worked, 1, k, Point.of(REG, a)) == expected


def test_worked_example_values(worked):
    assert evaluate(worked, Point.of(REG, 2)) == Fraction(-32, 35) + 2 * EPS + 4 * DELTA
    assert st_function_value(worked, 2) == Fraction(-32, 35)
    assert st_derivative(worked, 1, 2, 2) == 16
    assert st_derivative(worked, 1, 1, 0) == 0
    with pytest.raises(ValueError, match="must be standard"):
        st_function_value(worked, Point.of(REG, EPS))


def test_overrides():
    f = PerturbedFn.parse("x1^2", 1, REG, {0: EPS})
    origin = Point.of(REG, 0)
    assert evaluate(f, origin) == EPS
    assert evaluate(f, Point.of(REG, 1)) == 1
    assert evaluate(f, Point.of(REG, EPS)) == EPS ** 2
    assert nth_derivative_at(f, 1, 0, origin) == EPS
    assert nth_derivative_at(f, 1, 1, origin).is_zero
    assert f.deviation_at(origin) == EPS
    assert f.deviation_at(Point.of(REG, 1)).is_zero


def test_override_validation():
    with pytest.raises(OverrideError, match="infinitely close"):
        PerturbedFn.parse("x1^2", 1, REG, [((0,), 1)])
    with pytest.raises(OverrideError, match="Duplicate override point"):
        PerturbedFn.parse("x1^2", 1, REG, [((0,), EPS), ((0,), DELTA)])
    with pytest.raises(ArityError, match="must have 2 coordinates"):
        PerturbedFn.parse("x1*x2", 2, REG, [((0,), EPS)])


def test_body_validation():
    with pytest.raises(ArityError, match="arity is 1"):
        PerturbedFn(parse("x1*x2", 2, REG), 1, REG)
    with pytest.raises(ValueError, match="unregistered generators"):
        PerturbedFn(InfinitesimalConst("h"), 0, REG)
    with pytest.raises(TypeError, match="body must be Expr"):
        PerturbedFn("x1", 1, REG)


def test_point_arity_is_checked(worked):
    with pytest.raises(ArityError, match="Point must have 1 coordinates"):
        evaluate(worked, Point.of(REG, 0, 1))


def test_nonstandard_and_zeroary_evaluation():
    assert evaluate(PerturbedFn.parse("eps/eps^2", 0, REG), ()) == EPS.reciprocal()
    f = PerturbedFn.parse("1/(x1 - 1)", 1, REG)
    assert evaluate(f, Point.of(REG, 1 + EPS)) == EPS.reciprocal()
    with pytest.raises(DivisionByZeroError):
        evaluate(f, Point.of(REG, 1))
    with pytest.raises(DivisionByZeroError, match="Negative power"):
        evaluate(PerturbedFn.parse("x1^(-2)", 1, REG), Point.of(REG, 0))


def test_partial_derivatives():
    f = PerturbedFn.parse("x1^2*x2^3", 2, REG)
    a = Point.of(REG, 1, 1)
    assert partial_derivative_at(f, (1, 2), a) == 6
    assert partial_derivative_at(f, (), a) == 1
    assert gradient_at(f, a) == (REG.constant(2), REG.constant(3))
    with pytest.raises(ArityError):
        partial_derivative_at(f, (3,), a)


def test_negated_plus_compose():
    f = PerturbedFn.parse("x1^2", 1, REG, {0: EPS})
    origin = Point.of(REG, 0)
    assert evaluate(f.negated(), origin) == -EPS
    assert evaluate(f.negated(), Point.of(REG, 2)) == -4

    g = f.plus(parse("x1 + 1", 1, REG))
    assert evaluate(g, origin) == 1 + EPS
    assert evaluate(g, Point.of(REG, 1)) == 3

    outer = PerturbedFn.parse("x1^2", 1, REG)
    inner = PerturbedFn.parse("x1 + x2", 2, REG)
    h = outer.compose(inner)
    assert h.arity == 2
    assert evaluate(h, Point.of(REG, 1, 2)) == 9
    with pytest.raises(ArityError, match="Outer function"):
        inner.compose(outer)


def test_compose_carries_inner_overrides():
    outer = PerturbedFn.parse("x1^2", 1, REG)
    inner = PerturbedFn.parse("x1 + 2", 1, REG, {0: 2 + EPS})
    h = outer.compose(inner)
    assert evaluate(h, Point.of(REG, 0)) == 4 + 4 * EPS + EPS ** 2
    assert evaluate(h, Point.of(REG, 1)) == 9
    assert h.deviation_at(Point.of(REG, 0)) == 4 * EPS + EPS ** 2

    h = PerturbedFn.parse("sin(x1)", 1, REG).compose(PerturbedFn.parse("2*x1", 1, REG, {0: DELTA}))
    assert evaluate(h, Point.of(REG, 0)).standard_part() == 0
    assert evaluate(h, Point.of(REG, 0)).leading_exponent == (0, 1)


def test_json_round_trip():
    f = PerturbedFn.parse("x1^2", 1, REG, {0: EPS})
    data = f.to_json()
    assert data == {"body": "x1^2", "arity": 1,
                    "overrides": [{"point": ["0"], "value": [{"exps": ["1", "0"], "coef": "1"}]}]}
    assert PerturbedFn.from_json(data, REG) == f


def test_point_helpers():
    p = Point.of(REG, 1 + EPS, 2)
    assert p.dimension == 2
    assert not p.is_standard()
    assert p.is_nearstandard()
    assert p.standard_coordinates() == (1, 2)
    assert p.standard_point() == Point.of(REG, 1, 2)
    assert p - Point.of(REG, 1, 2) == (EPS, REG.zero())
    assert p.shifted_along(1, DELTA) == Point.of(REG, 1 + EPS, 2 + DELTA)
    assert str(Point.of(REG, 1, EPS)) == "(1, eps)"
    with pytest.raises(TypeError):
        Point((1, 2))
