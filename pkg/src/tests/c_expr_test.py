from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
import math
import threading

import mpmath
from mpmath.ctx_mp import MPContext

from hyperextrema import (GeneratorRegistry, EvaluationError, ExprSyntaxError, UnknownIdentifierError, ArityError,
                          parse, differentiate, nth_derivative)
from hyperextrema.expr import (Add, Func, InfinitesimalConst, IntPow, Mul, RealConst, Var, generator_names,
                               DERIVATIVE_CACHE_SIZE, max_var_index, polynomial, substitute)
from hyperextrema.coefficients import CoefficientMode, function_value
from hyperextrema.transcendental import lift

import pytest


REG = GeneratorRegistry(("eps", "delta"))
EPS = REG.generator("eps")


def test_parse_structure():
    e = parse("x1^2 + 3*x1", 1, REG)
    assert e == Add(IntPow(Var(1), 2), Mul(RealConst(Fraction(3)), Var(1)))
    assert str(e) == "(x1^2 + 3*x1)"
    assert parse("eps^2", 0, REG) == InfinitesimalConst("eps", 2)
    assert parse("1/2 + 1/3", 0, REG) == RealConst(Fraction(5, 6))
    assert parse("x1^(-2)", 1, REG) == IntPow(Var(1), -2)
    assert parse("-(-x1)", 1, REG) == Var(1)


def test_parse_respects_precedence():
    assert parse("2*x1^3", 1, REG) == Mul(RealConst(Fraction(2)), IntPow(Var(1), 3))
    assert parse("(1 + x1)*x2", 2, REG) == Mul(Add(RealConst(Fraction(1)), Var(1)), Var(2))


def test_differentiate_sin():
    e = parse("sin(eps*x1)", 1, REG)
    inner = Mul(InfinitesimalConst("eps"), Var(1))
    assert e == Func("sin", inner)
    assert differentiate(e, 1) == Mul(Func("cos", inner), InfinitesimalConst("eps"))


def test_differentiate_generators_are_constants():
    assert differentiate(parse("eps + delta^3", 1, REG), 1) == RealConst(Fraction(0))
    assert differentiate(parse("x1*x2", 2, REG), 2) == Var(1)
    assert nth_derivative(parse("x1^3", 1, REG), 1, 3) == RealConst(Fraction(6))
    assert nth_derivative(parse("x1^3", 1, REG), 1, 4) == RealConst(Fraction(0))


def test_derivative_cache_is_bounded():
    differentiate.cache_clear()
    for k in range(DERIVATIVE_CACHE_SIZE + 50):
        differentiate(parse(f"x1^{k + 2}", 1, REG), 1)
    info = differentiate.cache_info()
    assert info.maxsize == DERIVATIVE_CACHE_SIZE
    assert info.currsize <= DERIVATIVE_CACHE_SIZE


def test_syntax_error_position():
    with pytest.raises(ExprSyntaxError, match="at position 5") as info:
        parse("x1 + ", 1, REG)
    assert info.value.position == 5
    assert info.value.text == "x1 + "

    with pytest.raises(ExprSyntaxError, match="Unexpected character '\\$' at position 3"):
        parse("x1 $ 2", 1, REG)
    with pytest.raises(ExprSyntaxError, match="Empty expression"):
        parse("   ", 1, REG)
    with pytest.raises(ExprSyntaxError, match="Expected '\\)'"):
        parse("sin(x1", 1, REG)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError, match="Unknown identifier 'foo' at position 3") as info:
        parse("1 + foo", 1, REG)
    assert isinstance(info.value, ExprSyntaxError)
    with pytest.raises(UnknownIdentifierError):
        parse("h*x1", 1, REG)


def test_arity():
    with pytest.raises(ArityError, match="exceeds arity 1"):
        parse("x1 + x2", 1, REG)
    with pytest.raises(ArityError):
        parse("x0", 1, REG)


def test_constant_zero_division_and_exponents():
    with pytest.raises(ExprSyntaxError, match="Division by the constant 0 at position 1"):
        parse("1/0", 0, REG)
    with pytest.raises(ExprSyntaxError, match="Negative power"):
        parse("0^(-1)", 0, REG)
    with pytest.raises(ExprSyntaxError, match="Exponent must be an integer literal"):
        parse("x1^2.5", 1, REG)
    with pytest.raises(ExprSyntaxError, match="Exponent must be an integer literal"):
        parse("x1^x1", 1, REG)


def test_structure_helpers():
    e = parse("eps*x1 + delta*x3^2", 3, REG)
    assert max_var_index(e) == 3
    assert generator_names(e) == {"eps", "delta"}
    replaced = substitute(parse("x1^2", 1, REG), {1: parse("x1 + 1", 1, REG)})
    assert replaced == IntPow(Add(Var(1), RealConst(Fraction(1))), 2)
    assert polynomial([1, 0, 3]) == Add(RealConst(Fraction(1)), Mul(RealConst(Fraction(3)), IntPow(Var(1), 2)))
    assert Var(1) * 2 + 1 == Add(Mul(Var(1), RealConst(Fraction(2))), RealConst(Fraction(1)))


def test_lift_series_coefficients():
    assert lift("exp", EPS).coefficient_at((3, 0)) == Fraction(1, 6)
    assert lift("log", 1 + EPS).coefficient_at((2, 0)) == Fraction(-1, 2)
    assert lift("sin", EPS).coefficient_at((3, 0)) == Fraction(-1, 6)
    assert lift("cos", EPS).coefficient_at((2, 0)) == Fraction(-1, 2)
    assert lift("exp", REG.zero()) == 1


def test_lift_pythagorean_identity():
    s, c = lift("sin", EPS), lift("cos", EPS)
    assert s * s + c * c == 1


def test_lift_standard_argument_uses_high_precision():
    value = lift("sin", REG.constant(1)).standard_part()
    assert isinstance(value, Fraction)
    assert abs(float(value) - math.sin(1)) < 1e-15


def test_transcendental_precision_under_threads():
    stop = threading.Event()

    def lower_global_precision():
        while not stop.is_set():
            with mpmath.workdps(5):
                mpmath.exp(1)

    arguments = [Fraction(i, 997) for i in range(1, 600)]
    function_value.cache_clear()
    noise = threading.Thread(target=lower_global_precision)
    noise.start()
    try:
        with ThreadPoolExecutor(max_workers=8) as pool:
            threaded = list(pool.map(lambda a: function_value("exp", a, CoefficientMode.RATIONAL), arguments))
    finally:
        stop.set()
        noise.join()

    function_value.cache_clear()
    assert threaded == [function_value("exp", a, CoefficientMode.RATIONAL) for a in arguments]
    reference = MPContext()
    reference.dps = 80
    expected = Fraction(reference.nstr(reference.exp(reference.mpf(599) / 997), 80))
    assert abs(threaded[-1] - expected) < Fraction(1, 10 ** 60)


def test_lift_errors():
    with pytest.raises(EvaluationError, match="positive standard part"):
        lift("log", -1 + EPS)
    with pytest.raises(EvaluationError, match="positive standard part"):
        lift("log", EPS)
    with pytest.raises(EvaluationError, match="must be finite"):
        lift("exp", EPS.reciprocal())
