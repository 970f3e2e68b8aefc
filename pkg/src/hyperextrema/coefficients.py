from enum import Enum
from fractions import Fraction
import functools
import math
import threading
from typing import Union

from mpmath.ctx_mp import MPContext


Coefficient = Union[Fraction, float]
Rational = Union[int, Fraction]

# Decimal digits carried by transcendental values in rational mode.
DIGITS = 64

FUNCTION_NAMES = ("sin", "cos", "exp", "log")


class CoefficientMode(str, Enum):
    RATIONAL = "rational"
    FLOAT = "float"


def to_fraction(value) -> Fraction:
    if isinstance(value, bool):
        raise TypeError(f"Coefficient must be a number. Got {type(value)}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"Coefficient must be finite. Got {value}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"Coefficient must be int, Fraction, float or str. Got {type(value)}")


def coerce(value, mode: CoefficientMode) -> Coefficient:
    if mode is CoefficientMode.RATIONAL:
        return to_fraction(value)
    if isinstance(value, bool):
        raise TypeError(f"Coefficient must be a number. Got {type(value)}")
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


def is_negligible(value: Coefficient, mode: CoefficientMode, zero_tol: float) -> bool:
    if mode is CoefficientMode.RATIONAL:
        return value == 0
    return abs(value) <= zero_tol


def format_coefficient(value: Coefficient) -> str:
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    return repr(float(value))


def parse_coefficient(text: str, mode: CoefficientMode) -> Coefficient:
    return coerce(text, mode)


_contexts = threading.local()


def _context() -> MPContext:
    """mpmath context at DIGITS owned by the calling thread; the shared mpmath.mp is never touched."""
    ctx = getattr(_contexts, "ctx", None)
    if ctx is None:
        ctx = MPContext()
        ctx.dps = DIGITS
        _contexts.ctx = ctx
    return ctx


def _evaluate(name: str, *args: Coefficient) -> Fraction:
    ctx = _context()
    values = [ctx.mpf(a.numerator) / a.denominator if isinstance(a, Fraction) else ctx.mpf(a) for a in args]
    return Fraction(ctx.nstr(getattr(ctx, name)(*values), DIGITS))


def _integer_root(value: int, n: int) -> int:
    if n == 2:
        return math.isqrt(value)
    try:
        return round(value ** (1 / n))
    except OverflowError:
        return -1


def _exact_root(value: Fraction, n: int) -> Fraction | None:
    if value < 0:
        return None
    num = _integer_root(value.numerator, n)
    den = _integer_root(value.denominator, n)
    if num ** n == value.numerator and den ** n == value.denominator:
        return Fraction(num, den)
    return None


def sqrt(value: Coefficient, mode: CoefficientMode) -> Coefficient:
    if value < 0:
        raise ValueError(f"Square root argument must be non-negative. Got {value}")
    if mode is CoefficientMode.FLOAT:
        return math.sqrt(value)
    exact = _exact_root(value, 2)
    if exact is not None:
        return exact
    return _evaluate("sqrt", value)


def power(value: Coefficient, exponent: Fraction, mode: CoefficientMode) -> Coefficient:
    """Positive real power value**exponent of a positive coefficient."""
    if value <= 0:
        raise ValueError(f"Power base must be positive. Got {value}")
    if exponent.denominator == 1:
        return coerce(value, mode) ** exponent.numerator
    if mode is CoefficientMode.FLOAT:
        return float(value) ** float(exponent)
    root = _exact_root(value, exponent.denominator)
    if root is not None:
        return root ** exponent.numerator
    return _evaluate("power", value, exponent)


def _exact_value(name: str, a: Coefficient) -> Fraction | None:
    if a == 0 and name in ("sin", "cos", "exp"):
        return Fraction(0) if name == "sin" else Fraction(1)
    if a == 1 and name == "log":
        return Fraction(0)
    return None


@functools.lru_cache(maxsize=4096)
def function_value(name: str, a: Coefficient, mode: CoefficientMode) -> Coefficient:
    """Value of an elementary function at a standard argument."""
    if name not in FUNCTION_NAMES:
        raise ValueError(f"Function must be one of {FUNCTION_NAMES}. Got {name}")
    if name == "log" and a <= 0:
        raise ValueError(f"log argument must be positive. Got {a}")
    if mode is CoefficientMode.FLOAT:
        return getattr(math, name)(float(a))
    exact = _exact_value(name, a)
    if exact is not None:
        return exact
    return _evaluate(name, a)


def function_derivative(name: str, order: int, a: Coefficient, mode: CoefficientMode) -> Coefficient:
    """order-th derivative of sin/cos/exp/log at a standard argument."""
    if order == 0:
        return function_value(name, a, mode)
    if name == "sin":
        cycle = ("cos", "-sin", "-cos", "sin")[(order - 1) % 4]
    elif name == "cos":
        cycle = ("-sin", "-cos", "sin", "cos")[(order - 1) % 4]
    elif name == "exp":
        cycle = "exp"
    elif name == "log":
        if a <= 0:
            raise ValueError(f"log argument must be positive. Got {a}")
        # d^j/dx^j log x = (-1)^(j-1) (j-1)! / x^j
        sign = 1 if order % 2 == 1 else -1
        return coerce(sign * math.factorial(order - 1), mode) / coerce(a, mode) ** order
    else:
        raise ValueError(f"Function must be one of {FUNCTION_NAMES}. Got {name}")
    if cycle.startswith("-"):
        return -function_value(cycle[1:], a, mode)
    return function_value(cycle, a, mode)
