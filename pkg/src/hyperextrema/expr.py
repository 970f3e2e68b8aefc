from dataclasses import dataclass
from fractions import Fraction
import functools
from typing import Mapping, Union

from .coefficients import FUNCTION_NAMES
from .hyperreal import format_rational


DERIVATIVE_CACHE_SIZE = 8192


class Expr:
    """Base class of the expression AST. Nodes are immutable and hashable."""
    __slots__ = ()

    def __add__(self, other: "Expr") -> "Expr":
        return add(self, as_expr(other))

    def __radd__(self, other) -> "Expr":
        return add(as_expr(other), self)

    def __sub__(self, other: "Expr") -> "Expr":
        return sub(self, as_expr(other))

    def __rsub__(self, other) -> "Expr":
        return sub(as_expr(other), self)

    def __mul__(self, other: "Expr") -> "Expr":
        return mul(self, as_expr(other))

    def __rmul__(self, other) -> "Expr":
        return mul(as_expr(other), self)

    def __truediv__(self, other: "Expr") -> "Expr":
        return div(self, as_expr(other))

    def __rtruediv__(self, other) -> "Expr":
        return div(as_expr(other), self)

    def __neg__(self) -> "Expr":
        return neg(self)

    def __pow__(self, k: int) -> "Expr":
        return int_pow(self, k)


@dataclass(frozen=True, slots=True)
class RealConst(Expr):
    value: Fraction

    def __str__(self) -> str:
        text = format_rational(self.value)
        return f"({text})" if "/" in text or self.value < 0 else text


@dataclass(frozen=True, slots=True)
class InfinitesimalConst(Expr):
    name: str
    power: int = 1

    def __post_init__(self):
        if not isinstance(self.power, int) or self.power < 1:
            raise ValueError(f"Infinitesimal constant power must be an int >= 1. Got {self.power}")

    def __str__(self) -> str:
        return self.name if self.power == 1 else f"{self.name}^{self.power}"


@dataclass(frozen=True, slots=True)
class Var(Expr):
    index: int

    def __post_init__(self):
        if not isinstance(self.index, int) or self.index < 1:
            raise ValueError(f"Variable index must be an int >= 1. Got {self.index}")

    def __str__(self) -> str:
        return f"x{self.index}"


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr

    def __str__(self) -> str:
        return f"(-{self.arg})"


@dataclass(frozen=True, slots=True)
class Add(Expr):
    left: Expr
    right: Expr

    def __str__(self) -> str:
        return f"({self.left} + {self.right})"


@dataclass(frozen=True, slots=True)
class Sub(Expr):
    left: Expr
    right: Expr

    def __str__(self) -> str:
        return f"({self.left} - {self.right})"


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    left: Expr
    right: Expr

    def __str__(self) -> str:
        return f"{self.left}*{self.right}"


@dataclass(frozen=True, slots=True)
class Div(Expr):
    left: Expr
    right: Expr

    def __str__(self) -> str:
        return f"{self.left}/({self.right})"


@dataclass(frozen=True, slots=True)
class IntPow(Expr):
    base: Expr
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or isinstance(self.exponent, bool):
            raise TypeError(f"IntPow exponent must be int. Got {type(self.exponent)}")

    def __str__(self) -> str:
        base = str(self.base)
        if not isinstance(self.base, (Var, InfinitesimalConst)) or "^" in base:
            base = f"({base})"
        if self.exponent < 0:
            return f"{base}^({self.exponent})"
        return f"{base}^{self.exponent}"


@dataclass(frozen=True, slots=True)
class Func(Expr):
    name: str
    arg: Expr

    def __post_init__(self):
        if self.name not in FUNCTION_NAMES:
            raise ValueError(f"Function must be one of {FUNCTION_NAMES}. Got {self.name}")

    def __str__(self) -> str:
        return f"{self.name}({self.arg})"


ZERO = RealConst(Fraction(0))
ONE = RealConst(Fraction(1))


def const(value: Union[int, Fraction, str]) -> RealConst:
    return RealConst(Fraction(value))


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return const(value)
    raise TypeError(f"Expected Expr, int or Fraction. Got {type(value)}")


def _is_const(e: Expr, value=None) -> bool:
    return isinstance(e, RealConst) and (value is None or e.value == value)


# Constant-folding constructors

def add(left: Expr, right: Expr) -> Expr:
    if _is_const(left) and _is_const(right):
        return RealConst(left.value + right.value)
    if _is_const(left, 0):
        return right
    if _is_const(right, 0):
        return left
    return Add(left, right)


def sub(left: Expr, right: Expr) -> Expr:
    if _is_const(left) and _is_const(right):
        return RealConst(left.value - right.value)
    if _is_const(right, 0):
        return left
    if _is_const(left, 0):
        return neg(right)
    return Sub(left, right)


def neg(arg: Expr) -> Expr:
    if _is_const(arg):
        return RealConst(-arg.value)
    if isinstance(arg, Neg):
        return arg.arg
    return Neg(arg)


def mul(left: Expr, right: Expr) -> Expr:
    if _is_const(left) and _is_const(right):
        return RealConst(left.value * right.value)
    if _is_const(left, 0) or _is_const(right, 0):
        return ZERO
    if _is_const(left, 1):
        return right
    if _is_const(right, 1):
        return left
    if _is_const(left, -1):
        return neg(right)
    if _is_const(right, -1):
        return neg(left)
    return Mul(left, right)


def div(left: Expr, right: Expr) -> Expr:
    if _is_const(right, 0):
        raise ZeroDivisionError(f"Division by the constant 0 in {left}/0")
    if _is_const(left) and _is_const(right):
        return RealConst(left.value / right.value)
    if _is_const(left, 0):
        return ZERO
    if _is_const(right, 1):
        return left
    return Div(left, right)


def int_pow(base: Expr, k: int) -> Expr:
    if k == 0:
        return ONE
    if k == 1:
        return base
    if _is_const(base):
        if base.value == 0 and k < 0:
            raise ZeroDivisionError("Negative power of the constant 0.")
        return RealConst(base.value ** k)
    if isinstance(base, InfinitesimalConst) and k > 0:
        return InfinitesimalConst(base.name, base.power * k)
    return IntPow(base, k)


def func(name: str, arg: Expr) -> Expr:
    return Func(name, arg)


# Structure

def max_var_index(e: Expr) -> int:
    match e:
        case Var(index):
            return index
        case RealConst() | InfinitesimalConst():
            return 0
        case Neg(arg) | Func(_, arg) | IntPow(arg, _):
            return max_var_index(arg)
        case Add(l, r) | Sub(l, r) | Mul(l, r) | Div(l, r):
            return max(max_var_index(l), max_var_index(r))
    raise TypeError(f"Unknown expression node: {type(e)}")


def generator_names(e: Expr) -> set[str]:
    match e:
        case InfinitesimalConst(name, _):
            return {name}
        case RealConst() | Var():
            return set()
        case Neg(arg) | Func(_, arg) | IntPow(arg, _):
            return generator_names(arg)
        case Add(l, r) | Sub(l, r) | Mul(l, r) | Div(l, r):
            return generator_names(l) | generator_names(r)
    raise TypeError(f"Unknown expression node: {type(e)}")


def substitute(e: Expr, replacements: Mapping[int, Expr]) -> Expr:
    """Replaces variables by expressions, rebuilding through the folding constructors."""
    match e:
        case Var(index):
            return replacements.get(index, e)
        case RealConst() | InfinitesimalConst():
            return e
        case Neg(arg):
            return neg(substitute(arg, replacements))
        case Func(name, arg):
            return func(name, substitute(arg, replacements))
        case IntPow(base, k):
            return int_pow(substitute(base, replacements), k)
        case Add(l, r):
            return add(substitute(l, replacements), substitute(r, replacements))
        case Sub(l, r):
            return sub(substitute(l, replacements), substitute(r, replacements))
        case Mul(l, r):
            return mul(substitute(l, replacements), substitute(r, replacements))
        case Div(l, r):
            return div(substitute(l, replacements), substitute(r, replacements))
    raise TypeError(f"Unknown expression node: {type(e)}")


def polynomial(coefficients: list, var: int = 1) -> Expr:
    """Sum of coefficients[k] * x_var^k; coefficients may be numbers or Exprs."""
    x = Var(var)
    result: Expr = ZERO
    for k, c in enumerate(coefficients):
        result = add(result, mul(as_expr(c), int_pow(x, k)))
    return result


# Differentiation

@functools.lru_cache(maxsize=DERIVATIVE_CACHE_SIZE)
def differentiate(e: Expr, var: int) -> Expr:
    """Symbolic partial derivative with respect to x_var; generators are constants."""
    match e:
        case RealConst() | InfinitesimalConst():
            return ZERO
        case Var(index):
            return ONE if index == var else ZERO
        case Neg(arg):
            return neg(differentiate(arg, var))
        case Add(l, r):
            return add(differentiate(l, var), differentiate(r, var))
        case Sub(l, r):
            return sub(differentiate(l, var), differentiate(r, var))
        case Mul(l, r):
            return add(mul(differentiate(l, var), r), mul(l, differentiate(r, var)))
        case Div(l, r):
            dl, dr = differentiate(l, var), differentiate(r, var)
            if _is_const(dr, 0):
                return div(dl, r)
            return div(sub(mul(dl, r), mul(l, dr)), int_pow(r, 2))
        case IntPow(base, k):
            return mul(mul(const(k), int_pow(base, k - 1)), differentiate(base, var))
        case Func(name, arg):
            inner = differentiate(arg, var)
            if _is_const(inner, 0):
                return ZERO
            match name:
                case "sin":
                    outer = func("cos", arg)
                case "cos":
                    outer = neg(func("sin", arg))
                case "exp":
                    outer = e
                case "log":
                    return div(inner, arg)
            return mul(outer, inner)
    raise TypeError(f"Unknown expression node: {type(e)}")


def nth_derivative(e: Expr, var: int, k: int) -> Expr:
    for _ in range(k):
        e = differentiate(e, var)
    return e
