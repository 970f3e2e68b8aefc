from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
import itertools
import re
from typing import Any, Iterable, Optional, Union

from . import coefficients
from .coefficients import Coefficient, CoefficientMode, Rational


Exponent = tuple[Rational, ...]
Term = tuple[Exponent, Coefficient]

_IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_VARIABLE = re.compile(r"x[0-9]+")


class ExponentOutOfBoundsError(Exception):
    pass


class RegistryMismatchError(Exception):
    pass


class DivisionByZeroError(ZeroDivisionError):
    pass


class NotNearstandardError(Exception):
    pass


class MagnitudeClass(str, Enum):
    ZERO = "Zero"
    INFINITESIMAL = "Infinitesimal"
    APPRECIABLE = "Appreciable"
    INFINITE = "Infinite"


def rational(value) -> Rational:
    """Exponent component in canonical form: int when integral, else Fraction."""
    if type(value) is int:
        return value
    q = value if isinstance(value, Fraction) else Fraction(value)
    return q.numerator if q.denominator == 1 else q


def exponent_add(a: Exponent, b: Exponent) -> Exponent:
    return tuple(rational(x + y) for x, y in zip(a, b))


def exponent_scale(a: Exponent, factor: Rational) -> Exponent:
    return tuple(rational(x * factor) for x in a)


def exponent_neg(a: Exponent) -> Exponent:
    return tuple(-x for x in a)


def format_rational(value: Rational) -> str:
    q = Fraction(value)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True, slots=True)
class GeneratorRegistry:
    """Named infinitesimal generators plus the arithmetic settings of the series field.

    Declaration order fixes the valuation: exponents compare lexicographically,
    first generator most significant.
    """
    names: tuple[str, ...]
    mode: CoefficientMode = CoefficientMode.RATIONAL
    exp_bound: int = 16
    max_terms: int = 64
    zero_tol: float = 1e-9

    def __post_init__(self):
        if isinstance(self.names, str):
            object.__setattr__(self, "names", tuple(n.strip() for n in self.names.split(",")))
        elif isinstance(self.names, list):
            object.__setattr__(self, "names", tuple(self.names))
        if not isinstance(self.names, tuple):
            raise TypeError(f"names must be a tuple of str. Got {type(self.names)}")
        object.__setattr__(self, "mode", CoefficientMode(self.mode))
        self._check_names()
        if not isinstance(self.exp_bound, int) or self.exp_bound <= 0:
            raise ValueError(f"exp_bound must be a positive int. Got {self.exp_bound}")
        if not isinstance(self.max_terms, int) or self.max_terms <= 0:
            raise ValueError(f"max_terms must be a positive int. Got {self.max_terms}")
        if self.zero_tol <= 0:
            raise ValueError(f"zero_tol must be positive. Got {self.zero_tol}")

    def _check_names(self):
        if not self.names:
            raise ValueError("At least one generator name is required.")
        seen = []
        for name in self.names:
            if not isinstance(name, str) or not _IDENTIFIER.fullmatch(name):
                raise ValueError(f"Generator name must be an identifier. Got {name!r}")
            if _VARIABLE.fullmatch(name) or name in coefficients.FUNCTION_NAMES:
                raise ValueError(f"Generator name is reserved. Got {name}")
            if name in seen:
                raise ValueError(f"Duplicate generator name: {name}")
            seen.append(name)

    @property
    def dimension(self) -> int:
        return len(self.names)

    @property
    def zero_exponent(self) -> Exponent:
        return (0,) * len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"Unknown generator: {name}. Registered: {self.names}") from None

    def unit_exponent(self, name: Union[str, int], power: Rational = 1) -> Exponent:
        i = name if isinstance(name, int) else self.index(name)
        return tuple(rational(power) if k == i else 0 for k in range(len(self.names)))

    def coefficient(self, value) -> Coefficient:
        return coefficients.coerce(value, self.mode)

    def is_negligible(self, value: Coefficient) -> bool:
        return coefficients.is_negligible(value, self.mode, self.zero_tol)

    def make(self, terms: Iterable[tuple[Iterable, Any]]) -> "Hyperreal":
        """Builds an element from (exponent, coefficient) pairs; exponents must lie in bounds."""
        items = []
        for exponent, coef in terms:
            exponent = tuple(rational(c) for c in exponent)
            if len(exponent) != len(self.names):
                raise ValueError(f"Exponent must have {len(self.names)} components. Got {exponent}")
            items.append((exponent, self.coefficient(coef)))
        return _build(self, items, strict=True)

    def zero(self) -> "Hyperreal":
        return Hyperreal(self, ())

    def one(self) -> "Hyperreal":
        return self.constant(1)

    def constant(self, value) -> "Hyperreal":
        return _build(self, [(self.zero_exponent, self.coefficient(value))])

    def monomial(self, exponent: Exponent, coef: Any = 1) -> "Hyperreal":
        return _build(self, [(tuple(rational(c) for c in exponent), self.coefficient(coef))], strict=True)

    def generator(self, name: Union[str, int], power: Rational = 1) -> "Hyperreal":
        return self.monomial(self.unit_exponent(name, power))

    def coerce(self, value) -> "Hyperreal":
        if isinstance(value, Hyperreal):
            if value.registry != self:
                raise RegistryMismatchError(f"Hyperreal belongs to another registry: {value.registry.names}. Expected {self.names}")
            return value
        return self.constant(value)

    def from_json(self, data: list[dict]) -> "Hyperreal":
        return self.make((tuple(Fraction(e) for e in item["exps"]), coefficients.parse_coefficient(item["coef"], self.mode))
                         for item in data)


def _out_of_bounds(exponent: Exponent, bound: int) -> bool:
    for component in exponent:
        if component > bound or component < -bound:
            return True
    return False


def _build(registry: GeneratorRegistry, items: Iterable[Term], truncated: bool = False, strict: bool = False) -> "Hyperreal":
    acc: dict[Exponent, Coefficient] = {}
    for exponent, coef in items:
        if exponent in acc:
            acc[exponent] = acc[exponent] + coef
        else:
            acc[exponent] = coef
    zero = registry.zero_exponent
    kept = []
    for exponent, coef in acc.items():
        if registry.is_negligible(coef):
            continue
        if _out_of_bounds(exponent, registry.exp_bound):
            # Only infinitesimal information may be discarded.
            if strict or exponent <= zero:
                raise ExponentOutOfBoundsError(f"Exponent components must lie in [-{registry.exp_bound}, {registry.exp_bound}]. Got {exponent}")
            truncated = True
            continue
        kept.append((exponent, coef))
    kept.sort(key=lambda term: term[0])
    if len(kept) > registry.max_terms:
        kept = kept[:registry.max_terms]
        truncated = True
    return Hyperreal(registry, tuple(kept), truncated)


@dataclass(frozen=True, slots=True, repr=False)
class Hyperreal:
    """Truncated series over the registry's generators, terms sorted by increasing exponent."""
    registry: GeneratorRegistry
    terms: tuple[Term, ...]
    truncated: bool = field(default=False, compare=False)

    def _coerce(self, other) -> "Hyperreal":
        if isinstance(other, Hyperreal):
            if other.registry is not self.registry and other.registry != self.registry:
                raise RegistryMismatchError(f"Operands belong to different registries: {self.registry.names} and {other.registry.names}")
            return other
        if isinstance(other, (int, Fraction, float)) and not isinstance(other, bool):
            return self.registry.constant(other)
        return NotImplemented

    def __eq__(self, other) -> bool:
        if isinstance(other, Hyperreal) and other.registry != self.registry:
            return False
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self) -> int:
        return hash(self.terms)

    # Arithmetic

    def __add__(self, other) -> "Hyperreal":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return _build(self.registry, itertools.chain(self.terms, other.terms), self.truncated or other.truncated)

    __radd__ = __add__

    def __neg__(self) -> "Hyperreal":
        return Hyperreal(self.registry, tuple((e, -c) for e, c in self.terms), self.truncated)

    def __sub__(self, other) -> "Hyperreal":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Hyperreal":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other) -> "Hyperreal":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        products = ((exponent_add(e1, e2), c1 * c2) for e1, c1 in self.terms for e2, c2 in other.terms)
        return _build(self.registry, products, self.truncated or other.truncated)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Hyperreal":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> "Hyperreal":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other * self.reciprocal()

    def __pow__(self, k: int) -> "Hyperreal":
        if not isinstance(k, int) or isinstance(k, bool):
            raise TypeError(f"Exponent must be int. Got {type(k)}")
        if k < 0:
            return self.reciprocal() ** (-k)
        result = self.registry.one()
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __abs__(self) -> "Hyperreal":
        return -self if self.sign() < 0 else self

    def scaled(self, coef: Coefficient) -> "Hyperreal":
        coef = self.registry.coefficient(coef)
        return _build(self.registry, ((e, c * coef) for e, c in self.terms), self.truncated)

    def _normalized_unit(self) -> tuple["Hyperreal", "Hyperreal"]:
        # self = lead * (1 + u), every exponent of u strictly positive
        exponent, coef = self.terms[0]
        inverse_lead = _build(self.registry, [(exponent_neg(exponent), self.registry.coefficient(1) / coef)])
        return inverse_lead, self * inverse_lead - 1

    def reciprocal(self) -> "Hyperreal":
        if self.is_zero:
            raise DivisionByZeroError("Division by the Zero element.")
        inverse_lead, u = self._normalized_unit()
        return inverse_lead * _binomial_series(u, Fraction(-1))

    def sqrt_abs(self) -> "Hyperreal":
        """Nonnegative square root of |x|; the leading exponent is halved."""
        return self.power_abs(Fraction(1, 2))

    def power_abs(self, p: Fraction) -> "Hyperreal":
        """|x|**p for a rational p > 0, by the binomial series of the normalized tail."""
        p = Fraction(p)
        if p <= 0:
            raise ValueError(f"Power must be positive. Got {p}")
        if self.is_zero:
            return self
        if self.magnitude_class() is MagnitudeClass.INFINITE:
            raise NotNearstandardError(f"Root of an infinite element is not supported. Got {self}")
        x = abs(self)
        exponent, coef = x.terms[0]
        lead = _build(self.registry, [(exponent_scale(exponent, p), coefficients.power(coef, p, self.registry.mode))])
        _, u = x._normalized_unit()
        return lead * _binomial_series(u, p)

    # Order

    def sign(self) -> int:
        if not self.terms:
            return 0
        return 1 if self.terms[0][1] > 0 else -1

    def _compare(self, other) -> int:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).sign()

    def __lt__(self, other) -> bool:
        s = self._compare(other)
        return s if s is NotImplemented else s < 0

    def __le__(self, other) -> bool:
        s = self._compare(other)
        return s if s is NotImplemented else s <= 0

    def __gt__(self, other) -> bool:
        s = self._compare(other)
        return s if s is NotImplemented else s > 0

    def __ge__(self, other) -> bool:
        s = self._compare(other)
        return s if s is NotImplemented else s >= 0

    # Magnitudes

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def leading_exponent(self) -> Optional[Exponent]:
        return self.terms[0][0] if self.terms else None

    @property
    def leading_coefficient(self) -> Optional[Coefficient]:
        return self.terms[0][1] if self.terms else None

    def magnitude_class(self) -> MagnitudeClass:
        if not self.terms:
            return MagnitudeClass.ZERO
        lead = self.terms[0][0]
        zero = self.registry.zero_exponent
        if lead > zero:
            return MagnitudeClass.INFINITESIMAL
        if lead == zero:
            return MagnitudeClass.APPRECIABLE
        return MagnitudeClass.INFINITE

    def is_infinitesimal(self) -> bool:
        """True for Zero and Infinitesimal elements."""
        return self.magnitude_class() in (MagnitudeClass.ZERO, MagnitudeClass.INFINITESIMAL)

    def is_finite(self) -> bool:
        return self.magnitude_class() is not MagnitudeClass.INFINITE

    def is_standard(self) -> bool:
        zero = self.registry.zero_exponent
        return all(e == zero for e, _ in self.terms)

    def coefficient_at(self, exponent: Exponent) -> Coefficient:
        for e, c in self.terms:
            if e == exponent:
                return c
        return self.registry.coefficient(0)

    def standard_part(self) -> Coefficient:
        if self.magnitude_class() is MagnitudeClass.INFINITE:
            raise NotNearstandardError(f"Infinite element has no standard part. Got {self}")
        return self.coefficient_at(self.registry.zero_exponent)

    def infinitesimal_part(self) -> "Hyperreal":
        return self - self.standard_part()

    # Relaxed relations

    def approx_eq(self, other) -> bool:
        return (self - self._coerce(other)).is_infinitesimal()

    def maior(self, other) -> bool:
        return self >= other or self.approx_eq(other)

    def menor(self, other) -> bool:
        return self <= other or self.approx_eq(other)

    def gg(self, other) -> bool:
        return self > other and not self.approx_eq(other)

    def ll(self, other) -> bool:
        return self < other and not self.approx_eq(other)

    # Serialization

    def _format_monomial(self, exponent: Exponent) -> str:
        factors = []
        for name, component in zip(self.registry.names, exponent):
            if component == 0:
                continue
            if component == 1:
                factors.append(name)
            elif isinstance(component, int) and component > 0:
                factors.append(f"{name}^{component}")
            else:
                factors.append(f"{name}^({format_rational(component)})")
        return "*".join(factors)

    def _format_term(self, exponent: Exponent, coef: Coefficient) -> str:
        monomial = self._format_monomial(exponent)
        if not monomial:
            return coefficients.format_coefficient(coef)
        if coef == 1:
            return monomial
        if coef == -1:
            return f"-{monomial}"
        return f"{coefficients.format_coefficient(coef)}*{monomial}"

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for i, (exponent, coef) in enumerate(self.terms):
            if i == 0:
                parts.append(self._format_term(exponent, coef))
            elif coef < 0:
                parts.append(f" - {self._format_term(exponent, -coef)}")
            else:
                parts.append(f" + {self._format_term(exponent, coef)}")
        return "".join(parts)

    def __repr__(self) -> str:
        suffix = ", truncated" if self.truncated else ""
        return f"Hyperreal({str(self)!r}{suffix})"

    def to_json(self) -> list[dict]:
        return [{"exps": [format_rational(c) for c in e], "coef": coefficients.format_coefficient(c)}
                for e, c in self.terms]


def _binomial_series(u: Hyperreal, p: Fraction) -> Hyperreal:
    # (1 + u)**p expanded until the powers of u fall beyond the truncation bound
    registry = u.registry
    result = registry.one()
    power = registry.one()
    binom = Fraction(1)
    j = 0
    while True:
        j += 1
        power = power * u
        if power.is_zero:
            break
        binom = binom * (p - (j - 1)) / j
        result = result + power.scaled(binom)
    if power.truncated and not result.truncated:
        result = Hyperreal(registry, result.terms, True)
    return result


# Module-level operations

def make(registry: GeneratorRegistry, terms: Iterable[tuple[Iterable, Any]]) -> Hyperreal:
    return registry.make(terms)


def add(x: Hyperreal, y: Hyperreal) -> Hyperreal:
    return x + y


def sub(x: Hyperreal, y: Hyperreal) -> Hyperreal:
    return x - y


def mul(x: Hyperreal, y: Hyperreal) -> Hyperreal:
    return x * y


def div(x: Hyperreal, y: Hyperreal) -> Hyperreal:
    return x / y


def magnitude_class(x: Hyperreal) -> MagnitudeClass:
    return x.magnitude_class()


def standard_part(x: Hyperreal) -> Coefficient:
    return x.standard_part()


def approx_eq(x: Hyperreal, y) -> bool:
    return x.approx_eq(y)


def maior(x: Hyperreal, y) -> bool:
    return x.maior(y)


def menor(x: Hyperreal, y) -> bool:
    return x.menor(y)


def gg(x: Hyperreal, y) -> bool:
    return x.gg(y)


def ll(x: Hyperreal, y) -> bool:
    return x.ll(y)


def sqrt_abs(x: Hyperreal) -> Hyperreal:
    return x.sqrt_abs()
