from dataclasses import dataclass, field
from fractions import Fraction
import itertools
import logging
import random
from typing import Any, Optional

from .coefficients import Coefficient
from .evaluation import PerturbedFn, Point, as_point, evaluate, gradient_at, nth_derivative_at
from .hyperreal import (Exponent, GeneratorRegistry, Hyperreal, MagnitudeClass, exponent_scale,
                        format_rational, rational)
from .parser import ArityError


logger = logging.getLogger(__name__)

MVT_GRID = 32
MVT_BISECTIONS = 64


class SampleConstructionError(Exception):
    pass


class InapplicableChainRuleError(Exception):
    pass


@dataclass(frozen=True, slots=True)
class ProbeConfig:
    """Settings shared by the verification probes.

    delta_exponent fixes the encompassing threshold eps^q. sample_offsets, when
    given, replaces the default offsets: (coefficient, exponent) pairs that must
    be infinitesimal and larger than the threshold.
    """
    delta_exponent: Fraction = Fraction(8)
    sample_offsets: Optional[tuple[tuple[Coefficient, Exponent], ...]] = None
    max_taylor_order: int = 8
    random_directions: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "delta_exponent", rational(self.delta_exponent))
        if self.delta_exponent <= 0:
            raise SampleConstructionError(f"delta_exponent must be positive. Got {self.delta_exponent}")
        if self.sample_offsets is not None:
            offsets = tuple((coef, tuple(rational(c) for c in exponent)) for coef, exponent in self.sample_offsets)
            if not offsets:
                raise SampleConstructionError("sample_offsets must not be empty.")
            object.__setattr__(self, "sample_offsets", offsets)
        if not isinstance(self.max_taylor_order, int) or self.max_taylor_order < 1:
            raise ValueError(f"max_taylor_order must be a positive int. Got {self.max_taylor_order}")
        if not isinstance(self.random_directions, int) or self.random_directions < 0:
            raise ValueError(f"random_directions must be a non-negative int. Got {self.random_directions}")

    def delta(self, registry: GeneratorRegistry) -> Hyperreal:
        if self.delta_exponent >= registry.exp_bound:
            raise SampleConstructionError(f"delta_exponent must be below exp_bound {registry.exp_bound}. Got {self.delta_exponent}")
        return registry.generator(0, self.delta_exponent)

    def offsets(self, registry: GeneratorRegistry) -> tuple[Hyperreal, ...]:
        delta = self.delta(registry)
        if self.sample_offsets is None:
            eps = registry.generator(0)
            base = [eps, 2 * eps, eps ** 2, registry.generator(0, Fraction(1, 2))]
            if registry.dimension >= 2:
                base.append(registry.generator(1))
            offsets = tuple(itertools.chain.from_iterable((o, -o) for o in base))
        else:
            if any(len(exponent) != registry.dimension for _, exponent in self.sample_offsets):
                raise SampleConstructionError(f"Sample offset exponents must have {registry.dimension} components.")
            offsets = tuple(registry.monomial(exponent, coef) for coef, exponent in self.sample_offsets)
        for o in offsets:
            if o.magnitude_class() is not MagnitudeClass.INFINITESIMAL:
                raise SampleConstructionError(f"Sample offsets must be Infinitesimal. Got {o}")
            if not abs(o) > delta:
                raise SampleConstructionError(f"Sample offsets must exceed the threshold {delta}. Got {o}")
        return offsets

    def to_json(self) -> dict:
        return {
            "delta_exponent": format_rational(self.delta_exponent),
            "sample_offsets": None if self.sample_offsets is None else [
                {"coef": str(coef), "exps": [format_rational(c) for c in exponent]}
                for coef, exponent in self.sample_offsets],
            "max_taylor_order": self.max_taylor_order,
            "random_directions": self.random_directions,
            "seed": self.seed,
        }


@dataclass(frozen=True, slots=True)
class Witness:
    label: str
    points: tuple[Point, ...]
    residual: Hyperreal
    accepted: bool
    magnitude: MagnitudeClass = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "magnitude", self.residual.magnitude_class())

    def sort_key(self) -> tuple:
        return (self.label, tuple(str(p) for p in self.points), str(self.residual))

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "points": [p.to_json() for p in self.points],
            "residual": self.residual.to_json(),
            "residual_text": str(self.residual),
            "class": self.magnitude.value,
            "accepted": self.accepted,
        }


@dataclass(frozen=True, slots=True)
class ProbeReport:
    probe: str
    passed: bool
    config: ProbeConfig
    witnesses: tuple[Witness, ...]
    failure_witness: Optional[Witness] = None

    def __post_init__(self):
        object.__setattr__(self, "witnesses", tuple(sorted(self.witnesses, key=Witness.sort_key)))
        if self.passed != all(w.accepted for w in self.witnesses):
            raise ValueError(f"passed must agree with the witnesses of {self.probe}. Got {self.passed}")

    @classmethod
    def from_witnesses(cls, probe: str, config: ProbeConfig, witnesses: list[Witness]) -> "ProbeReport":
        ordered = sorted(witnesses, key=Witness.sort_key)
        failed = [w for w in ordered if not w.accepted]
        report = cls(probe, not failed, config, tuple(ordered), failed[0] if failed else None)
        logger.info(f"Finished {probe}: passed={report.passed}, witnesses={len(ordered)}.")
        return report

    def to_json(self) -> dict:
        return {
            "probe": self.probe,
            "passed": self.passed,
            "config": self.config.to_json(),
            "witnesses": [w.to_json() for w in self.witnesses],
            "failure_witness": None if self.failure_witness is None else self.failure_witness.to_json(),
        }


def _infinitesimal_witness(label: str, points: tuple[Point, ...], residual: Hyperreal) -> Witness:
    return Witness(label, points, residual, residual.is_infinitesimal())


def encompassing_threshold(registry: GeneratorRegistry, cfg: ProbeConfig,
                           deviation: Optional[Hyperreal] = None, k: int = 1) -> Hyperreal:
    """eps^q, raised when an override deviation must vanish after division by the k-th power of an increment."""
    delta = cfg.delta(registry)
    if deviation is None or deviation.is_zero:
        return delta
    raised = registry.monomial(exponent_scale(deviation.leading_exponent, Fraction(3, 4 * k)))
    return max(delta, raised)


def sample_offsets(registry: GeneratorRegistry, cfg: ProbeConfig, threshold: Hyperreal) -> tuple[Hyperreal, ...]:
    """Configured offsets strictly above threshold, or a fallback pair between threshold and 1."""
    kept = tuple(o for o in cfg.offsets(registry) if abs(o) > threshold)
    if kept:
        return kept
    o = registry.monomial(exponent_scale(threshold.leading_exponent, Fraction(1, 2)))
    logger.debug(f"No sample offset above {threshold}; falling back to ±{o}.")
    return (o, -o)


def _shifts(a: Point, offset: Hyperreal) -> list[Point]:
    points = [a.shifted_along(i, offset) for i in range(len(a))]
    if len(a) > 1:
        points.append(a.shifted([offset] * len(a)))
    return points


def _norm(diff: tuple[Hyperreal, ...]) -> Hyperreal:
    if len(diff) == 1:
        return abs(diff[0])
    total = diff[0] * diff[0]
    for d in diff[1:]:
        total = total + d * d
    return total.sqrt_abs()


def _dot(u: tuple[Hyperreal, ...], v) -> Hyperreal:
    total = u[0] * v[0]
    for x, y in zip(u[1:], v[1:]):
        total = total + x * y
    return total


def _deviation(f: PerturbedFn, a: Point) -> Hyperreal:
    return f.deviation_at(a) if a.is_standard() else f.registry.zero()


def _standard_point(f: PerturbedFn, a: Any) -> Point:
    a = as_point(f.registry, a)
    if len(a) != f.arity:
        raise ArityError(f"Point must have {f.arity} coordinates. Got {len(a)}")
    if not a.is_standard():
        raise ValueError(f"Point must be standard. Got {a}")
    return a


def s_continuity_probe(f: PerturbedFn, a: Any, cfg: ProbeConfig = ProbeConfig()) -> ProbeReport:
    """Checks f(x) ≈ f(a) for sampled x ≈ a. a need not be nearstandard."""
    a = as_point(f.registry, a)
    logger.info(f"Starting s_continuity_probe at {a}.")
    fa = evaluate(f, a)
    witnesses = []
    for o in cfg.offsets(f.registry):
        for x in _shifts(a, o):
            witnesses.append(_infinitesimal_witness("f(x) - f(a)", (x, a), evaluate(f, x) - fa))
    return ProbeReport.from_witnesses("scontinuity", cfg, witnesses)


def mu_increment_check(f: PerturbedFn, a: Any, cfg: ProbeConfig = ProbeConfig()) -> ProbeReport:
    """Checks f(x) - f(y) = Df_x(x - y) + |x - y| eta with eta ≈ 0 on pairs from the monad of a."""
    a = _standard_point(f, a)
    logger.info(f"Starting mu_increment_check at {a}.")
    threshold = encompassing_threshold(f.registry, cfg, _deviation(f, a), 1)
    points = [a]
    for o in sample_offsets(f.registry, cfg, threshold):
        points.extend(_shifts(a, o))
    values = {p: evaluate(f, p) for p in points}
    gradients = {p: gradient_at(f, p) for p in points}
    witnesses = []
    for x, y in itertools.combinations(points, 2):
        diff = x - y
        norm = _norm(diff)
        if not norm > threshold:
            continue
        eta = (values[x] - values[y] - _dot(gradients[x], diff)) / norm
        witnesses.append(_infinitesimal_witness("eta", (x, y), eta))
    if not witnesses:
        raise SampleConstructionError(f"No sample pair at {a} is separated by more than {threshold}.")
    return ProbeReport.from_witnesses("increment", cfg, witnesses)


def mvt_check(f: PerturbedFn, x: Any, y: Any, cfg: ProbeConfig = ProbeConfig()) -> ProbeReport:
    """Searches a standard c between st(x) and st(y) with f(x) - f(y) - f'(c)(x - y) ≈ 0 relative to |x - y|.

    A mean-value point is certified by a sign change of st(r) on a standard
    bracket, located by a grid scan and bisection; an exact zero of st(r) on
    the way ends the search. A bracketed witness carries the actual residual
    at the last midpoint together with the bracket endpoints.
    """
    registry = f.registry
    if f.arity != 1:
        raise ArityError(f"mvt_check needs arity 1. Got {f.arity}")
    x, y = as_point(registry, x), as_point(registry, y)
    if not (x.is_nearstandard() and y.is_nearstandard()):
        raise ValueError(f"mvt_check endpoints must be nearstandard. Got {x}, {y}")
    logger.info(f"Starting mvt_check on [{x}, {y}].")
    diff = x[0] - y[0]
    norm = abs(diff)
    if not norm > cfg.delta(registry):
        raise SampleConstructionError(f"|x - y| must exceed {cfg.delta(registry)}. Got {norm}")
    fx_fy = evaluate(f, x) - evaluate(f, y)

    def r(c) -> Hyperreal:
        return fx_fy - nth_derivative_at(f, 1, 1, Point.of(registry, c)) * diff

    def certified(c, residual: Hyperreal) -> ProbeReport:
        c_point = Point.of(registry, c)
        return ProbeReport.from_witnesses("mvt", cfg, [_infinitesimal_witness("r(c)/|x-y|", (x, y, c_point), residual / norm)])

    lo, hi = sorted((x[0].standard_part(), y[0].standard_part()))
    if lo == hi:
        return certified(lo, r(lo))

    def st_sign(value: Hyperreal) -> int:
        s = value.standard_part()
        if registry.is_negligible(s):
            return 0
        return 1 if s > 0 else -1

    grid = [lo + (hi - lo) * Fraction(i, MVT_GRID) for i in range(MVT_GRID + 1)]
    residuals = {}
    bracket = None
    for c in (grid[0], grid[-1], *grid[1:-1]):
        residuals[c] = r(c)
        if st_sign(residuals[c]) == 0:
            return certified(c, residuals[c])
    for left, right in zip(grid, grid[1:]):
        if st_sign(residuals[left]) != st_sign(residuals[right]):
            bracket = (left, right)
            break
    if bracket is None:
        extrema = sorted(residuals.items(), key=lambda item: item[1])
        witnesses = [Witness(label, (x, y, Point.of(registry, c)), value / norm, False)
                     for label, (c, value) in (("min r(c)/|x-y|", extrema[0]), ("max r(c)/|x-y|", extrema[-1]))]
        logger.info(f"mvt_check found no sign change of st(r) on [{lo}, {hi}].")
        return ProbeReport.from_witnesses("mvt", cfg, witnesses)

    left, right = bracket
    left_sign = st_sign(residuals[left])
    for _ in range(MVT_BISECTIONS):
        mid = (left + right) / 2
        residual = r(mid)
        sign = st_sign(residual)
        if sign == 0:
            return certified(mid, residual)
        if sign == left_sign:
            left = mid
        else:
            right = mid
    # st(r) changes sign on the standard bracket [left, right], which holds a zero of st(r).
    bracket_points = (x, y, Point.of(registry, mid), Point.of(registry, left), Point.of(registry, right))
    logger.debug(f"mvt_check bracketed a mean-value point in [{left}, {right}].")
    return ProbeReport.from_witnesses("mvt", cfg, [Witness("r(c)/|x-y| bracketed", bracket_points, residual / norm, True)])


def taylor_check(f: PerturbedFn, a: Any, k: int, cfg: ProbeConfig = ProbeConfig()) -> ProbeReport:
    """Checks f(y) = sum_{j<=k} f^(j)(a)/j! (y - a)^j + |y - a|^k eta with eta ≈ 0."""
    if f.arity != 1:
        raise ArityError(f"taylor_check needs arity 1. Got {f.arity}")
    if not isinstance(k, int) or k < 1 or k > cfg.max_taylor_order:
        raise ValueError(f"Taylor order must lie in 1..{cfg.max_taylor_order}. Got {k}")
    a = _standard_point(f, a)
    logger.info(f"Starting taylor_check at {a} with order {k}.")
    registry = f.registry
    threshold = encompassing_threshold(registry, cfg, _deviation(f, a), k)
    coefficients = [evaluate(f, a)]
    factorial = 1
    for j in range(1, k + 1):
        factorial *= j
        coefficients.append(nth_derivative_at(f, 1, j, a).scaled(Fraction(1, factorial)))
    witnesses = []
    for o in sample_offsets(registry, cfg, threshold):
        y = a.shifted((o,))
        polynomial = coefficients[k]
        for c in reversed(coefficients[:k]):
            polynomial = polynomial * o + c
        remainder = evaluate(f, y) - polynomial
        witnesses.append(_infinitesimal_witness("R/|y-a|^k", (y, a), remainder / abs(o) ** k))
    return ProbeReport.from_witnesses("taylor", cfg, witnesses)


def chain_rule_check(f: PerturbedFn, g: PerturbedFn, a: Any, cfg: ProbeConfig = ProbeConfig()) -> ProbeReport:
    """Checks (f∘g)'(a) ≈ f'(g(a)) g'(a); needs g'(a) Appreciable."""
    if f.arity != 1 or g.arity != 1:
        raise ArityError(f"chain_rule_check needs arity 1 functions. Got {f.arity} and {g.arity}")
    a = _standard_point(g, a)
    logger.info(f"Starting chain_rule_check at {a}.")
    g_prime = nth_derivative_at(g, 1, 1, a)
    if g_prime.magnitude_class() is not MagnitudeClass.APPRECIABLE:
        raise InapplicableChainRuleError(
            f"g'(a) must be Appreciable for a finite inverse. Got {g_prime} ({g_prime.magnitude_class().value})")
    composed = f.compose(g)
    left = nth_derivative_at(composed, 1, 1, a)
    ga = Point((evaluate(g, a),))
    right = nth_derivative_at(f, 1, 1, ga) * g_prime
    return ProbeReport.from_witnesses("chain", cfg, [_infinitesimal_witness("(f∘g)'(a) - f'(g(a))g'(a)", (a, ga), left - right)])


def unit_directions(n: int, cfg: ProbeConfig) -> list[tuple[Fraction, ...]]:
    """Coordinate axes plus seeded exact rational unit vectors (inverse stereographic projection)."""
    directions = [tuple(Fraction(int(i == k)) for k in range(n)) for i in range(n)]
    if n < 2:
        return directions
    rng = random.Random(cfg.seed)
    for _ in range(cfg.random_directions):
        t = [Fraction(rng.randint(-9, 9), rng.randint(1, 9)) for _ in range(n - 1)]
        s = sum(c * c for c in t)
        directions.append(tuple(2 * c / (1 + s) for c in t) + ((s - 1) / (1 + s),))
    return directions


def derivative_s_continuity_probe(f: PerturbedFn, a: Any, cfg: ProbeConfig = ProbeConfig()) -> ProbeReport:
    """Checks Df_x(d) ≈ Df_a(d) for sampled x ≈ a and unit directions d."""
    a = as_point(f.registry, a)
    if not a.is_nearstandard():
        raise ValueError(f"Point must be nearstandard. Got {a}")
    logger.info(f"Starting derivative_s_continuity_probe at {a}.")
    directions = unit_directions(f.arity, cfg)
    base = gradient_at(f, a)
    witnesses = []
    for o in cfg.offsets(f.registry):
        for x in _shifts(a, o):
            gradient = gradient_at(f, x)
            for d in directions:
                residual = _dot(gradient, d) - _dot(base, d)
                witnesses.append(_infinitesimal_witness(f"Df(d) d={[format_rational(c) for c in d]}", (x, a), residual))
    return ProbeReport.from_witnesses("dscontinuity", cfg, witnesses)


def difference_quotient_probe(f: PerturbedFn, a: Any, cfg: ProbeConfig = ProbeConfig()) -> ProbeReport:
    """Checks (f(a + o e_i) - f(a)) / o ≈ ∂f/∂x_i at a for offsets o above the threshold."""
    a = _standard_point(f, a)
    logger.info(f"Starting difference_quotient_probe at {a}.")
    threshold = encompassing_threshold(f.registry, cfg, _deviation(f, a), 1)
    fa = evaluate(f, a)
    gradient = gradient_at(f, a)
    witnesses = []
    for o in sample_offsets(f.registry, cfg, threshold):
        for i in range(f.arity):
            x = a.shifted_along(i, o)
            quotient = (evaluate(f, x) - fa) / o
            witnesses.append(_infinitesimal_witness(f"quotient x{i + 1}", (x, a), quotient - gradient[i]))
    return ProbeReport.from_witnesses("quotient", cfg, witnesses)
