from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
import logging
from typing import Any, Iterable, Optional, Union

import sympy

from .coefficients import Coefficient, CoefficientMode
from .evaluation import (PerturbedFn, Point, as_point, evaluate, gradient_at, nth_derivative_at,
                         partial_derivative_at, st_derivative)
from .hyperreal import GeneratorRegistry, Hyperreal, MagnitudeClass
from .mucalc import (ProbeConfig, ProbeReport, Witness, encompassing_threshold, sample_offsets)
from .parser import ArityError


logger = logging.getLogger(__name__)

DEFAULT_MAX_ORDER = 8
CANDIDATE_BISECTIONS = 80
SNAP_TOLERANCE = Fraction(1, 2 ** 40)
SNAP_DENOMINATOR = 10 ** 6


class VerdictKind(str, Enum):
    M_MINIMIZER = "MMinimizer"
    M_MAXIMIZER = "MMaximizer"
    NEITHER_ODD_ORDER = "NeitherOddOrder"
    NEITHER_SADDLE = "NeitherSaddle"
    NECESSARY_FAILED = "NecessaryFailed"
    INCONCLUSIVE = "Inconclusive"

    def mirrored(self) -> "VerdictKind":
        """Kind of the same point for -f."""
        if self is VerdictKind.M_MINIMIZER:
            return VerdictKind.M_MAXIMIZER
        if self is VerdictKind.M_MAXIMIZER:
            return VerdictKind.M_MINIMIZER
        return self


@dataclass(frozen=True, slots=True)
class DerivativeTraceEntry:
    order: int
    label: str
    value: Hyperreal
    magnitude: MagnitudeClass = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "magnitude", self.value.magnitude_class())

    def to_json(self) -> dict:
        return {"k": self.order, "label": self.label, "value": self.value.to_json(),
                "value_text": str(self.value), "class": self.magnitude.value}


@dataclass(frozen=True, slots=True)
class Verdict:
    kind: VerdictKind
    decisive_order: Optional[int] = None
    decisive_value: Optional[Hyperreal] = None
    decisive_standard_part: Optional[Coefficient] = None
    trace: tuple[DerivativeTraceEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", VerdictKind(self.kind))
        object.__setattr__(self, "trace", tuple(self.trace))
        kind, k, value, st = self.kind, self.decisive_order, self.decisive_value, self.decisive_standard_part
        if kind is VerdictKind.INCONCLUSIVE:
            if k is not None:
                raise ValueError(f"Inconclusive verdicts have no decisive order. Got {k}")
            return
        if k is None or value is None:
            raise ValueError(f"{kind.value} verdicts need a decisive order and value.")
        if value.is_infinitesimal():
            raise ValueError(f"Decisive value must not be infinitely close to 0. Got {value}")
        if kind in (VerdictKind.M_MINIMIZER, VerdictKind.M_MAXIMIZER):
            sign = 1 if kind is VerdictKind.M_MINIMIZER else -1
            if k % 2 != 0:
                raise ValueError(f"{kind.value} needs an even decisive order. Got {k}")
            if value.sign() != sign or (st is not None and (st > 0) != (sign > 0)):
                raise ValueError(f"{kind.value} decisive value has the wrong sign. Got {value}")
        elif kind is VerdictKind.NEITHER_ODD_ORDER and k % 2 != 1:
            raise ValueError(f"NeitherOddOrder needs an odd decisive order. Got {k}")
        elif kind is VerdictKind.NECESSARY_FAILED and k != 1:
            raise ValueError(f"NecessaryFailed is decided by a first derivative. Got order {k}")

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "decisive_order": self.decisive_order,
            "decisive_value": None if self.decisive_value is None else self.decisive_value.to_json(),
            "decisive_value_text": None if self.decisive_value is None else str(self.decisive_value),
            "standard_part": None if self.decisive_standard_part is None else str(self.decisive_standard_part),
            "trace": [entry.to_json() for entry in self.trace],
        }


@dataclass(frozen=True, slots=True)
class Candidate:
    point: Coefficient
    bracket: tuple[Coefficient, Coefficient]
    source: str
    snapped: bool = False

    def to_json(self) -> dict:
        return {"point": str(self.point), "bracket": [str(b) for b in self.bracket],
                "source": self.source, "snapped": self.snapped}


@dataclass(frozen=True, slots=True)
class CandidateSet:
    interval: tuple[Coefficient, Coefficient]
    grid_points: int
    candidates: tuple[Candidate, ...]

    def points(self) -> list[Coefficient]:
        return [c.point for c in self.candidates]

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def to_json(self) -> dict:
        return {"interval": [str(b) for b in self.interval], "grid_points": self.grid_points,
                "candidates": [c.to_json() for c in self.candidates]}


def _standard_point(f: PerturbedFn, a: Any) -> Point:
    a = as_point(f.registry, a)
    if len(a) != f.arity:
        raise ArityError(f"Point must have {f.arity} coordinates. Got {len(a)}")
    if not a.is_standard():
        raise ValueError(f"Point must be standard. Got {a}")
    return a


def _standard_part_or_none(value: Hyperreal) -> Optional[Coefficient]:
    return value.standard_part() if value.is_finite() else None


def _check_max_order(max_order: int):
    if not isinstance(max_order, int) or max_order < 2:
        raise ValueError(f"max_order must be an int >= 2. Got {max_order}")


def _decide(k: int, value: Hyperreal, st: Optional[Coefficient], trace: list) -> Verdict:
    if k == 1:
        kind = VerdictKind.NECESSARY_FAILED
    elif k % 2 == 1:
        kind = VerdictKind.NEITHER_ODD_ORDER
    elif value.gg(0):
        kind = VerdictKind.M_MINIMIZER
    else:
        kind = VerdictKind.M_MAXIMIZER
    return Verdict(kind, k, value, st, tuple(trace))


def necessary_check(f: PerturbedFn, a: Any, cfg: ProbeConfig = ProbeConfig()) -> ProbeReport:
    """Checks that every partial derivative at a is infinitely close to 0."""
    a = _standard_point(f, a)
    logger.info(f"Starting necessary_check at {a}.")
    witnesses = [Witness(f"df/dx{i}", (a,), partial, partial.is_infinitesimal())
                 for i, partial in enumerate(gradient_at(f, a), start=1)]
    return ProbeReport.from_witnesses("necessary", cfg, witnesses)


def classify_1d(f: PerturbedFn, a: Any, max_order: int = DEFAULT_MAX_ORDER) -> Verdict:
    """Higher-order derivative test for m-extremizers of a scalar function.

    The first order k <= max_order whose derivative at a is not infinitely close
    to 0 decides: k = 1 fails the necessary condition, odd k rules out an
    extremum, even k gives an m-minimizer when f^(k)(a) >> 0 and an m-maximizer
    when f^(k)(a) << 0.

    Returns:
        Verdict: Inconclusive when every derivative through max_order is ≈ 0.

    Raises:
        ArityError: f is not a function of one variable.
        ValueError: max_order < 2 or a is not standard.
    """
    if f.arity != 1:
        raise ArityError(f"classify_1d needs arity 1. Got {f.arity}")
    _check_max_order(max_order)
    a = _standard_point(f, a)
    trace = []
    for k in range(1, max_order + 1):
        value = nth_derivative_at(f, 1, k, a)
        trace.append(DerivativeTraceEntry(k, f"f^({k})", value))
        if not value.is_infinitesimal():
            verdict = _decide(k, value, _standard_part_or_none(value), trace)
            logger.info(f"classify_1d at {a}: {verdict.kind.value} (order {k}).")
            return verdict
    logger.info(f"classify_1d at {a}: Inconclusive through order {max_order}.")
    return Verdict(VerdictKind.INCONCLUSIVE, trace=tuple(trace))


def st_oracle_classify(f: PerturbedFn, a: Any, max_order: int = DEFAULT_MAX_ORDER) -> Verdict:
    """Classical higher-order derivative test applied to st(f)."""
    if f.arity != 1:
        raise ArityError(f"st_oracle_classify needs arity 1. Got {f.arity}")
    _check_max_order(max_order)
    a = _standard_point(f, a)
    registry = f.registry
    trace = []
    for k in range(1, max_order + 1):
        st = st_derivative(f, 1, k, a)
        value = registry.constant(st)
        trace.append(DerivativeTraceEntry(k, f"st(f)^({k})", value))
        if not registry.is_negligible(st):
            return _decide(k, value, st, trace)
    return Verdict(VerdictKind.INCONCLUSIVE, trace=tuple(trace))


def gradient_test(f: PerturbedFn, a: Any) -> Verdict:
    """First-order test for n >= 2: a non-infinitesimal partial rules out an m-extremizer.

    Otherwise the result is Inconclusive; there is no multivariable sufficient
    condition at this level.
    """
    if f.arity < 2:
        raise ArityError(f"gradient_test needs arity >= 2. Got {f.arity}")
    a = _standard_point(f, a)
    trace = [DerivativeTraceEntry(1, f"df/dx{i}", partial) for i, partial in enumerate(gradient_at(f, a), start=1)]
    for entry in trace:
        if not entry.value.is_infinitesimal():
            logger.info(f"gradient_test at {a}: NecessaryFailed on {entry.label}.")
            return Verdict(VerdictKind.NECESSARY_FAILED, 1, entry.value, _standard_part_or_none(entry.value), tuple(trace))
    logger.info(f"gradient_test at {a}: Inconclusive.")
    return Verdict(VerdictKind.INCONCLUSIVE, trace=tuple(trace))


def _to_sympy(value: Coefficient):
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    return sympy.Float(value)


def leading_principal_minors(hessian: sympy.Matrix, registry: GeneratorRegistry) -> list:
    """det H[:k, :k] for k = 1..n; in float mode minors within zero_tol snap to 0."""
    minors = [hessian[:k, :k].det() for k in range(1, hessian.rows + 1)]
    if registry.mode is CoefficientMode.FLOAT:
        minors = [sympy.Integer(0) if abs(float(m)) <= registry.zero_tol else m for m in minors]
    return minors


def hessian_oracle_classify(f: PerturbedFn, a: Any) -> Verdict:
    """Oracle extension: classical second-order test on st(f) at a standard point, n >= 2.

    The standard Hessian is classified by the signs of its leading principal
    minors: all positive gives MMinimizer, alternating from negative gives
    MMaximizer, any other nonsingular pattern NeitherSaddle and a vanishing
    determinant Inconclusive.
    """
    if f.arity < 2:
        raise ArityError(f"hessian_oracle_classify needs arity >= 2. Got {f.arity}")
    first = gradient_test(f, a)
    if first.kind is VerdictKind.NECESSARY_FAILED:
        return first
    a = _standard_point(f, a)
    registry = f.registry
    n = f.arity
    trace = list(first.trace)
    rows = []
    for i in range(1, n + 1):
        row = []
        for j in range(1, n + 1):
            value = partial_derivative_at(f, (i, j), a)
            if i <= j:
                trace.append(DerivativeTraceEntry(2, f"d2f/dx{i}dx{j}", value))
            row.append(value.standard_part())
        rows.append(row)
    minors = leading_principal_minors(sympy.Matrix([[_to_sympy(c) for c in row] for row in rows]), registry)
    determinant = minors[-1]
    corner = registry.constant(rows[0][0])
    if determinant == 0:
        kind = VerdictKind.INCONCLUSIVE
    elif all(m > 0 for m in minors):
        kind = VerdictKind.M_MINIMIZER
    elif all((-1) ** k * m > 0 for k, m in enumerate(minors, start=1)):
        kind = VerdictKind.M_MAXIMIZER
    else:
        kind = VerdictKind.NEITHER_SADDLE
    logger.info(f"hessian_oracle_classify at {a}: {kind.value}.")
    if kind is VerdictKind.INCONCLUSIVE:
        return Verdict(kind, trace=tuple(trace))
    if kind is VerdictKind.NEITHER_SADDLE:
        det_value = registry.constant(Fraction(str(determinant)) if registry.mode is CoefficientMode.RATIONAL else float(determinant))
        return Verdict(kind, 2, det_value, det_value.standard_part(), tuple(trace))
    return Verdict(kind, 2, corner, rows[0][0], tuple(trace))


def sufficient_condition_probe(f: PerturbedFn, a: Any, cfg: ProbeConfig = ProbeConfig()) -> ProbeReport:
    """Checks f(a ± o) against f(a) under f'(a) ≈ 0 and f''(a) not ≈ 0.

    Offsets must exceed both the encompassing threshold and sqrt|f'(a)|; every
    sample then lies strictly above f(a) when f''(a) >> 0 and strictly below
    when f''(a) << 0.
    """
    if f.arity != 1:
        raise ArityError(f"sufficient_condition_probe needs arity 1. Got {f.arity}")
    a = _standard_point(f, a)
    registry = f.registry
    first = nth_derivative_at(f, 1, 1, a)
    second = nth_derivative_at(f, 1, 2, a)
    if not first.is_infinitesimal() or second.is_infinitesimal():
        raise ValueError(f"sufficient_condition_probe needs f'(a) ≈ 0 and f''(a) not ≈ 0. Got {first} and {second}")
    logger.info(f"Starting sufficient_condition_probe at {a}.")
    deviation = f.deviation_at(a)
    threshold = max(encompassing_threshold(registry, cfg, deviation, 2), first.sqrt_abs())
    expected = second.sign()
    fa = evaluate(f, a)
    witnesses = []
    for o in sample_offsets(registry, cfg, threshold):
        x = a.shifted((o,))
        difference = evaluate(f, x) - fa
        witnesses.append(Witness("f(x) - f(a)", (x, a), difference, difference.sign() == expected))
    return ProbeReport.from_witnesses("sufficient", cfg, witnesses)


def _snap(f: PerturbedFn, c: Coefficient) -> tuple[Coefficient, bool]:
    registry = f.registry
    exact = Fraction(c).limit_denominator(SNAP_DENOMINATOR)
    if abs(exact - Fraction(c)) <= SNAP_TOLERANCE:
        snapped = registry.coefficient(exact)
        if registry.is_negligible(st_derivative(f, 1, 1, snapped)):
            return snapped, True
    return c, False


def _sign(registry: GeneratorRegistry, value: Coefficient) -> int:
    if registry.is_negligible(value):
        return 0
    return 1 if value > 0 else -1


def _bisect(f: PerturbedFn, order: int, left: Coefficient, right: Coefficient, left_sign: int) -> Coefficient:
    registry = f.registry
    for _ in range(CANDIDATE_BISECTIONS):
        mid = (left + right) / 2
        sign = _sign(registry, st_derivative(f, 1, order, mid))
        if sign == 0:
            return mid
        if sign == left_sign:
            left = mid
        else:
            right = mid
    return mid


def find_candidates(f: PerturbedFn, interval: tuple[Any, Any], grid_points: int = 64) -> CandidateSet:
    """Standard critical points of st(f) on an interval.

    Scans st(f') on a uniform grid for exact zeros and sign changes, then
    st(f'') for sign changes whose bisected root snaps to an exact zero of
    st(f') (critical points of even multiplicity).
    """
    if f.arity != 1:
        raise ArityError(f"find_candidates needs arity 1. Got {f.arity}")
    registry = f.registry
    lo, hi = (registry.coefficient(b) for b in interval)
    if not lo < hi:
        raise ValueError(f"Interval must satisfy lo < hi. Got [{lo}, {hi}]")
    if not isinstance(grid_points, int) or grid_points < 2:
        raise ValueError(f"grid_points must be an int >= 2. Got {grid_points}")
    grid = [lo + (hi - lo) * Fraction(i, grid_points - 1) for i in range(grid_points)]
    found: list[Candidate] = []
    first = [_sign(registry, st_derivative(f, 1, 1, x)) for x in grid]
    for x, s in zip(grid, first):
        if s == 0:
            found.append(Candidate(x, (x, x), "grid zero", False))
    for (left, s_left), (right, s_right) in zip(zip(grid, first), zip(grid[1:], first[1:])):
        if s_left * s_right < 0:
            c, snapped = _snap(f, _bisect(f, 1, left, right, s_left))
            found.append(Candidate(c, (left, right), "sign change of st(f')", snapped))
    second = [_sign(registry, st_derivative(f, 1, 2, x)) for x in grid]
    for (left, s_left), (right, s_right) in zip(zip(grid, second), zip(grid[1:], second[1:])):
        if s_left * s_right < 0:
            c, snapped = _snap(f, _bisect(f, 2, left, right, s_left))
            if snapped:
                found.append(Candidate(c, (left, right), "sign change of st(f'')", True))
    unique: list[Candidate] = []
    for candidate in sorted(found, key=lambda c: c.point):
        if unique and abs(Fraction(candidate.point) - Fraction(unique[-1].point)) <= SNAP_TOLERANCE:
            continue
        unique.append(candidate)
    logger.info(f"find_candidates on [{lo}, {hi}] with {grid_points} grid points: {len(unique)} candidates.")
    return CandidateSet((lo, hi), grid_points, tuple(unique))


def classify_candidates(f: PerturbedFn, candidates: Union[CandidateSet, Iterable[Any]],
                        max_order: int = DEFAULT_MAX_ORDER, max_workers: Optional[int] = None) -> list[Verdict]:
    """classify_1d at every candidate; results come back in candidate order."""
    if isinstance(candidates, CandidateSet):
        points = candidates.points()
    else:
        points = [c.point if isinstance(c, Candidate) else c for c in candidates]
    if max_workers == 1 or len(points) <= 1:
        return [classify_1d(f, p, max_order) for p in points]
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        return list(executor.map(lambda p: classify_1d(f, p, max_order), points))
