from fractions import Fraction
from typing import Iterable, Optional

from .check import Check, CheckDependency
from .evaluation import PerturbedFn, nth_derivative_at, st_function_value
from .extremum import (CandidateSet, VerdictKind, classify_1d, find_candidates, gradient_test,
                       st_oracle_classify)
from .hyperreal import GeneratorRegistry, Hyperreal
from .mucalc import ProbeConfig, mu_increment_check, s_continuity_probe
from .suite import CheckNotFoundError, CheckSuite
from .tables import REFERENCE_TABLES, interaction_table


WORKED_EXAMPLE = "1/7*x1^7 - 1/2*x1^6 + 2/5*x1^5 + eps*x1 + delta*x1^2"
GRADIENT_EXAMPLE = "sin(eps*x1)/eps + x2"
EXPECTED_KINDS = {0: VerdictKind.NEITHER_ODD_ORDER, 1: VerdictKind.M_MAXIMIZER, 2: VerdictKind.M_MINIMIZER}


class ReproductionMismatchError(Exception):
    pass


def _expect(condition: bool, message: str):
    if not condition:
        raise ReproductionMismatchError(message)


def worked_example(registry: GeneratorRegistry) -> PerturbedFn:
    return PerturbedFn.parse(WORKED_EXAMPLE, 1, registry)


def check_worked_example_derivatives(registry: GeneratorRegistry) -> dict[tuple[int, int], Hyperreal]:
    f = worked_example(registry)
    eps, delta = registry.generator(0), registry.generator(1)
    expected = {
        (1, 0): eps, (1, 1): eps + 2 * delta, (1, 2): eps + 4 * delta,
        (2, 0): 2 * delta, (2, 1): -1 + 2 * delta, (2, 2): 16 + 2 * delta,
        (5, 0): registry.constant(48),
    }
    values = {}
    for (k, a), value in expected.items():
        values[(k, a)] = nth_derivative_at(f, 1, k, a)
        _expect(values[(k, a)] == value, f"f^({k})({a}) must be {value}. Got {values[(k, a)]}")
    return values


def check_worked_example_classification(registry: GeneratorRegistry,
                                        derivatives: dict[tuple[int, int], Hyperreal]) -> dict[int, VerdictKind]:
    """Verdicts at 0, 1, 2; second-order decisions must report the derivative values already checked."""
    f = worked_example(registry)
    kinds = {}
    for a, kind in EXPECTED_KINDS.items():
        verdict = classify_1d(f, a, 8)
        _expect(verdict.kind is kind, f"Verdict at {a} must be {kind.value}. Got {verdict.kind.value}")
        if verdict.decisive_order == 2:
            expected = derivatives[(2, a)]
            _expect(verdict.decisive_value == expected, f"Decisive value at {a} must be {expected}. Got {verdict.decisive_value}")
        kinds[a] = verdict.kind
    return kinds


def check_worked_example_candidates(registry: GeneratorRegistry) -> CandidateSet:
    candidates = find_candidates(worked_example(registry), (-1, 3), 64)
    _expect(candidates.points() == [0, 1, 2], f"Candidates must be [0, 1, 2]. Got {candidates.points()}")
    return candidates


def check_st_oracle_agreement(registry: GeneratorRegistry, candidates: CandidateSet,
                              kinds: dict[int, VerdictKind]) -> bool:
    f = worked_example(registry)
    for a in candidates.points():
        oracle = st_oracle_classify(f, a).kind
        _expect(kinds[a] is oracle, f"classify_1d and the st(f) oracle disagree at {a}: {kinds[a].value} vs {oracle.value}")
    return True


def check_gradient_example(registry: GeneratorRegistry) -> bool:
    f = PerturbedFn.parse(GRADIENT_EXAMPLE, 2, registry)
    for point in ((0, 0), (1, -2), (Fraction(1, 3), 5)):
        verdict = gradient_test(f, point)
        _expect(verdict.kind is VerdictKind.NECESSARY_FAILED, f"gradient_test at {point} must fail the necessary condition. Got {verdict.kind.value}")
    return True


def check_interaction_tables(registry: GeneratorRegistry) -> bool:
    for operation, reference in REFERENCE_TABLES.items():
        symbols = interaction_table(operation, registry).symbols()
        _expect(symbols == reference, f"{operation} table must be {reference}. Got {symbols}")
    return True


def check_continuity_examples(registry: GeneratorRegistry) -> bool:
    f = PerturbedFn.parse("x1^2", 1, registry)
    _expect(s_continuity_probe(f, 3).passed, "x1^2 must be S-continuous at 3.")
    omega = registry.generator(0).reciprocal()
    cfg = ProbeConfig(sample_offsets=((1, registry.unit_exponent(0)),))
    report = s_continuity_probe(f, omega, cfg)
    _expect(not report.passed, "x1^2 must not be S-continuous at 1/eps.")
    residual = report.failure_witness.residual
    _expect(residual.standard_part() == 2, f"Residual at 1/eps must have standard part 2. Got {residual}")
    return True


def check_override_example(registry: GeneratorRegistry) -> bool:
    f = PerturbedFn.parse("x1^2", 1, registry, {(0,): registry.generator(0)})
    _expect(st_function_value(f, 0) == 0, "st(f)(0) must be 0.")
    _expect(mu_increment_check(f, 0).passed, "The perturbed square must pass the increment check at 0.")
    return True


def build_reproduction_suite(registry: Optional[GeneratorRegistry] = None,
                             log_path: str = "hyperextrema_reproduction.log",
                             only: Optional[Iterable[str]] = None) -> CheckSuite:
    """The worked examples as a dependency-ordered check suite.

    Derivative values feed the classification check, and the oracle comparison
    consumes both the candidate set and the classification. With only, the
    suite keeps the named checks plus everything they depend on.
    """
    if registry is None:
        registry = GeneratorRegistry(("eps", "delta"))
    if registry.dimension < 2:
        raise ValueError(f"The worked examples need two generators. Got {registry.names}")
    args = (registry,)
    suite = CheckSuite([
        Check("worked_example_derivatives", log_path, check_worked_example_derivatives, args),
        Check("worked_example_classification", log_path, check_worked_example_classification, args,
              dependencies=[CheckDependency("worked_example_derivatives", use_result_as_additional_kwargs=True,
                                            additional_kwarg_name="derivatives")]),
        Check("worked_example_candidates", log_path, check_worked_example_candidates, args),
        Check("st_oracle_agreement", log_path, check_st_oracle_agreement, args,
              dependencies=[CheckDependency("worked_example_candidates", use_result_as_additional_args=True),
                            CheckDependency("worked_example_classification", use_result_as_additional_kwargs=True,
                                            additional_kwarg_name="kinds")]),
        Check("gradient_example", log_path, check_gradient_example, args),
        Check("interaction_tables", log_path, check_interaction_tables, args),
        Check("continuity_examples", log_path, check_continuity_examples, args),
        Check("override_example", log_path, check_override_example, args),
    ])
    if only is None:
        return suite
    try:
        selected = suite.get_required_checks(only)
    except CheckNotFoundError:
        suite.close_loggers()
        raise
    names = {check.name for check in selected}
    for check in suite.checks:
        if check.name not in names:
            check.close_logger()
    return CheckSuite(selected)
