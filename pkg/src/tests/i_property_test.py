from fractions import Fraction
import random

from hypothesis import given, settings, strategies as st
from mpmath.ctx_mp import MPContext

from hyperextrema import (GeneratorRegistry, PerturbedFn, Point, VerdictKind, InapplicableChainRuleError, make,
                          approx_eq, classify_1d, st_oracle_classify, st_derivative, nth_derivative_at, taylor_check,
                          mvt_check, chain_rule_check, mu_increment_check, find_candidates, parse, sqrt_abs, ProbeConfig)
from hyperextrema.evaluation import evaluate_expr
from hyperextrema.expr import Add, Div, Func, InfinitesimalConst, IntPow, Mul, Neg, RealConst, Sub, Var

from .random_functions import (random_rational, random_polynomial_text, random_perturbation_text, random_override,
                               random_perturbed_function, random_smooth_text, spaced_roots,
                               critical_point_polynomial_text)

import pytest


REG = GeneratorRegistry(("eps", "delta"))
EPS = REG.generator("eps")
DELTA = REG.generator("delta")

fractions = st.fractions(min_value=-20, max_value=20, max_denominator=12)
terms = st.lists(st.tuples(st.tuples(st.integers(0, 4), st.integers(0, 4)), fractions), max_size=5)
finite = terms.map(lambda items: make(REG, items))


@settings(max_examples=200, deadline=None)
@given(finite, finite)
def test_standard_part_is_a_ring_homomorphism(x, y):
    assert (x + y).standard_part() == x.standard_part() + y.standard_part()
    assert (x * y).standard_part() == x.standard_part() * y.standard_part()
    assert (x - y).standard_part() == x.standard_part() - y.standard_part()


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite)
def test_field_laws(x, y, z):
    assert x + y == y + x
    assert x * y == y * x
    assert x * (y + z) == x * y + x * z
    assert (x + y) - y == x


@settings(max_examples=200, deadline=None)
@given(finite, finite)
def test_total_order(x, y):
    assert sum([x < y, x == y, x > y]) == 1
    assert (x < y) == (y - x > 0)
    if not (x - y).is_infinitesimal():
        assert x.gg(y) or x.ll(y)


@settings(max_examples=100, deadline=None)
@given(finite, finite)
def test_infinitesimal_shift_keeps_approx(x, z):
    assert approx_eq(x, x + EPS * z)
    assert (x + EPS * z).standard_part() == x.standard_part()


def test_standard_part_homomorphism_fuzz():
    rng = random.Random(11)
    for _ in range(1000):
        x, y = (make(REG, [((rng.randint(0, 3), rng.randint(0, 3)), random_rational(rng)) for _ in range(rng.randint(0, 4))])
                for _ in range(2))
        assert (x + y).standard_part() == x.standard_part() + y.standard_part()
        assert (x * y).standard_part() == x.standard_part() * y.standard_part()
        if y.standard_part() != 0:
            assert (x / y).standard_part() == x.standard_part() / y.standard_part()


def _bump_text(rng: random.Random, root: Fraction) -> str:
    c = random_rational(rng) or Fraction(1)
    k = rng.randint(1, 6)
    q = random_rational(rng)
    return f"({c})*(x1 - ({root}))^{k} + ({q})*(x1 - ({root}))^{k + 1}"


def test_classification_matches_standard_part_oracle():
    rng = random.Random(7)
    for i in range(200):
        roots = spaced_roots(rng, 4 if i % 3 == 0 else 3)
        multiplicities = [rng.choice((1, 1, 3)) for _ in range(3)] + [2] * (len(roots) - 3)
        text = critical_point_polynomial_text(rng, list(zip(roots, multiplicities)))
        text += " + " + random_perturbation_text(rng, REG, 2)
        overrides = [random_override(rng, REG, text, roots[0])] if i % 2 else []
        f = PerturbedFn.parse(text, 1, REG, overrides)
        candidates = find_candidates(f, (-5, 5)).points()
        assert len(candidates) >= 3, f"{f}: {candidates}"
        assert set(roots[:3]) <= set(candidates)
        for a in candidates + [random_rational(rng, 3, 3)]:
            verdict, oracle = classify_1d(f, a), st_oracle_classify(f, a)
            assert verdict.kind is oracle.kind, f"{f} at {a}"
            assert verdict.decisive_order == oracle.decisive_order
            if verdict.kind is VerdictKind.M_MINIMIZER:
                assert all(entry.value.is_infinitesimal() for entry in verdict.trace[:1])


def test_negation_mirrors_verdicts():
    rng = random.Random(8)
    for _ in range(50):
        root = random_rational(rng, 3, 3)
        f = PerturbedFn.parse(_bump_text(rng, root), 1, REG)
        verdict, mirrored = classify_1d(f, root), classify_1d(f.negated(), root)
        assert mirrored.kind is verdict.kind.mirrored()
        assert mirrored.decisive_order == verdict.decisive_order


def test_perturbation_invariance():
    rng = random.Random(9)
    for _ in range(100):
        root = random_rational(rng, 3, 3)
        text = _bump_text(rng, root)
        plain = classify_1d(PerturbedFn.parse(text, 1, REG), root)
        perturbed = classify_1d(PerturbedFn.parse(text + " + " + random_perturbation_text(rng, REG, 3), 1, REG), root)
        assert perturbed.kind is plain.kind
        assert perturbed.decisive_order == plain.decisive_order
        assert approx_eq(perturbed.decisive_value, plain.decisive_value)


def test_derivatives_commute_with_standard_part():
    rng = random.Random(10)
    for _ in range(100):
        text = random_polynomial_text(rng)
        plain = PerturbedFn.parse(text, 1, REG)
        perturbed = PerturbedFn.parse(text + " + " + random_perturbation_text(rng, REG, 3), 1, REG)
        a = random_rational(rng, 4, 4)
        for k in range(0, 4):
            assert st_derivative(perturbed, 1, k, a) == nth_derivative_at(plain, 1, k, Point.of(REG, a)).standard_part()


@pytest.mark.parametrize("k", [1, 2, 3])
def test_taylor_on_random_smooth_functions(k):
    rng = random.Random(100 + k)
    for _ in range(17):
        f = PerturbedFn.parse(random_smooth_text(rng), 1, REG)
        a = random_rational(rng, 2, 3)
        report = taylor_check(f, a, k)
        assert report.passed, f"{f} at {a}"


def test_mvt_on_random_polynomials():
    rng = random.Random(12)
    for _ in range(50):
        f = random_perturbed_function(rng, REG, max_degree=5, overrides=0)
        x = random_rational(rng, 3, 2) + random_rational(rng) * EPS
        y = x + (random_rational(rng, 3, 2) or Fraction(1)) + random_rational(rng) * DELTA
        assert x.is_finite() and y.is_finite()
        assert mvt_check(f, x, y).passed, f"{f} on [{x}, {y}]"


def test_chain_rule_on_random_functions():
    rng = random.Random(13)
    for _ in range(50):
        f = PerturbedFn.parse(random_smooth_text(rng), 1, REG)
        c = random_rational(rng, 3, 3) or Fraction(1)
        g = PerturbedFn.parse(f"({c})*x1 + ({random_rational(rng, 2, 2)}) + eps*x1^2", 1, REG)
        a = random_rational(rng, 2, 2)
        assert chain_rule_check(f, g, a).passed, f"{f} after {g} at {a}"
    with pytest.raises(InapplicableChainRuleError):
        chain_rule_check(PerturbedFn.parse("x1^2", 1, REG), PerturbedFn.parse("eps*x1 + 1", 1, REG), 1)


def test_increment_on_random_functions_with_overrides():
    rng = random.Random(14)
    for _ in range(20):
        f = random_perturbed_function(rng, REG, max_degree=4, overrides=1)
        (point, _), = f.overrides
        assert mu_increment_check(f, point).passed, f"{f} at {point}"
        assert mu_increment_check(f, point[0] + 1).passed, f"{f} at {point[0] + 1}"


def test_evaluation_respects_expression_identities():
    rng = random.Random(16)
    for _ in range(100):
        p, q, r = (random_smooth_text(rng) for _ in range(3))
        x = (REG.constant(random_rational(rng, 2, 3)) + random_rational(rng) * EPS,)

        def ev(text):
            return evaluate_expr(parse(text, 1, REG), x, REG)

        P, Q, R = ev(p), ev(q), ev(r)
        assert ev(f"({p}) + ({q})") == P + Q
        assert ev(f"({p}) - ({q})") == P - Q
        assert ev(f"-({p})") == -P
        assert ev(f"({p})*({q})") == P * Q == ev(f"({q})*({p})")
        assert ev(f"({p})^2") == P * P
        assert ev(f"({p})*(({q}) + ({r}))") == ev(f"({p})*({q}) + ({p})*({r})")
        if Q.standard_part() != 0:
            assert ev(f"({p})/({q})").standard_part() == P.standard_part() / Q.standard_part()


JET_ORDER = 4
JET = MPContext()
JET.dps = 80


def _mpf(value: Fraction):
    return JET.mpf(value.numerator) / value.denominator


def _jet_mul(x: list, y: list) -> list:
    return [sum(x[i] * y[k - i] for i in range(k + 1)) for k in range(JET_ORDER + 1)]


def _jet_inverse(x: list) -> list:
    inverse = [1 / x[0]]
    for k in range(1, JET_ORDER + 1):
        inverse.append(-sum(x[i] * inverse[k - i] for i in range(1, k + 1)) / x[0])
    return inverse


def _jet_func(name: str, u: list) -> list:
    taylor = JET.taylor(getattr(JET, name), u[0], JET_ORDER)
    h = [JET.mpf(0)] + u[1:]
    result = [JET.mpf(0)] * (JET_ORDER + 1)
    power = [JET.mpf(1)] + [JET.mpf(0)] * JET_ORDER
    for c in taylor:
        result = [r + c * t for r, t in zip(result, power)]
        power = _jet_mul(power, h)
    return result


def _jet(e, x: list) -> list:
    """Taylor jet in eps of an expression at x, truncated at JET_ORDER."""
    zero = [JET.mpf(0)] * (JET_ORDER + 1)
    match e:
        case RealConst(value):
            return [_mpf(value)] + zero[1:]
        case InfinitesimalConst("eps", power):
            return [JET.mpf(1) if k == power else JET.mpf(0) for k in range(JET_ORDER + 1)]
        case Var(1):
            return x
        case Neg(arg):
            return [-c for c in _jet(arg, x)]
        case Add(l, r):
            return [a + b for a, b in zip(_jet(l, x), _jet(r, x))]
        case Sub(l, r):
            return [a - b for a, b in zip(_jet(l, x), _jet(r, x))]
        case Mul(l, r):
            return _jet_mul(_jet(l, x), _jet(r, x))
        case Div(l, r):
            return _jet_mul(_jet(l, x), _jet_inverse(_jet(r, x)))
        case IntPow(base, k) if k >= 0:
            result = [JET.mpf(1)] + zero[1:]
            b = _jet(base, x)
            for _ in range(k):
                result = _jet_mul(result, b)
            return result
        case Func(name, arg):
            return _jet_func(name, _jet(arg, x))
    raise TypeError(f"No jet rule for {e}")


def test_transcendental_lifting_matches_jet_propagation():
    rng = random.Random(17)
    for _ in range(60):
        text = random_smooth_text(rng)
        a, c = random_rational(rng, 2, 3), random_rational(rng, 3, 2) or Fraction(1)
        value = evaluate_expr(parse(text, 1, REG), (REG.constant(a) + c * EPS,), REG)
        expected = _jet(parse(text, 1, REG), [_mpf(a), _mpf(c)] + [JET.mpf(0)] * (JET_ORDER - 1))
        for j in range(JET_ORDER + 1):
            got = _mpf(Fraction(value.coefficient_at((j, 0))))
            assert abs(got - expected[j]) <= JET.mpf(10) ** -40 * max(1, abs(expected[j])), f"{text} at {a} + {c}*eps, order {j}"


def test_first_order_taylor_implies_increment():
    rng = random.Random(18)
    passed = 0
    for i in range(60):
        if i % 2:
            f = random_perturbed_function(rng, REG, max_degree=5, overrides=1)
            a = f.overrides[0][0][0]
        else:
            f = PerturbedFn.parse(random_smooth_text(rng), 1, REG)
            a = random_rational(rng, 2, 3)
        if taylor_check(f, a, 1).passed:
            passed += 1
            assert mu_increment_check(f, a).passed, f"{f} at {a}"
    assert passed >= 30


@st.composite
def probe_configs(draw):
    exponents = st.one_of(st.sampled_from([Fraction(1, 4), Fraction(1, 2), Fraction(1), Fraction(3, 2)]).map(lambda p: (p, 0)),
                          st.integers(1, 2).map(lambda q: (0, q)))
    coefficients = st.fractions(min_value=-5, max_value=5, max_denominator=4).filter(bool)
    offsets = draw(st.lists(st.tuples(coefficients, exponents), min_size=1, max_size=4))
    return ProbeConfig(delta_exponent=draw(st.integers(2, 12)), sample_offsets=tuple(offsets),
                       seed=draw(st.integers(0, 100)))


@settings(max_examples=60, deadline=None)
@given(probe_configs(), st.integers(0, 10 ** 6), st.fractions(min_value=-3, max_value=3, max_denominator=4))
def test_increment_under_random_probe_configs(cfg, seed, a):
    f = random_perturbed_function(random.Random(seed), REG, max_degree=4, overrides=0)
    report = mu_increment_check(f, a, cfg)
    assert report.passed, f"{f} at {a}"
    assert report.config == cfg


def _naive_product(x, y) -> dict:
    product = {}
    for ex, cx in x.terms:
        for ey, cy in y.terms:
            e = tuple(p + q for p, q in zip(ex, ey))
            product[e] = product.get(e, 0) + cx * cy
    return {e: c for e, c in product.items() if c}


def test_reciprocal_of_one_plus_eps():
    r = (1 + EPS).reciprocal()
    for k in range(REG.exp_bound + 1):
        assert r.coefficient_at((k, 0)) == (-1) ** k
    kept = {e: c for e, c in _naive_product(1 + EPS, r).items() if e[0] <= REG.exp_bound}
    assert kept == {(0, 0): 1}


@settings(max_examples=100, deadline=None)
@given(st.lists(fractions, min_size=5, max_size=5).filter(lambda cs: cs[0] != 0))
def test_reciprocal_against_naive_convolution(coefficients):
    x = make(REG, [((k, 0), c) for k, c in enumerate(coefficients)])
    kept = {e: c for e, c in _naive_product(x, x.reciprocal()).items() if e[0] <= REG.exp_bound}
    assert kept == {(0, 0): 1}


@settings(max_examples=100, deadline=None)
@given(st.fractions(min_value=Fraction(1, 8), max_value=8, max_denominator=8),
       st.fractions(min_value=Fraction(1, 4), max_value=4, max_denominator=4))
def test_square_root_of_infinitesimals(p, s):
    x = REG.generator("eps", p).scaled(s * s)
    root = sqrt_abs(x)
    assert root > x
    assert (x / root).is_infinitesimal() and not (x / root).is_zero
    assert root.leading_exponent < x.leading_exponent
    assert _naive_product(root, root) == dict(x.terms)


def test_square_root_of_eps_dominates_eps():
    root = sqrt_abs(EPS)
    assert root == REG.generator("eps", Fraction(1, 2))
    assert _naive_product(root, root) == dict(EPS.terms)
    assert root > EPS
    assert (EPS / root).is_infinitesimal()
    assert root.leading_exponent < EPS.leading_exponent
