from fractions import Fraction
import random

from hyperextrema import GeneratorRegistry, PerturbedFn
from hyperextrema.evaluation import Point, evaluate_expr
from hyperextrema.hyperreal import format_rational


def random_rational(rng: random.Random, bound: int = 10, max_denominator: int = 5) -> Fraction:
    return Fraction(rng.randint(-bound, bound), rng.randint(1, max_denominator))


def _term(coefficient: Fraction, factor: str) -> str:
    return f"({format_rational(coefficient)})*{factor}" if factor else f"({format_rational(coefficient)})"


def random_polynomial_text(rng: random.Random, max_degree: int = 6) -> str:
    degree = rng.randint(2, max_degree)
    terms = []
    for k in range(degree + 1):
        c = random_rational(rng)
        if k == degree and c == 0:
            c = Fraction(1)
        if c:
            terms.append(_term(c, f"x1^{k}" if k else ""))
    return " + ".join(terms)


def random_perturbation_text(rng: random.Random, registry: GeneratorRegistry, count: int = 2) -> str:
    terms = []
    for _ in range(count):
        generator = rng.choice(registry.names)
        power = rng.randint(1, 2)
        j = rng.randint(0, 4)
        c = random_rational(rng) or Fraction(1)
        factor = f"{generator}^{power}" if power > 1 else generator
        terms.append(_term(c, f"{factor}*x1^{j}" if j else factor))
    return " + ".join(terms)


def random_override(rng: random.Random, registry: GeneratorRegistry, body_text: str, point: Fraction) -> tuple:
    body = PerturbedFn.parse(body_text, 1, registry).body
    base = evaluate_expr(body, Point.of(registry, point).coordinates, registry)
    deviation = registry.generator(rng.randrange(registry.dimension), rng.randint(1, 3)).scaled(random_rational(rng) or 1)
    return (point,), base + deviation


def random_perturbed_function(rng: random.Random, registry: GeneratorRegistry, max_degree: int = 6,
                              overrides: int = 1, perturbations: int = 2) -> PerturbedFn:
    text = random_polynomial_text(rng, max_degree)
    if perturbations:
        text += " + " + random_perturbation_text(rng, registry, perturbations)
    points = {random_rational(rng, 5, 3) for _ in range(overrides)}
    return PerturbedFn.parse(text, 1, registry, [random_override(rng, registry, text, p) for p in sorted(points)])


def random_smooth_text(rng: random.Random) -> str:
    templates = [
        lambda: _term(random_rational(rng, 3), f"sin(({format_rational(random_rational(rng, 3, 2))})*x1)"),
        lambda: _term(random_rational(rng, 3), f"cos(x1 + {format_rational(abs(random_rational(rng, 2, 2)))})"),
        lambda: _term(random_rational(rng, 3), f"exp(({format_rational(random_rational(rng, 2, 3))})*x1)"),
        lambda: _term(random_rational(rng, 3), "log(x1^2 + 1)"),
        lambda: _term(random_rational(rng, 5), f"x1^{rng.randint(1, 4)}"),
        lambda: _term(random_rational(rng, 3), "eps*x1^2"),
    ]
    return " + ".join(rng.choice(templates)() for _ in range(rng.randint(1, 3)))


def spaced_roots(rng: random.Random, count: int, spacing: Fraction = Fraction(1, 2)) -> list[Fraction]:
    """Distinct rationals in [-4, 4] with denominator 3, pairwise at least spacing apart."""
    pool = [Fraction(n, 3) for n in range(-12, 13)]
    rng.shuffle(pool)
    roots: list[Fraction] = []
    for r in pool:
        if all(abs(r - s) >= spacing for s in roots):
            roots.append(r)
        if len(roots) == count:
            return roots
    raise ValueError(f"Could not place {count} roots {spacing} apart")


def critical_point_polynomial_text(rng: random.Random, roots: list[tuple[Fraction, int]]) -> str:
    """Polynomial whose derivative is c * prod (x1 - r)^m over the given (r, m)."""
    derivative = [random_rational(rng) or Fraction(1)]
    for root, multiplicity in roots:
        for _ in range(multiplicity):
            shifted = [Fraction(0)] + derivative
            derivative = [s - root * (derivative[k] if k < len(derivative) else 0) for k, s in enumerate(shifted)]
    coefficients = [random_rational(rng)] + [a / (k + 1) for k, a in enumerate(derivative)]
    return " + ".join(_term(c, f"x1^{k}" if k else "") for k, c in enumerate(coefficients) if c)
