from . import coefficients
from .hyperreal import Hyperreal, MagnitudeClass


class EvaluationError(Exception):
    pass


def lift(name: str, u: Hyperreal) -> Hyperreal:
    """Applies sin/cos/exp/log to a finite element.

    With a = st(u) and h = u - a the result is the Taylor jet
    sum_j F^(j)(a)/j! h^j, carried until h^j falls beyond the truncation bound.
    """
    if u.magnitude_class() is MagnitudeClass.INFINITE:
        raise EvaluationError(f"{name} argument must be finite. Got {u}")
    registry = u.registry
    a = u.standard_part()
    if name == "log" and a <= 0:
        raise EvaluationError(f"log argument must have a positive standard part. Got {u}")
    h = u - a
    result = registry.constant(coefficients.function_value(name, a, registry.mode))
    if h.is_zero:
        return result
    power = registry.one()
    factorial = 1
    j = 0
    while True:
        j += 1
        power = power * h
        if power.is_zero:
            break
        factorial *= j
        derivative = coefficients.function_derivative(name, j, a, registry.mode)
        if derivative != 0:
            result = result + power.scaled(registry.coefficient(derivative) / factorial)
    if power.truncated and not result.truncated:
        result = Hyperreal(registry, result.terms, True)
    return result
