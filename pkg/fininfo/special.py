"""Special functions used by the nearest-neighbor estimators."""

from __future__ import annotations

import math

from scipy.special import gammaln

from fininfo.errors import DomainError

# Below this the asymptotic expansion loses accuracy; shift up by recurrence first.
_ASYMPTOTIC_FROM = 10.0

# Bernoulli-number coefficients B_2n / (2n) of the expansion in 1/x^2.
_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma(x: float) -> float:
    """Digamma function psi(x) = d/dx log Gamma(x) for x > 0.

    Uses psi(x) = psi(x + 1) - 1/x to move the argument above 10, then the
    asymptotic expansion log x - 1/(2x) - sum B_2n / (2n x^2n). Accurate to
    better than 1e-12 over the positive reals.

    Raises:
        DomainError: if x <= 0 or x is not finite.
    """
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"digamma is defined for finite x > 0, got {x!r}")

    shift = 0.0
    while x < _ASYMPTOTIC_FROM:
        shift -= 1.0 / x
        x += 1.0

    inv2 = 1.0 / (x * x)
    tail = 0.0
    power = inv2
    for coeff in _SERIES:
        tail += coeff * power
        power *= inv2
    return shift + math.log(x) - 0.5 / x - tail


def unit_ball_volume(d: int) -> float:
    """Volume of the Euclidean unit ball in d dimensions, pi^(d/2) / Gamma(d/2 + 1)."""
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    return math.exp(log_unit_ball_volume(d))


def log_unit_ball_volume(d: int, metric: str = "euclidean") -> float:
    """log c_d for the unit ball of ``metric``.

    The maximum-coordinate ball of radius 1 is the cube of side 2, so its log
    volume is d log 2.
    """
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    if metric == "chebyshev":
        return d * math.log(2.0)
    return 0.5 * d * math.log(math.pi) - float(gammaln(0.5 * d + 1.0))
