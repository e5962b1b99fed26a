"""Closed-form quantities for the Poisson-arrival / unit-playback buffer.

Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import bisect

DEFAULT_ROOT_TOL = 1e-10


class DomainError(ValueError):
    """An argument lies outside the region where a formula or bound holds."""


class PreconditionError(ValueError):
    """Raised when the drift condition gamma(r) >= 0 fails for a Chernoff bound."""


@dataclass(frozen=True)
class DriftFunctionPoint:
    r: float
    R: float
    value: float


@dataclass(frozen=True)
class RateRoot:
    R: float
    r_bar: float
    bracket_lo: float
    bracket_hi: float
    tolerance: float


def gamma(r: float, R: float) -> float:
    """Log of the one-step growth factor of E[exp(-r Q(t))] per unit time.

    ``gamma(r, R) = r + R (exp(-r) - 1)``; ``expm1`` keeps it accurate for
    small ``r`` where the two terms nearly cancel.
    """
    if r < 0 or R < 0:
        raise DomainError(f"gamma needs r >= 0 and R >= 0, got r={r}, R={R}")
    return r + R * math.expm1(-r)


def drift_point(r: float, R: float) -> DriftFunctionPoint:
    return DriftFunctionPoint(r=r, R=R, value=gamma(r, R))


def root_bracket(R: float) -> tuple[float, float]:
    """Interval guaranteed to contain the largest root of gamma(., R)."""
    if R < 0:
        raise DomainError(f"R must be nonnegative, got {R}")
    if R <= 1:
        return 0.0, 0.0
    if R <= 2:
        return 2 * (R - 1) / R, 2 * (R - 1)
    return R - 1, R


def r_bar(R: float, tolerance: float = DEFAULT_ROOT_TOL) -> RateRoot:
    """Largest root of ``gamma(., R)``: the exponential decay rate of p(D).

    Zero for ``R <= 1``. Otherwise located by bisection inside the
    analytic bracket, which always straddles a sign change.
    """
    if R < 0:
        raise DomainError(f"R must be nonnegative, got {R}")
    if not tolerance > 0:
        raise DomainError(f"tolerance must be positive, got {tolerance}")
    lo, hi = root_bracket(R)
    if R <= 1:
        return RateRoot(R=R, r_bar=0.0, bracket_lo=lo, bracket_hi=hi, tolerance=tolerance)

    def f(r: float) -> float:
        return gamma(r, R)

    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        root = lo
    elif f_hi == 0.0:
        root = hi
    elif f_lo > 0:
        # rounding at R barely above 1 can flip the sign at the lower end
        root = lo
    else:
        root = bisect(f, lo, hi, xtol=tolerance, maxiter=400)
    return RateRoot(R=R, r_bar=root, bracket_lo=lo, bracket_hi=hi, tolerance=tolerance)


def chernoff_interruption_ub(D: float, T: float, R: float, r: float) -> float:
    """Doob-maximal-inequality bound ``p(D) <= exp(-r D + T gamma(r))``.

    Requires ``gamma(r) >= 0`` so that ``exp(-r Q(t))`` is a sub-martingale.
    Values above 1 are vacuous and returned unchanged.
    """
    if D < 0 or T <= 0:
        raise DomainError(f"need D >= 0 and T > 0, got D={D}, T={T}")
    g = gamma(r, R)
    if g < 0:
        raise PreconditionError(
            f"gamma({r}, {R}) = {g:.6g} < 0; exp(-rQ) is not a sub-martingale"
        )
    return math.exp(-r * D + T * g)


def poisson_lower_tail_ub(lam: float, k: float) -> float:
    """Upper bound on Pr{Poisson(lam) <= lam - k}, for lam >= 2 and k >= 2.

    The Gaussian-type tail ``exp(-(k - 3/2)^2 / (2 lam))`` (note the negative
    exponent, which is what the normal-tail argument gives).
    """
    if lam < 2 or k < 2:
        raise DomainError(f"need lam >= 2 and k >= 2, got lam={lam}, k={k}")
    return math.exp(-((k - 1.5) ** 2) / (2 * lam))


def poisson_lower_tail_lb(lam: float, m: float) -> float:
    """Lower bound on Pr{Poisson(lam) <= lam - m sqrt(lam)}.

    Valid for ``0 < m <= sqrt(lam)/20 - 1``; the bound is
    ``exp(-(m + 1/2)^2 / 1.9) / 3``.
    """
    if lam <= 0 or m <= 0:
        raise DomainError(f"need lam > 0 and m > 0, got lam={lam}, m={m}")
    if m > math.sqrt(lam) / 20 - 1:
        raise DomainError(f"m={m} exceeds sqrt(lam)/20 - 1 = {math.sqrt(lam) / 20 - 1:.6g}")
    return math.exp(-((m + 0.5) ** 2) / 1.9) / 3


def boundary_crossing_ub(R: float, delta: float, s: float) -> float:
    """Bound on Pr{Q(t) >= D + delta + (R + s - 1) t for some t}.

    Holds for every horizon and initial level provided ``s <= R``.
    """
    if R <= 0 or delta <= 0 or s <= 0:
        raise DomainError(f"need R, delta, s > 0, got R={R}, delta={delta}, s={s}")
    if s > R:
        raise DomainError(f"s={s} > R={R}")
    return math.exp(-s * delta / R)


def poisson_logpmf(i: int, lam: float) -> float:
    if lam == 0:
        return 0.0 if i == 0 else -math.inf
    return i * math.log(lam) - lam - math.lgamma(i + 1)


def poisson_cdf(x: float, lam: float, rel_stop: float = 1e-30) -> float:
    """Pr{Poisson(lam) <= x} by direct pmf summation in log space.

    Terms are summed outward from the one nearest the mode so the running
    sum is dominated early; summation stops once a term drops below
    ``rel_stop`` times the running sum. Above the mode the complement is
    summed instead, so neither branch loses precision to cancellation.
    """
    if lam < 0:
        raise DomainError(f"lam must be nonnegative, got {lam}")
    n = math.floor(x)
    if n < 0:
        return 0.0
    if lam == 0:
        return 1.0
    mode = math.floor(lam)
    if n <= mode:
        return _sum_outward(n, -1, lam, rel_stop)
    return 1.0 - _sum_outward(n + 1, +1, lam, rel_stop)


def _sum_outward(start: int, step: int, lam: float, rel_stop: float) -> float:
    # terms are monotone moving away from the mode, so the first is the largest
    top = poisson_logpmf(start, lam)
    acc = 0.0
    i = start
    while i >= 0:
        term = math.exp(poisson_logpmf(i, lam) - top)
        acc += term
        if term < rel_stop * acc:
            break
        i += step
    return math.exp(top) * acc
