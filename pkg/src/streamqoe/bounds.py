"""Achievability and converse bounds on the minimum startup buffer D*(eps).

D*(eps) is the smallest initial buffer D (in packets) whose interruption
probability p(D) is at most eps, for a file of T packets delivered at
useful-packet rate R against unit playback rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .analytic import DomainError, r_bar

DEFAULT_ALPHA0 = 1 / 16


class UndefinedRatioError(ValueError):
    pass


@dataclass(frozen=True)
class BoundQuery:
    epsilon: float
    T: float
    R: float

    def __post_init__(self) -> None:
        if not 0 < self.epsilon < 1:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.T > 0:
            raise DomainError(f"T must be positive, got {self.T}")
        if not self.R > 0:
            raise DomainError(f"R must be positive, got {self.R}")


@dataclass(frozen=True)
class BoundValue:
    value: float
    regime: str
    valid: bool = True
    raw: float = math.nan
    notes: tuple[str, ...] = ()


@dataclass
class BoundReport:
    lower: float | None
    upper: float | None
    lower_regime: str
    upper_regime: str
    lower_valid: bool
    validity_notes: list[str] = field(default_factory=list)

    @property
    def lower_int(self) -> int | None:
        return None if self.lower is None else math.floor(self.lower)

    @property
    def upper_int(self) -> int | None:
        return None if self.upper is None else math.ceil(self.upper)

    def as_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "lower_floor": self.lower_int,
            "upper_ceil": self.upper_int,
            "lower_regime": self.lower_regime,
            "upper_regime": self.upper_regime,
            "lower_valid": self.lower_valid,
            "validity_notes": list(self.validity_notes),
        }


def _clamp(x: float, T: float, notes: list[str], what: str) -> float:
    if x < 0:
        notes.append(f"{what} {x:.6g} clamped to 0")
        return 0.0
    if x > T:
        notes.append(f"{what} {x:.6g} clamped to T={T:g} (D = T never interrupts)")
        return float(T)
    return x


def rate_window(q: BoundQuery) -> float:
    """Largest R for which the square-root (diffusive) achievability bound holds."""
    return 1 + math.sqrt(math.log(1 / q.epsilon) / (2 * q.T))


def upper_exponential(q: BoundQuery) -> float:
    """log(1/eps) / r_bar(R); infinite when R <= 1."""
    rb = r_bar(q.R).r_bar
    if rb == 0:
        return math.inf
    return math.log(1 / q.epsilon) / rb


def upper_diffusive(q: BoundQuery) -> float:
    """T(1 - R) + sqrt(2 T R log(1/eps))."""
    return q.T * (1 - q.R) + math.sqrt(2 * q.T * q.R * math.log(1 / q.epsilon))


def d_star_upper(q: BoundQuery) -> BoundValue:
    """Sufficient initial buffer for interruption probability at most eps.

    For R > 1 the exponential bound always applies; inside the rate window
    the diffusive bound is also valid and the smaller of the two is taken.
    R <= 1 only has the diffusive bound.
    """
    notes: list[str] = []
    if q.R > 1:
        a = upper_exponential(q)
        if q.R <= rate_window(q):
            b = upper_diffusive(q)
            raw, regime = min(a, b), "min-of-both"
            notes.append("exponential bound attained" if a <= b else "diffusive bound attained")
        else:
            raw, regime = a, "achievability-a"
    else:
        raw, regime = upper_diffusive(q), "achievability-b"
    value = _clamp(raw, q.T, notes, "upper bound")
    return BoundValue(value=value, regime=regime, valid=True, raw=raw, notes=tuple(notes))


def d_star_lower(q: BoundQuery, alpha0: float = DEFAULT_ALPHA0) -> BoundValue:
    """Necessary initial buffer for interruption probability at most eps.

    R > 1 is unconditional. For R <= 1 the bound needs eps <= 1/16 and
    T >= 16 log(1/eps) / (alpha0^2 R); ``alpha0`` stands in for the unnamed
    constant and the result is flagged invalid when the condition fails.
    """
    if not 0 < alpha0 <= 1 / 16:
        raise DomainError(f"alpha0 must lie in (0, 1/16], got {alpha0}")
    notes: list[str] = []
    log_inv = math.log(1 / q.epsilon)
    if q.R > 1:
        rb = r_bar(q.R).r_bar
        arg = q.epsilon + 2 * math.exp(-((q.R - 1) ** 2) * q.T / (4 * (q.R + 1)))
        raw = -math.log(arg) / rb
        if arg >= 1:
            notes.append("log argument >= 1; bound is trivial")
        value = _clamp(raw, q.T, notes, "lower bound")
        return BoundValue(value=value, regime="converse-a", valid=True, raw=raw, notes=tuple(notes))

    raw = q.T * (1 - q.R) + 0.5 * math.sqrt(2 * q.T * q.R * log_inv)
    value = _clamp(raw, q.T, notes, "lower bound")
    if q.epsilon > 1 / 16:
        notes.append("eps > 1/16: converse not established for R <= 1")
        return BoundValue(value=value, regime="inapplicable", valid=False, raw=raw, notes=tuple(notes))
    t_min = 16 / (alpha0**2 * q.R) * log_inv
    valid = q.T >= t_min
    if not valid:
        notes.append(
            f"T={q.T:g} < C log(1/eps) = {t_min:.6g} with C = 16/(alpha0^2 R), alpha0={alpha0:g}; "
            "converse not certified"
        )
    return BoundValue(value=value, regime="converse-b", valid=valid, raw=raw, notes=tuple(notes))


def bound_report(q: BoundQuery, alpha0: float = DEFAULT_ALPHA0) -> BoundReport:
    up = d_star_upper(q)
    lo = d_star_lower(q, alpha0)
    notes = list(up.notes) + list(lo.notes)
    if lo.valid and lo.value > up.value:
        notes.append(f"lower {lo.value:.6g} exceeds upper {up.value:.6g}")
    return BoundReport(
        lower=lo.value,
        upper=up.value,
        lower_regime=lo.regime,
        upper_regime=up.regime,
        lower_valid=lo.valid,
        validity_notes=notes,
    )


def tightness_ratio(q: BoundQuery, alpha0: float = DEFAULT_ALPHA0) -> float:
    """Relative gap (upper - lower) / lower between the two bounds."""
    lo = d_star_lower(q, alpha0)
    if not lo.valid:
        raise UndefinedRatioError("lower bound not certified for this query: " + "; ".join(lo.notes))
    if lo.value <= 0:
        raise UndefinedRatioError(f"lower bound {lo.value} is not positive")
    up = d_star_upper(q)
    return (up.value - lo.value) / lo.value
