"""Monte-Carlo estimation of p(D) and search for the minimum feasible D.

Every probe of a search reuses the seed in the base config, so estimates
at different D are computed on the same sample paths. With that coupling
the estimated interruption frequency is exactly non-increasing in D.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

from .bounds import DEFAULT_ALPHA0, BoundQuery, bound_report
from .sim import StreamConfig, count_interruptions
from .stats import EstimateWithCI, proportion_estimate

log = logging.getLogger(__name__)

DEFAULT_N = 100_000
DEFAULT_CONFIDENCE = 0.99
DEFAULT_CAP = 8
LOW_CONFIDENCE_PROBES = 3

CSV_COLUMNS = [
    "sweep_var",
    "d_star",
    "d_lower",
    "d_upper",
    "p_hat",
    "ci_half_width",
    "n",
    "flags",
    "d_lower_raw",
    "d_upper_raw",
    "lower_valid",
]


def estimate_p(
    D: float,
    base: StreamConfig,
    n: int = DEFAULT_N,
    confidence: float = DEFAULT_CONFIDENCE,
    workers: int = 1,
) -> EstimateWithCI:
    """Interruption frequency over ``n`` simulated paths with initial buffer D."""
    if n < 100:
        raise ValueError(f"n must be at least 100, got {n}")
    k = count_interruptions(base.with_D(D), n, workers)
    return proportion_estimate(k, n, confidence)


@dataclass
class Probe:
    D: int
    estimate: EstimateWithCI
    feasible: bool
    resolved: bool


@dataclass
class DStarResult:
    d_star: int
    p_at_d: EstimateWithCI
    p_at_d_minus_1: EstimateWithCI | None
    bracket_used: tuple[int, int]
    flags: list[str] = field(default_factory=list)
    low_confidence: bool = False
    probes: list[Probe] = field(default_factory=list)


class _Prober:
    def __init__(self, epsilon, base, n, confidence, cap, workers):
        self.epsilon = epsilon
        self.base = base
        self.n = n
        self.confidence = confidence
        self.cap = cap
        self.workers = workers
        self.cache: dict[int, Probe] = {}
        self.unresolved = 0

    def __call__(self, D: int) -> Probe:
        if D in self.cache:
            return self.cache[D]
        n = self.n
        while True:
            est = estimate_p(D, self.base, n, self.confidence, self.workers)
            if est.hi <= self.epsilon:
                probe = Probe(D, est, True, True)
                break
            if est.lo > self.epsilon:
                probe = Probe(D, est, False, True)
                break
            if 2 * n > self.cap * self.n:
                # pessimistic: an undecided D is treated as too small
                self.unresolved += 1
                probe = Probe(D, est, False, False)
                break
            n *= 2
        log.debug("probe D=%d p=%.6g +- %.3g n=%d feasible=%s", D, est.point, est.half_width, n, probe.feasible)
        self.cache[D] = probe
        return probe


def search_bracket(epsilon: float, base: StreamConfig, alpha0: float = DEFAULT_ALPHA0) -> tuple[int, int]:
    """Integer interval holding D*: floor of the converse bound (when
    certified) up to the ceiling of the achievability bound."""
    top = math.floor(base.T)
    if base.raw_threshold and base.W > 0:
        # the analytic bounds assume the extra-block convention
        return 0, top
    rep = bound_report(BoundQuery(epsilon, base.T, base.R), alpha0)
    lo = max(0, math.floor(rep.lower)) if rep.lower_valid else 0
    hi = min(math.ceil(rep.upper), top)
    return min(lo, hi), hi


def find_d_star(
    epsilon: float,
    base: StreamConfig,
    n_per_probe: int = DEFAULT_N,
    confidence: float = DEFAULT_CONFIDENCE,
    cap: int = DEFAULT_CAP,
    scan: bool = False,
    alpha0: float = DEFAULT_ALPHA0,
    workers: int = 1,
) -> DStarResult:
    """Smallest integer D whose estimated p(D) is at most epsilon.

    A probe is feasible when the whole confidence interval sits at or below
    epsilon and infeasible when it sits above; otherwise the sample count is
    doubled, up to ``cap`` times the base count, after which the probe is
    counted as infeasible. Binary search relies on p(D) being non-increasing;
    ``scan=True`` instead walks upward from the bracket floor one D at a time.
    """
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    lo, hi = search_bracket(epsilon, base, alpha0)
    probe = _Prober(epsilon, base, n_per_probe, confidence, cap, workers)
    flags: list[str] = []

    if scan:
        d = lo
        while d < hi and not probe(d).feasible:
            d += 1
    else:
        a, b = lo, hi
        while a < b:
            mid = (a + b) // 2
            if probe(mid).feasible:
                b = mid
            else:
                a = mid + 1
        d = a

    at_d = probe(d)
    if not at_d.feasible:
        flags.append(f"p_hat at bracket top D={d} not certified <= eps")
    below = probe(d - 1) if d > 0 else None
    if probe.unresolved:
        flags.append(f"{probe.unresolved} probe(s) undecided at {cap}x samples, resolved as infeasible")
    return DStarResult(
        d_star=d,
        p_at_d=at_d.estimate,
        p_at_d_minus_1=below.estimate if below else None,
        bracket_used=(lo, hi),
        flags=flags,
        low_confidence=probe.unresolved > LOW_CONFIDENCE_PROBES,
        probes=sorted(probe.cache.values(), key=lambda p: p.D),
    )


def sweep(
    kind: str,
    grid: list[float],
    fixed: StreamConfig,
    epsilon: float | None = None,
    n: int = DEFAULT_N,
    confidence: float = DEFAULT_CONFIDENCE,
    scan: bool = False,
    alpha0: float = DEFAULT_ALPHA0,
    workers: int = 1,
) -> list[dict]:
    """D* and its analytic bounds at each grid point.

    ``kind="epsilon"`` varies the target probability with R, T from
    ``fixed``; ``kind="rate"`` varies R at the given ``epsilon``.
    Rows follow grid order; a failing point is recorded in its row's flags.
    """
    if kind not in ("epsilon", "rate"):
        raise ValueError(f"unknown sweep kind {kind!r}")
    if not grid:
        raise ValueError("grid is empty")
    if list(grid) != sorted(grid):
        raise ValueError("grid must be sorted")
    if kind == "rate" and epsilon is None:
        raise ValueError("rate sweep needs epsilon")

    rows = []
    for x in grid:
        eps = x if kind == "epsilon" else epsilon
        row: dict = {c: "" for c in CSV_COLUMNS}
        row["sweep_var"] = x
        try:
            cfg = fixed if kind == "epsilon" else replace(fixed, R=x)
            rep = bound_report(BoundQuery(eps, cfg.T, cfg.R), alpha0)
            row.update(
                d_lower=rep.lower_int,
                d_upper=rep.upper_int,
                d_lower_raw=rep.lower,
                d_upper_raw=rep.upper,
                lower_valid=rep.lower_valid,
            )
            res = find_d_star(eps, cfg, n, confidence, scan=scan, alpha0=alpha0, workers=workers)
            flags = list(res.flags) + (["low-confidence"] if res.low_confidence else [])
            row.update(
                d_star=res.d_star,
                p_hat=res.p_at_d.point,
                ci_half_width=res.p_at_d.half_width,
                n=res.p_at_d.n,
                flags="; ".join(flags),
            )
        except Exception as exc:  # keep sweeping
            log.warning("sweep point %r failed: %s", x, exc)
            row["flags"] = f"error: {exc}"
        rows.append(row)
    return rows
