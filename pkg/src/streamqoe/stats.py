from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from scipy.stats import norm


def z_value(confidence: float) -> float:
    """Two-sided normal quantile for the given confidence level."""
    if not 0 < confidence < 1:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    return float(norm.ppf(0.5 + confidence / 2))


@dataclass(frozen=True)
class EstimateWithCI:
    point: float
    half_width: float
    confidence: float
    n: int
    std_error: float

    @property
    def lo(self) -> float:
        return self.point - self.half_width

    @property
    def hi(self) -> float:
        return self.point + self.half_width

    def as_dict(self) -> dict:
        return asdict(self)


def proportion_estimate(k: int, n: int, confidence: float) -> EstimateWithCI:
    """Normal-approximation interval for a binomial frequency k/n.

    The standard error is floored at 1/(2n) so that p_hat in {0, 1} still
    gets a nonzero width.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    p = k / n
    se = max(math.sqrt(p * (1 - p) / n), 1 / (2 * n))
    return EstimateWithCI(p, z_value(confidence) * se, confidence, n, se)


def combine_moments(parts) -> tuple[int, float, float]:
    """Merge per-batch (count, mean, sum of squared deviations) triples."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        if nb == 0:
            continue
        tot = n + nb
        d = mb - mean
        mean += d * nb / tot
        m2 += m2b + d * d * n * nb / tot
        n = tot
    return n, mean, m2


def mean_estimate(mean: float, m2: float, n: int, confidence: float) -> EstimateWithCI:
    """Sample mean with a CLT interval; ``m2`` is the sum of squared deviations."""
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    se = math.sqrt(m2 / (n - 1) / n)
    return EstimateWithCI(mean, z_value(confidence) * se, confidence, n, se)
