"""Startup buffering versus interruption probability for coded media streaming."""

__version__ = "0.1.0"

from .analytic import (
    DomainError,
    PreconditionError,
    boundary_crossing_ub,
    chernoff_interruption_ub,
    gamma,
    poisson_cdf,
    poisson_lower_tail_lb,
    poisson_lower_tail_ub,
    r_bar,
)
from .bounds import BoundQuery, BoundReport, bound_report, d_star_lower, d_star_upper, tightness_ratio
from .estimator import DStarResult, estimate_p, find_d_star, sweep
from .rlnc import CodedPacket, DecoderState, Ingest, encode, estimate_delta
from .sim import (
    PathOutcome,
    StreamConfig,
    boundary_crossing_frequency,
    exponential_moment,
    simulate_path,
    simulate_paths,
)
from .stats import EstimateWithCI
