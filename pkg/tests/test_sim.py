import io
import math

import numpy as np
import pytest
from scipy.stats import poisson

from streamqoe.analytic import boundary_crossing_ub, gamma, r_bar
from streamqoe.sim import (
    ConfigError,
    StreamConfig,
    boundary_crossing_frequency,
    count_interruptions,
    exponential_moment,
    exponential_moment_relvar,
    simulate_path,
    simulate_paths,
    write_trace_csv,
)

from oracles import discrete_time_p, exact_p


def test_config_validation():
    for kw in [dict(R=0, T=10), dict(R=1, T=0), dict(R=1, T=10, D=11), dict(R=1, T=10, D=-1),
               dict(R=1, T=10, W=-1), dict(R=1, T=10, W=1.5), dict(R=1, T=10, completion="round")]:
        with pytest.raises(ConfigError):
            StreamConfig(**kw)


def test_completion_modes():
    cfg = StreamConfig(R=1, T=10, D=2.5)
    assert cfg.arrivals_to_complete == 8
    assert StreamConfig(R=1, T=10, D=2.5, completion="floor").arrivals_to_complete == 7
    assert StreamConfig(R=1, T=10, W=3, raw_threshold=True).threshold == 3
    assert StreamConfig(R=1, T=10, W=3).threshold == 0


def test_full_buffer_never_interrupts():
    out = simulate_path(StreamConfig(R=0.3, T=20, D=20))
    assert not out.interrupted and out.stop_time == 0 and out.arrivals_seen == 0
    assert count_interruptions(StreamConfig(R=0.3, T=20, D=20), 5000) == 0


def test_empty_buffer_interrupts_at_once():
    out = simulate_path(StreamConfig(R=5, T=20, D=0))
    assert out.interrupted and out.stop_time == 0
    assert count_interruptions(StreamConfig(R=5, T=20, D=0), 5000) == 5000


def test_raw_threshold_shifts_interruption_level():
    base = StreamConfig(R=1.5, T=30, D=6, seed=4)
    raw = StreamConfig(R=1.5, T=30, D=6, W=2, raw_threshold=True, seed=4)
    shifted = StreamConfig(R=1.5, T=30, D=4, seed=4)
    n = 20_000
    p = exact_p(6, 30, 1.5, threshold=2)
    k_raw = count_interruptions(raw, n)
    assert abs(k_raw / n - p) <= 3 * math.sqrt(p * (1 - p) / n)
    # a lower interruption level only adds interruptions; a smaller D also delays completion
    assert k_raw >= count_interruptions(base, n)
    assert count_interruptions(shifted, n) >= k_raw


def test_seed_determinism_and_trace():
    cfg = StreamConfig(R=1.1, T=40, D=3, seed=11)
    a = simulate_path(cfg, trace=True)
    b = simulate_path(cfg, trace=True)
    assert a == b
    assert a.trace[0] == (0.0, 3.0)
    assert len(a.trace) == a.arrivals_seen + 1 + a.interrupted
    times = [t for t, _ in a.trace]
    assert times == sorted(times) and a.trace[-1][0] == pytest.approx(a.stop_time)
    if a.interrupted:
        assert a.trace[-1][1] == pytest.approx(0.0, abs=1e-12)


def test_trace_levels_follow_buffer_equation():
    cfg = StreamConfig(R=1.4, T=60, D=5, seed=2)
    out = simulate_path(cfg, trace=True)
    for i, (t, q) in enumerate(out.trace[1 : out.arrivals_seen + 1]):
        assert q == pytest.approx(cfg.D + i + 1 - t)
        assert q > 0


def test_single_path_matches_first_row_of_batch():
    cfg = StreamConfig(R=1.3, T=50, D=4, seed=9)
    batch = simulate_paths(cfg, 10)
    assert simulate_path(cfg) == batch.outcome(0)


def test_explicit_rng_is_reproducible():
    cfg = StreamConfig(R=1.3, T=50, D=4)
    a = simulate_path(cfg, np.random.default_rng(5))
    b = simulate_path(cfg, np.random.default_rng(5))
    assert a == b


def test_stop_time_within_horizon():
    cfg = StreamConfig(R=1.2, T=50, D=5, seed=1)
    batch = simulate_paths(cfg, 3000)
    assert np.all(batch.stop_time <= cfg.T + 1e-9)
    done = ~batch.interrupted
    assert np.all(batch.arrivals_seen[done] == cfg.arrivals_to_complete)


def test_workers_do_not_change_results():
    cfg = StreamConfig(R=1.2, T=100, D=6, seed=3)
    a = simulate_paths(cfg, 5000, workers=1)
    b = simulate_paths(cfg, 5000, workers=2)
    assert np.array_equal(a.interrupted, b.interrupted)
    assert np.array_equal(a.stop_time, b.stop_time)


def test_coupling_is_monotone_in_D():
    cfg = StreamConfig(R=1.1, T=200, seed=21)
    prev = simulate_paths(cfg.with_D(0), 10_000).interrupted
    for D in range(1, 25):
        cur = simulate_paths(cfg.with_D(D), 10_000).interrupted
        assert not np.any(cur & ~prev)
        prev = cur


def test_matches_exact_and_discrete_oracles():
    n = 1_000_000
    p_exact = exact_p(5, 10, 1.5)
    p_grid = discrete_time_p(5, 10, 1.5, h=1e-3)
    assert p_grid == pytest.approx(p_exact, rel=1e-6)
    k = count_interruptions(StreamConfig(R=1.5, T=10, D=5, seed=7), n)
    sigma = math.sqrt(p_grid * (1 - p_grid) / n)
    assert abs(k / n - p_grid) <= 3 * sigma


@pytest.mark.parametrize("D,T,R", [(2, 6, 0.7), (3, 12, 1.0), (1.5, 9, 2.0)])
def test_small_grid_against_discrete_oracle(D, T, R):
    n = 100_000
    p = discrete_time_p(D, T, R, h=1e-3)
    k = count_interruptions(StreamConfig(R=R, T=T, D=D, seed=13), n)
    assert abs(k / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_exponential_moment_trivial():
    est = exponential_moment(StreamConfig(R=1.2, T=100, D=10), 0.0, 20, 1000)
    assert est.point == 1 and est.half_width == 0


def test_exponential_moment_at_root():
    rb = r_bar(1.2).r_bar
    cfg = StreamConfig(R=1.2, T=500, D=10, seed=3)
    est = exponential_moment(cfg, rb, 50, 100_000)
    closed = math.exp(-rb * 10)
    assert closed == pytest.approx(0.023182, abs=1e-6)
    assert abs(est.point - closed) <= 3 * est.std_error


def test_exponential_moment_identity_by_exact_sum():
    # E[exp(-r Q(t))] summed over the Poisson law of A(t)
    R, D = 1.2, 10
    for r, t in [(1.0, 50), (0.376438, 50), (0.8, 7), (2.0, 3)]:
        a = np.arange(0, int(R * t + 40 * math.sqrt(R * t) + 50))
        exact = np.sum(poisson.pmf(a, R * t) * np.exp(-r * (D + a - t)))
        assert exact == pytest.approx(math.exp(-r * D + t * gamma(r, R)), rel=1e-10)


def test_exponential_moment_heavy_tail_closed_form():
    closed = math.exp(-10 + 50 * gamma(1.0, 1.2))
    assert closed == pytest.approx(7.9468, abs=1e-3)
    assert exponential_moment_relvar(1.2, 1.0, 50) > 1e10


@pytest.mark.xfail(reason="relative variance ~2.6e10: 1e5 plain samples almost never see the dominant tail", strict=False)
def test_exponential_moment_heavy_tail_mc():
    closed = math.exp(-10 + 50 * gamma(1.0, 1.2))
    est = exponential_moment(StreamConfig(R=1.2, T=500, D=10, seed=3), 1.0, 50, 100_000)
    assert abs(est.point - closed) <= 3 * est.std_error


def test_exponential_moment_closed_form_grows_in_t():
    for r in [0.4, 0.8, 1.5]:
        vals = [math.exp(-r * 10 + t * gamma(r, 1.2)) for t in range(0, 100, 5)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_exponential_moment_rejects_small_n():
    with pytest.raises(ValueError):
        exponential_moment(StreamConfig(R=1, T=10), 0.5, 1, 1)


def test_crossing_examples():
    cfg = StreamConfig(R=1, T=1000, seed=1)
    assert boundary_crossing_frequency(cfg, 1000, 1, 10, 2000).point == 0
    est = boundary_crossing_frequency(cfg, 5, 1, 1000, 100_000)
    assert est.point <= boundary_crossing_ub(1, 5, 1) + 3 * est.std_error
    with pytest.raises(ConfigError):
        boundary_crossing_frequency(cfg, 5, 2, 1000, 100)


@pytest.mark.parametrize("R", [1.0, 2.0])
def test_crossing_from_the_start(R):
    cfg = StreamConfig(R=R, T=1000, seed=5)
    est = boundary_crossing_frequency(cfg, 1e-9, R, 1000, 20_000)
    # at least the first arrival crosses when it comes before 1 / (2R)
    assert est.point >= (1 - math.exp(-0.5)) - 3 * est.std_error
    assert est.point <= boundary_crossing_ub(R, 1e-9, R)


def test_write_trace_csv():
    out = simulate_path(StreamConfig(R=1.2, T=10, D=2, seed=1), trace=True)
    buf = io.StringIO()
    write_trace_csv(out, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "event_time,buffer_level"
    assert len(lines) == len(out.trace) + 1
    assert lines[1] == "0.0,2.0"
