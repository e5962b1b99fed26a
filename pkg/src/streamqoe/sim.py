"""Exact event-driven simulation of the receiver buffer.

The buffer holds ``Q(t) = D + A(t) - t`` packets, where ``A`` is a Poisson
process of rate R (useful packets) and playback drains one packet per unit
time. Playback is interrupted at ``tau_e``, the first time Q reaches the
threshold, and the download completes at ``tau_f``, the first time
``Q(t) >= T - t``, i.e. when ``A(t)`` reaches ``ceil(T - D)``.

No time discretisation is involved. Between arrival epochs ``t_k`` and
``t_{k+1}`` the buffer falls linearly from its post-arrival level
``Q(t_k) = D + k - t_k``, so it reaches threshold ``w`` inside that gap iff
the gap exceeds ``Q(t_k) - w``, equivalently iff ``t_{k+1} > D - w + k``;
the interruption instant is then ``D - w + k``. Only arrival epochs need to
be generated.

Randomness: path ``i`` of a run is row ``i % BATCH_SIZE`` of batch
``i // BATCH_SIZE``, and batch ``b`` draws from its own PCG64 stream seeded
by ``SeedSequence(seed, spawn_key=(b,))``. Gaps are drawn in fixed
``(BATCH_SIZE, CHUNK)`` blocks of standard exponentials scaled by ``1/R``,
so the gap sequence of a given path does not depend on D, T, the threshold
or the number of workers. Runs that differ only in those parameters are
therefore driven by common random numbers and are pathwise coupled.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, TextIO

import numpy as np

from .stats import EstimateWithCI, combine_moments, mean_estimate, proportion_estimate

BATCH_SIZE = 2048
CHUNK = 64


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StreamConfig:
    """Model parameters.

    ``W`` is the block size. By default an extra block is assumed to be
    buffered on top of D, so interruption means Q reaches 0; with
    ``raw_threshold`` the interruption level is W itself.
    ``completion="floor"`` is a sensitivity mode that counts a fractional
    remaining packet as already delivered.
    """

    R: float
    T: float
    D: float = 0.0
    W: int = 0
    seed: int = 0
    raw_threshold: bool = False
    completion: str = "ceil"

    def __post_init__(self) -> None:
        if not self.R > 0:
            raise ConfigError(f"R must be positive, got {self.R}")
        if not self.T > 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if not 0 <= self.D <= self.T:
            raise ConfigError(f"need 0 <= D <= T, got D={self.D}, T={self.T}")
        if self.W < 0 or int(self.W) != self.W:
            raise ConfigError(f"W must be a nonnegative integer, got {self.W}")
        if self.completion not in ("ceil", "floor"):
            raise ConfigError(f"completion must be 'ceil' or 'floor', got {self.completion!r}")

    @property
    def threshold(self) -> float:
        return float(self.W) if self.raw_threshold else 0.0

    @property
    def arrivals_to_complete(self) -> int:
        rem = self.T - self.D
        return max(0, math.ceil(rem) if self.completion == "ceil" else math.floor(rem))

    def with_D(self, D: float) -> "StreamConfig":
        return replace(self, D=D)


@dataclass
class PathOutcome:
    interrupted: bool
    stop_time: float
    arrivals_seen: int
    trace: list[tuple[float, float]] | None = None


@dataclass
class PathBatch:
    """Outcomes of many paths as parallel arrays."""

    interrupted: np.ndarray
    stop_time: np.ndarray
    arrivals_seen: np.ndarray

    def __len__(self) -> int:
        return len(self.interrupted)

    def outcome(self, i: int) -> PathOutcome:
        return PathOutcome(bool(self.interrupted[i]), float(self.stop_time[i]), int(self.arrivals_seen[i]))


def batch_generator(seed: int, b: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(b,))))


def _batch_sizes(n: int) -> list[int]:
    full, rest = divmod(n, BATCH_SIZE)
    return [BATCH_SIZE] * full + ([rest] if rest else [])


def _gap_block(gen: np.random.Generator, rows: int, R: float) -> np.ndarray:
    # always draw full blocks so every row sees the same numbers whatever `rows` is used
    gaps = gen.standard_exponential((BATCH_SIZE, CHUNK))[:rows]
    gaps /= R
    return gaps


def _run_rows(gen, rows: int, R: float, level: float, K: int, keep_times: bool = False):
    """Simulate ``rows`` paths; ``level = D - threshold``, ``K`` arrivals complete."""
    interrupted = np.zeros(rows, dtype=bool)
    stop = np.zeros(rows)
    seen = np.zeros(rows, dtype=np.int64)
    kept: list[np.ndarray] = []
    if K == 0:
        return interrupted, stop, seen, kept
    if level <= 0:
        interrupted[:] = True
        return interrupted, stop, seen, kept

    t_prev = np.zeros(rows)
    active = np.ones(rows, dtype=bool)
    base = 0
    while base < K and active.any():
        times = np.cumsum(_gap_block(gen, rows, R), axis=1)
        times += t_prev[:, None]
        m = min(CHUNK, K - base)
        a = base + np.arange(1, m + 1)
        late = times[:, :m] > level + (a - 1)
        first = late.argmax(axis=1)
        hit = active & late[np.arange(rows), first]
        interrupted[hit] = True
        stop[hit] = level + base + first[hit]
        seen[hit] = base + first[hit]
        active &= ~hit
        if keep_times:
            kept.append(times[:, :m].copy())
        if base + m == K:
            stop[active] = times[active, m - 1]
            seen[active] = K
            active[:] = False
        t_prev = times[:, -1]
        base += CHUNK
    return interrupted, stop, seen, kept


def _batch_task(args) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    seed, b, rows, R, level, K = args
    inter, stop, seen, _ = _run_rows(batch_generator(seed, b), rows, R, level, K)
    return inter, stop, seen


def _map(fn: Callable, tasks: list, workers: int) -> Iterable:
    if workers <= 1 or len(tasks) <= 1:
        return map(fn, tasks)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def simulate_paths(cfg: StreamConfig, n: int, workers: int = 1) -> PathBatch:
    """Simulate ``n`` independent paths seeded from ``cfg.seed``."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    level = cfg.D - cfg.threshold
    K = cfg.arrivals_to_complete
    tasks = [(cfg.seed, b, rows, cfg.R, level, K) for b, rows in enumerate(_batch_sizes(n))]
    parts = list(_map(_batch_task, tasks, workers))
    return PathBatch(
        interrupted=np.concatenate([p[0] for p in parts]),
        stop_time=np.concatenate([p[1] for p in parts]),
        arrivals_seen=np.concatenate([p[2] for p in parts]),
    )


def _count_task(args) -> int:
    return int(_batch_task(args)[0].sum())


def count_interruptions(cfg: StreamConfig, n: int, workers: int = 1) -> int:
    level = cfg.D - cfg.threshold
    K = cfg.arrivals_to_complete
    tasks = [(cfg.seed, b, rows, cfg.R, level, K) for b, rows in enumerate(_batch_sizes(n))]
    return sum(_map(_count_task, tasks, workers))


def simulate_path(cfg: StreamConfig, rng: np.random.Generator | None = None, trace: bool = False) -> PathOutcome:
    """Simulate one path, optionally recording its (event_time, buffer_level) trace.

    The trace starts at ``(0, D)``, has one post-jump point per arrival and
    ends at the stopping event.
    """
    gen = rng if rng is not None else batch_generator(cfg.seed, 0)
    level = cfg.D - cfg.threshold
    K = cfg.arrivals_to_complete
    inter, stop, seen, kept = _run_rows(gen, 1, cfg.R, level, K, keep_times=trace)
    out = PathOutcome(bool(inter[0]), float(stop[0]), int(seen[0]))
    if trace:
        times = np.concatenate([k[0] for k in kept]) if kept else np.zeros(0)
        times = times[: out.arrivals_seen]
        pts = [(0.0, float(cfg.D))]
        pts += [(float(t), float(cfg.D + i + 1 - t)) for i, t in enumerate(times)]
        if out.interrupted:
            pts.append((out.stop_time, float(cfg.D + out.arrivals_seen - out.stop_time)))
        out.trace = pts
    return out


def write_trace_csv(outcome: PathOutcome, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["event_time", "buffer_level"])
    for t, q in outcome.trace or []:
        w.writerow([repr(t), repr(q)])


def _arrival_counts(gen, rows: int, R: float, t: float) -> np.ndarray:
    """Number of arrivals in [0, t] for each row."""
    counts = np.zeros(rows, dtype=np.int64)
    t_prev = np.zeros(rows)
    while (t_prev <= t).any():
        times = np.cumsum(_gap_block(gen, rows, R), axis=1)
        times += t_prev[:, None]
        counts += (times <= t).sum(axis=1)
        t_prev = times[:, -1]
    return counts


def _moment_task(args) -> tuple[int, float, float]:
    seed, b, rows, R, D, r, t = args
    A = _arrival_counts(batch_generator(seed, b), rows, R, t)
    x = np.exp(-r * (D + A - t))
    mean = float(x.mean())
    return rows, mean, float(((x - mean) ** 2).sum())


def exponential_moment(
    cfg: StreamConfig, r: float, t: float, n: int, confidence: float = 0.99, workers: int = 1
) -> EstimateWithCI:
    """Monte-Carlo estimate of ``E[exp(-r Q(t))]`` at a fixed time, no stopping.

    Should agree with ``exp(-r D + t gamma(r))``. The estimator is heavy
    tailed when ``t R (1 - exp(-r))^2`` is large (its relative variance is
    ``exp(t R (1 - exp(-r))^2) - 1``), in which case plain sampling
    underestimates the mean.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if r < 0 or t < 0:
        raise ValueError(f"need r >= 0 and t >= 0, got r={r}, t={t}")
    tasks = [(cfg.seed, b, rows, cfg.R, cfg.D, r, t) for b, rows in enumerate(_batch_sizes(n))]
    n_tot, mean, m2 = combine_moments(_map(_moment_task, tasks, workers))
    return mean_estimate(mean, m2, n_tot, confidence)


def exponential_moment_relvar(R: float, r: float, t: float) -> float:
    """Relative variance of a single ``exp(-r Q(t))`` sample."""
    return math.expm1(t * R * (-math.expm1(-r)) ** 2)


def _crossing_task(args) -> int:
    seed, b, rows, R, delta, s, horizon = args
    gen = batch_generator(seed, b)
    crossed = np.zeros(rows, dtype=bool)
    t_prev = np.zeros(rows)
    base = 0
    while True:
        live = ~crossed & (t_prev <= horizon)
        if not live.any():
            break
        times = np.cumsum(_gap_block(gen, rows, R), axis=1)
        times += t_prev[:, None]
        a = base + np.arange(1, CHUNK + 1)
        # the boundary grows continuously and Q only jumps up at arrivals,
        # so a first crossing can only happen at an arrival epoch
        cross = (times <= horizon) & (a >= delta + (R + s) * times)
        crossed |= cross.any(axis=1)
        t_prev = times[:, -1]
        base += CHUNK
    return int(crossed.sum())


def boundary_crossing_frequency(
    cfg: StreamConfig,
    delta: float,
    s: float,
    horizon: float,
    n: int,
    confidence: float = 0.99,
    workers: int = 1,
) -> EstimateWithCI:
    """Frequency of ``Q(t) >= D + delta + (R + s - 1) t`` for some t in [0, horizon].

    ``Q(t)`` minus the boundary equals ``A(t) - delta - (R + s) t``, so D
    drops out.
    """
    if s > cfg.R:
        raise ConfigError(f"s={s} > R={cfg.R}")
    if not (delta > 0 and s > 0 and horizon > 0):
        raise ConfigError("delta, s and horizon must be positive")
    tasks = [(cfg.seed, b, rows, cfg.R, delta, s, horizon) for b, rows in enumerate(_batch_sizes(n))]
    k = sum(_map(_crossing_task, tasks, workers))
    return proportion_estimate(k, n, confidence)
