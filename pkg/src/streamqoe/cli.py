"""Command-line front end.

Every output starts with the run's full parameter set: CSV output gets a
``# run: {...}`` comment line, JSON output a ``"run"`` member. Its ``argv``
entry reproduces the output byte for byte when passed back to the CLI.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import DomainError, gamma, r_bar
from .bounds import DEFAULT_ALPHA0, BoundQuery, bound_report
from .estimator import CSV_COLUMNS, DEFAULT_CONFIDENCE, DEFAULT_N, find_d_star, sweep
from .rlnc import estimate_delta
from .sim import ConfigError, StreamConfig, exponential_moment, simulate_path, simulate_paths

OUT_DIR_ENV = "STREAMQOE_OUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="streamqoe", description="Startup-buffer bounds and simulation for coded media streaming.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(sp, *, eps=False, stream=False, mc=False):
        if eps:
            sp.add_argument("--eps", type=float, default=0.01, help="target interruption probability")
        if stream:
            sp.add_argument("--R", type=float, default=1.2, help="useful-packet arrival rate")
            sp.add_argument("--T", type=float, default=500.0, help="file size in packets")
            sp.add_argument("--W", type=int, default=0, help="block size")
            sp.add_argument("--threshold", action="store_true", help="interrupt when the buffer falls to W")
        if mc:
            sp.add_argument("--n", type=int, default=DEFAULT_N, help="Monte-Carlo samples")
            sp.add_argument("--confidence", type=float, default=DEFAULT_CONFIDENCE)
            sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help=f"output file; relative paths resolve against ${OUT_DIR_ENV} if set")
        sp.add_argument("--format", choices=["csv", "json"], default="csv")

    sp = sub.add_parser("bounds", help="analytic bounds on D*(eps)")
    common(sp, eps=True, stream=True)
    sp.add_argument("--alpha0", type=float, default=DEFAULT_ALPHA0)

    sp = sub.add_parser("simulate", help="simulate sample paths")
    common(sp, stream=True)
    sp.add_argument("--D", type=float, default=10.0, help="initial buffer in packets")
    sp.add_argument("--n", type=int, default=1, help="number of paths")
    sp.add_argument("--trace", action="store_true", help="emit the (event_time, buffer_level) trace of one path")

    sp = sub.add_parser("dstar", help="Monte-Carlo minimum startup buffer")
    common(sp, eps=True, stream=True, mc=True)
    sp.add_argument("--scan", action="store_true", help="linear upward scan instead of binary search")
    sp.add_argument("--alpha0", type=float, default=DEFAULT_ALPHA0)

    sp = sub.add_parser("curve", help="sweep D* over epsilon or R")
    common(sp, eps=True, stream=True, mc=True)
    sp.add_argument("--sweep", choices=["epsilon", "rate"], required=True)
    sp.add_argument("--grid", type=_floats, required=True, help="comma-separated sweep values")
    sp.add_argument("--scan", action="store_true")
    sp.add_argument("--alpha0", type=float, default=DEFAULT_ALPHA0)

    sp = sub.add_parser("rlnc-demo", help="redundant-packet fraction of random linear coding")
    sp.add_argument("--q", type=int, default=256, choices=[2, 16, 256])
    sp.add_argument("--W", type=int, default=32)
    sp.add_argument("--n", type=int, default=10_000, help="number of block fills")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.add_argument("--format", choices=["json"], default="json")

    sp = sub.add_parser("martingale-check", help="compare E[exp(-rQ(t))] with its closed form")
    common(sp, stream=True, mc=True)
    sp.add_argument("--D", type=float, default=10.0)
    sp.add_argument("--r", type=_floats, default=None, help="comma-separated tilts (default: r_bar and r_bar+0.1)")
    sp.add_argument("--t", type=_floats, default=[1.0, 5.0, 10.0], help="comma-separated times")
    return p


def _stream(args, D: float = 0.0) -> StreamConfig:
    return StreamConfig(
        R=args.R, T=args.T, D=D, W=args.W, seed=args.seed, raw_threshold=args.threshold
    )


def _meta(args, argv: list[str]) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}
    return {"program": "streamqoe", "version": __version__, "argv": argv, "params": params}


def _emit_csv(meta: dict, header: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write("# run: " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row.get(k, "")) for k in header})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return v


def _emit_json(meta: dict, key: str, payload) -> str:
    return json.dumps({"run": meta, key: payload}, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serialisable: {type(o)}")


def _check_eps(eps: float) -> None:
    if not 0 < eps < 1:
        raise UsageError(f"--eps must lie in (0, 1), got {eps}")


def cmd_bounds(args, meta) -> str:
    _check_eps(args.eps)
    rep = bound_report(BoundQuery(args.eps, args.T, args.R), args.alpha0)
    row = {"eps": args.eps, "R": args.R, "T": args.T, **rep.as_dict()}
    row["validity_notes"] = "; ".join(rep.validity_notes)
    if args.format == "json":
        return _emit_json(meta, "bounds", row)
    return _emit_csv(meta, list(row), [row])


def cmd_simulate(args, meta) -> str:
    if args.D > args.T or args.D < 0:
        raise UsageError(f"need 0 <= D <= T, got D={args.D}, T={args.T}")
    cfg = _stream(args, args.D)
    if args.trace:
        out = simulate_path(cfg, trace=True)
        rows = [{"event_time": t, "buffer_level": q} for t, q in out.trace]
        if args.format == "json":
            return _emit_json(meta, "path", {**out.__dict__})
        return _emit_csv(meta, ["event_time", "buffer_level"], rows)
    batch = simulate_paths(cfg, args.n)
    rows = [{"path": i, **batch.outcome(i).__dict__} for i in range(len(batch))]
    for r in rows:
        r.pop("trace")
    if args.format == "json":
        return _emit_json(meta, "paths", rows)
    return _emit_csv(meta, ["path", "interrupted", "stop_time", "arrivals_seen"], rows)


def _dstar_row(res, rep) -> dict:
    flags = list(res.flags) + (["low-confidence"] if res.low_confidence else [])
    below = res.p_at_d_minus_1
    return {
        "d_star": res.d_star,
        "d_lower": rep.lower_int,
        "d_upper": rep.upper_int,
        "p_hat": res.p_at_d.point,
        "ci_half_width": res.p_at_d.half_width,
        "n": res.p_at_d.n,
        "flags": "; ".join(flags),
        "d_lower_raw": rep.lower,
        "d_upper_raw": rep.upper,
        "lower_valid": rep.lower_valid,
        "p_hat_d_minus_1": below.point if below else None,
        "ci_half_width_d_minus_1": below.half_width if below else None,
        "bracket_lo": res.bracket_used[0],
        "bracket_hi": res.bracket_used[1],
    }


def cmd_dstar(args, meta) -> str:
    _check_eps(args.eps)
    cfg = _stream(args)
    res = find_d_star(args.eps, cfg, args.n, args.confidence, scan=args.scan, alpha0=args.alpha0, workers=args.workers)
    rep = bound_report(BoundQuery(args.eps, args.T, args.R), args.alpha0)
    row = _dstar_row(res, rep)
    if args.format == "json":
        return _emit_json(meta, "dstar", row)
    return _emit_csv(meta, list(row), [row])


def cmd_curve(args, meta) -> str:
    if args.sweep == "epsilon":
        for e in args.grid:
            _check_eps(e)
    else:
        _check_eps(args.eps)
        if any(r <= 0 for r in args.grid):
            raise UsageError("rate grid values must be positive")
    if args.grid != sorted(args.grid):
        raise UsageError("--grid must be sorted ascending")
    cfg = _stream(args)
    rows = sweep(
        args.sweep, args.grid, cfg, epsilon=args.eps, n=args.n, confidence=args.confidence,
        scan=args.scan, alpha0=args.alpha0, workers=args.workers,
    )
    if args.format == "json":
        return _emit_json(meta, "rows", rows)
    return _emit_csv(meta, CSV_COLUMNS, rows)


def cmd_rlnc(args, meta) -> str:
    if args.W < 1 or args.n < 1:
        raise UsageError("--W and --n must be positive")
    rep = estimate_delta(args.q, args.W, args.n, np.random.default_rng(args.seed))
    return _emit_json(meta, "delta", rep.as_dict())


def cmd_martingale(args, meta) -> str:
    cfg = _stream(args, args.D)
    rs = args.r
    if rs is None:
        rb = r_bar(args.R).r_bar
        rs = [rb, rb + 0.1]
    rows = []
    for r in rs:
        for t in args.t:
            if r < 0 or t < 0:
                raise UsageError("r and t must be nonnegative")
            g = gamma(r, args.R)
            closed = math.exp(-r * args.D + t * g)
            est = exponential_moment(cfg, r, t, args.n, args.confidence, args.workers)
            z = (est.point - closed) / est.std_error if est.std_error > 0 else (0.0 if est.point == closed else math.inf)
            rows.append({
                "r": r, "t": t, "gamma": g, "closed_form": closed, "mc_mean": est.point,
                "mc_std_error": est.std_error, "z": z, "within_3sigma": abs(z) <= 3,
                "submartingale": g >= 0,
            })
    if args.format == "json":
        return _emit_json(meta, "rows", rows)
    return _emit_csv(meta, list(rows[0]), rows)


COMMANDS = {
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "dstar": cmd_dstar,
    "curve": cmd_curve,
    "rlnc-demo": cmd_rlnc,
    "martingale-check": cmd_martingale,
}


def _resolve_out(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=os.environ.get("STREAMQOE_LOG", "WARNING"))
    try:
        args = build_parser().parse_args(argv)
        # `--out` does not affect the content, so it is left out of the replay argv
        replay = _strip_out(argv)
        text = COMMANDS[args.subcommand](args, _meta(args, replay))
    except (UsageError, DomainError, ConfigError) as exc:
        sys.stderr.write(json.dumps({"error": "usage", "message": str(exc)}) + "\n")
        return 2
    if args.out:
        path = _resolve_out(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _strip_out(argv: list[str]) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        out.append(a)
    return out


if __name__ == "__main__":
    sys.exit(main())
