"""Command line entry point: ``gmcf <subcommand> --config <path> [--out <dir>]``.

Subcommands: evolve, expander, certify, converge, selftest.  The exit
status is 0 iff every asserted check passed; failures are printed as
JSON lines on stdout.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, echo_config, load_config, parse_config
from .flow import FlowInstability, evolve
from .grid import build_grid, inner_mask
from .initialdata import InitialDataError, build_initial
from .persist import read_snapshot, write_snapshot  # noqa: F401  (re-exported file API)

SUBCOMMANDS = ("evolve", "expander", "certify", "converge", "selftest")


def _emit(obj):
    print(json.dumps(obj, sort_keys=True))


def _failure_lines(series):
    for t, e in series.failures():
        _emit(dict(status="fail", monitor=e.kind, time=t, value=e.value, threshold=e.threshold,
                   margin=e.margin, location=list(e.location)))


def cmd_evolve(cfg: RunConfig) -> int:
    state, series = evolve(cfg.flow_config())
    _failure_lines(series)
    fails = series.failures()
    _emit(dict(status="ok" if not fails else "fail", command="evolve", time=state.time,
               steps=state.step_count, reports=len(series), failures=len(fails)))
    return 0 if not fails else 1


def cmd_expander(cfg: RunConfig) -> int:
    from .expander import solve_expander_flow

    run = solve_expander_flow(cfg.flow_config(mode="normalized"))
    _failure_lines(run.series)
    last = run.reports[-1]
    ok = run.converged and run.endpoint_uniform and not run.series.failures()
    if not run.converged:
        _emit(dict(status="fail", monitor="expander_convergence", s=last.s, residual_sup=last.residual_sup,
                   **{k: v for k, v in run.diagnostics.items()}))
    _emit(dict(status="ok" if ok else "fail", command="expander", s=last.s, residual_sup=last.residual_sup,
               graph_residual_sup=last.graph_residual_sup, endpoint_min_p=run.endpoint_min_p,
               converged=run.converged))
    return 0 if ok else 1


def cmd_certify(cfg: RunConfig) -> int:
    grid = build_grid(cfg.m, cfg.N, cfg.L, cfg.band)
    _, cert = build_initial(cfg.initial_spec(), grid, cfg.epsilon, cfg.delta)
    print(f"min p = {cert.min_p:.6g}")
    _emit(dict(status="ok", command="certify", initial=cfg.initial, min_p=cert.min_p,
               max_lambda=cert.max_lambda, conical_ratio=cert.conical_ratio, delta=cert.delta,
               min_p_at=list(cert.min_p_at), conical_at=list(cert.conical_at)))
    return 0


def convergence_study(cfg: RunConfig, levels=(33, 65, 129)):
    """Final states at successive resolutions compared on the coarsest inner nodes.

    Returns rows ``(N, h, diff_to_next)`` and the observed orders
    log2(d_k / d_{k+1}).
    """
    finals = []
    for N in levels:
        h = 2 * cfg.L / (N - 1)
        c = cfg.flow_config(N=N, band=max(cfg.band, 2 * h), monitors=[], out_dir=None)
        state, _ = evolve(c)
        finals.append(state)
    coarse = finals[0].grid
    mask = inner_mask(build_grid(coarse.m, coarse.N, coarse.L, finals[0].grid.band))
    sampled = []
    for st in finals:
        stride = (st.grid.N - 1) // (coarse.N - 1)
        sl = tuple(slice(None, None, stride) for _ in range(st.grid.m))
        sampled.append(st.map.values[sl][mask])
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(sampled, sampled[1:])]
    rows = [(N, 2 * cfg.L / (N - 1), d) for N, d in zip(levels, diffs + [float("nan")])]
    orders = [math.log2(a / b) if b > 0 else float("inf") for a, b in zip(diffs, diffs[1:])]
    return rows, orders


def cmd_converge(cfg: RunConfig) -> int:
    rows, orders = convergence_study(cfg)
    print("N,h,diff_to_next")
    for N, h, d in rows:
        print(f"{N},{h:.17g},{d:.17g}")
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["N,h,diff_to_next"] + [f"{N},{h:.17g},{d:.17g}" for N, h, d in rows]
        (out / "converge.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    ok = all(o >= 1.9 for o in orders)
    if not ok:
        _emit(dict(status="fail", monitor="observed_order", orders=orders, required=1.9))
    _emit(dict(status="ok" if ok else "fail", command="converge", orders=orders))
    return 0 if ok else 1


def cmd_selftest(cfg: RunConfig) -> int:
    from .acceptance import run_all

    results = run_all(seed=cfg.seed)
    for r in results:
        if not r.passed:
            _emit(dict(status="fail", criterion=r.number, title=r.title, detail=r.detail))
    ok = all(r.passed for r in results)
    _emit(dict(status="ok" if ok else "fail", command="selftest",
               passed=sum(r.passed for r in results), total=len(results)))
    return 0 if ok else 1


COMMANDS = dict(evolve=cmd_evolve, expander=cmd_expander, certify=cmd_certify,
                converge=cmd_converge, selftest=cmd_selftest)


def build_parser():
    ap = argparse.ArgumentParser(prog="gmcf", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="key=value configuration file (defaults if omitted)")
    ap.add_argument("--out", help="output directory (overrides the config's out key)")
    return ap


def run_subcommand(argv) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else parse_config("")
        if args.out:
            cfg.out = args.out
        if cfg.out:
            echo_config(cfg, cfg.out)
        return COMMANDS[args.subcommand](cfg)
    except ConfigError as exc:
        _emit(dict(status="error", kind="config", line=exc.line, message=exc.message))
    except (InitialDataError, ValueError) as exc:
        _emit(dict(status="error", kind="invalid", message=str(exc)))
    except FlowInstability as exc:
        _emit(dict(status="error", kind="instability", message=str(exc), time=exc.time,
                   location=list(exc.location) if exc.location else None))
    except OSError as exc:
        _emit(dict(status="error", kind="io", message=str(exc)))
    return 2


def main(argv=None) -> int:
    return run_subcommand(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
