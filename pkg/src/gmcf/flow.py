"""Explicit time integration of graphical mean curvature flow.

Raw mode evolves df/dt = tr_g D^2 f.  Normalized mode evolves the
rescaled map f~(x~, s) = f(x, t)/k with k = sqrt(2t+1), s = log k, whose
non-parametric form is

    df~/ds = tr_g~ D^2 f~ - f~ + x~ . D f~ .

Boundary nodes are Dirichlet: frozen in raw mode and for exactly conical
data in normalized mode; otherwise they follow the rescaled initial map
e^{-s} f0(e^s x), which is what the untruncated problem would see
there to leading order.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import geometry
from .grid import Grid, GridMap, build_grid, jet
from .initialdata import InitialSpec, build_initial, resolve

MODES = ("raw", "normalized")


class FlowInstability(RuntimeError):
    """Non-finite jet or state; carries the offending node and time."""

    def __init__(self, message, location=None, time=None):
        super().__init__(message)
        self.location = location
        self.time = time
        self.last_good = None


@dataclass
class FlowState:
    map: GridMap
    time: float
    mode: str = "raw"
    step_count: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def grid(self) -> Grid:
        return self.map.grid

    def raw_time(self) -> float:
        """Unscaled time t; equals ``time`` in raw mode, (e^{2s}-1)/2 otherwise."""
        if self.mode == "raw":
            return self.time
        return math.expm1(2.0 * self.time) / 2.0

    def scale(self) -> float:
        """k = sqrt(2t+1) = e^s, the factor between raw and normalized data."""
        return 1.0 if self.mode == "raw" else math.exp(self.time)

    def copy(self) -> "FlowState":
        return FlowState(self.map.copy(), self.time, self.mode, self.step_count)


def resolve_workers(workers=None) -> int:
    """Worker count from the argument or GMCF_THREADS (0 or unset = all cores)."""
    if workers is None:
        workers = int(os.environ.get("GMCF_THREADS", "0") or 0)
    if workers <= 0:
        workers = os.cpu_count() or 1
    return int(workers)


def _node(grid: Grid, flat_index: int):
    idx = np.unravel_index(flat_index, grid.shape)
    return tuple(int(i) for i in idx), tuple(float(grid.coords[i]) for i in idx)


def _check_finite(arr, grid, what, time):
    bad = ~np.isfinite(arr.reshape(grid.shape + (-1,))).all(axis=-1)
    if bad.any():
        idx, x = _node(grid, int(np.flatnonzero(bad.reshape(-1))[0]))
        raise FlowInstability(f"non-finite {what} at node {idx} (x={x}), time {time:g}", idx, time)


def _rate(state: FlowState, workers=None) -> np.ndarray:
    grid = state.grid
    J, H2 = jet(state.map, resolve_workers(workers))
    _check_finite(J, grid, "jet", state.time)
    _check_finite(H2, grid, "jet", state.time)
    rate = _trace_g(J, H2)
    if state.mode == "normalized":
        x = grid.points()
        rate = rate - state.map.values + np.einsum("...i,...ia->...a", x, J)
    rate[grid.boundary_mask()] = 0.0
    _check_finite(rate, grid, "rate", state.time)
    return rate


def _trace_g(J, H2):
    m = J.shape[-2]
    if m == 1:
        return H2[..., 0, 0, :] / (1.0 + np.sum(J[..., 0, :] ** 2, axis=-1))[..., None]
    if m == 2:
        # closed-form 2x2 inverse: g^{-1} = adj(g) / det(g)
        a, b = J[..., 0, :], J[..., 1, :]
        g00 = 1.0 + np.sum(a * a, axis=-1)
        g11 = 1.0 + np.sum(b * b, axis=-1)
        g01 = np.sum(a * b, axis=-1)
        det = g00 * g11 - g01 * g01
        num = g11[..., None] * H2[..., 0, 0, :] - 2.0 * g01[..., None] * H2[..., 0, 1, :]
        num += g00[..., None] * H2[..., 1, 1, :]
        return num / det[..., None]
    return geometry.graph_rate(J, H2)


def mcf_rhs(state: FlowState, workers=None) -> np.ndarray:
    """df/dt = g^{ij} d_i d_j f at interior nodes, zero on the boundary."""
    if state.mode != "raw":
        raise ValueError("mcf_rhs requires a raw-mode state")
    return _rate(state, workers)


def normalized_rhs(state: FlowState, workers=None) -> np.ndarray:
    """df~/ds = g~^{ij} d_i d_j f~ - f~ + x~ . D f~ at interior nodes."""
    if state.mode != "normalized":
        raise ValueError("normalized_rhs requires a normalized-mode state")
    return _rate(state, workers)


def rhs(state: FlowState, workers=None) -> np.ndarray:
    return _rate(state, workers)


def cfl_dt(grid_or_state, cfl_factor: float = 0.5) -> float:
    """cfl_factor * h^2 / (2m); g >= I makes this valid for every state."""
    grid = grid_or_state.grid if isinstance(grid_or_state, FlowState) else grid_or_state
    return cfl_factor * grid.h**2 / (2.0 * grid.m)


BoundaryFn = Callable[[float], np.ndarray]


def step(state: FlowState, dt: float, boundary: BoundaryFn | None = None, workers=None) -> FlowState:
    """One Heun (explicit trapezoidal) step.

    ``boundary(time)`` returns the boundary-node values in the order of
    ``grid.boundary_mask()``; ``None`` keeps them frozen.  A negative dt
    is accepted so the scheme's time symmetry can be probed.
    """
    grid = state.grid
    if dt == 0 or abs(dt) > cfl_dt(grid, 1.0) * (1 + 1e-12):
        raise ValueError(f"|dt| must be in (0, h^2/(2m)]; got {dt:g}")
    u = state.map.values
    k1 = rhs(state, workers)
    stage = np.multiply(k1, dt)
    stage += u
    t1 = state.time + dt
    bmask = grid.boundary_mask() if boundary is not None else None
    if boundary is not None:
        stage[bmask] = boundary(t1)
    _check_finite(stage, grid, "state (instability)", t1)
    k2 = _rate(_bare_state(grid, stage, t1, state.mode), workers)
    out = k1 + k2
    out *= 0.5 * dt
    out += u
    if boundary is not None:
        out[bmask] = boundary(t1)
    _check_finite(out, grid, "state (instability)", t1)
    return _bare_state(grid, out, t1, state.mode, state.step_count + 1)


def _bare_state(grid, values, time, mode, step_count=0):
    # skip GridMap validation on the hot path; finiteness is checked by the caller
    gm = object.__new__(GridMap)
    gm.grid = grid
    gm.values = values
    return FlowState(gm, time, mode, step_count)


@dataclass
class FlowConfig:
    m: int = 2
    n: int = 2
    N: int = 129
    L: float = 8.0
    band: float = 1.0
    initial: InitialSpec = field(default_factory=lambda: InitialSpec("cone2theta", {"beta": 0.2}))
    mode: str = "raw"
    epsilon: float = 0.25
    t_end: float = 1.0
    cfl_factor: float = 0.5
    monitor_dt: float = 0.05
    monitors: list = field(default_factory=list)
    c: float | None = None
    delta: float = 0.5
    out_dir: str | None = None
    snapshot_every: int = 0
    C_tol: float = 10.0
    tol_exp: float = 1e-3
    t0: float = 2.0
    workers: int | None = None

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if not 0 < self.cfl_factor < 1:
            raise ValueError("cfl_factor must lie in (0, 1)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.t_end < 0 or self.monitor_dt <= 0:
            raise ValueError("t_end must be >= 0 and monitor_dt > 0")

    def grid(self) -> Grid:
        return build_grid(self.m, self.N, self.L, self.band)


def boundary_function(config: FlowConfig, grid: Grid) -> BoundaryFn | None:
    """Dirichlet data for the run: None (frozen) or the rescaled initial map."""
    if config.mode == "raw":
        return None
    entry = resolve(config.initial, grid.m)
    if entry.conical:
        return None
    xb = grid.points()[grid.boundary_mask()]

    def values(s):
        k = math.exp(s)
        return entry.evaluate(k * xb) / k

    return values


def initial_state(config: FlowConfig):
    grid = config.grid()
    gmap, cert = build_initial(config.initial, grid, config.epsilon, config.delta)
    if gmap.n != config.n:
        raise ValueError(f"initial entry {config.initial.name} has n={gmap.n}, config has n={config.n}")
    return FlowState(gmap, 0.0, config.mode, 0), cert


def evolve(config: FlowConfig, on_report=None):
    """Run the flow to ``t_end`` (s_end in normalized mode) with monitors.

    Monitors run every ``monitor_dt``; the step size is the CFL step
    shrunk so that it divides each monitor interval exactly.  ``on_report(state,
    report)`` may return True to stop early.  Returns ``(state, series)``.
    """
    from . import invariants, persist

    state, cert = initial_state(config)
    grid = state.grid
    workers = resolve_workers(config.workers)
    boundary = boundary_function(config, grid)
    specs = config.monitors or invariants.default_specs(config)
    series = invariants.MonitorSeries(specs, mode=config.mode)

    out = Path(config.out_dir) if config.out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    dt_max = cfl_dt(grid, config.cfl_factor)
    n_out = max(0, math.ceil(config.t_end / config.monitor_dt - 1e-9))

    report = invariants.monitor_suite(state, None, specs, C_tol=config.C_tol)
    baseline = report
    series.append(report)
    stop = bool(on_report and on_report(state, report))
    last_good = state

    try:
        for k in range(1, n_out + 1):
            if stop:
                break
            target = min(k * config.monitor_dt, config.t_end)
            span = target - state.time
            n_sub = max(1, math.ceil(span / dt_max - 1e-9))
            for _ in range(n_sub):
                state = step(state, span / n_sub, boundary, workers)
            state.time = target  # drop accumulated rounding
            report = invariants.monitor_suite(state, baseline, specs, previous=report, C_tol=config.C_tol)
            series.append(report)
            last_good = state
            if out is not None and config.snapshot_every and k % config.snapshot_every == 0:
                persist.write_snapshot(state, out / f"snapshot_{k:06d}.gmcf")
            if on_report and on_report(state, report):
                stop = True
    except FlowInstability as exc:
        exc.last_good = last_good
        if out is not None:
            persist.write_snapshot(last_good, out / "last_good.gmcf")
            series.write_csv(out / "monitors.csv")
        raise

    state.map = GridMap(grid, state.map.values)
    if out is not None:
        series.write_csv(out / "monitors.csv")
        persist.write_snapshot(state, out / "final.gmcf")
    series.certificate = cert
    return state, series
