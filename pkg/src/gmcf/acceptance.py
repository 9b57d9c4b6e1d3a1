"""The eleven acceptance criteria as callable checks.

Each ``criterion_<k>()`` returns a :class:`CriterionResult`.  The heavy
flow runs shared by several criteria are cached per process.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import geometry, oracles
from .expander import self_similarity_check, solve_expander_flow, stationarity_check
from .flow import FlowConfig, FlowState, cfl_dt, evolve, step
from .grid import build_grid
from .initialdata import InitialSpec, build_initial, bump_cutoff
from .invariants import BoundSpec, interior_A_threshold, monitor_suite, ode_bound
from .persist import decode_snapshot, encode_snapshot, read_snapshot, write_snapshot

C_TOL = 10.0


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.title}: {self.detail}"


def _tol(h):
    return C_TOL * h * h


# -- 1 ---------------------------------------------------------------------------

def criterion_1(n_jets=10_000, seed=0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    m, n = 2, 2
    J = rng.normal(scale=0.8, size=(n_jets, m, n))
    H2 = rng.normal(size=(n_jets, m, m, n))
    H2 = 0.5 * (H2 + np.swapaxes(H2, 1, 2))
    S = geometry.sample(J, H2)
    worst = {}

    def track(name, got, want):
        err = float(np.max(np.abs(np.asarray(got) - np.asarray(want))) / max(1.0, float(np.max(np.abs(want)))))
        worst[name] = max(worst.get(name, 0.0), err)

    frame_err = 0.0
    gap_min = math.inf
    for i in range(n_jets):
        o = oracles.frame_geometry(J[i], H2[i])
        track("g", S.g[i], o["g"])
        track("ginv", S.ginv[i], o["ginv"])
        track("lam", S.lam[i], o["lam"])
        track("A", S.A[i], o["A"])
        track("H", S.Hvec[i], o["H"])
        track("normA2", S.normA2[i], o["normA2"])
        track("normRperp2", S.normRperp2[i], o["normRperp2"])
        track("normAdotA2", S.normAdotA2[i], o["normAdotA2"])
        fr = geometry.svd_frames(J[i])
        frame_err = max(frame_err, abs(fr.S11**2 + fr.T11**2 - 1), abs(fr.S22**2 + fr.T22**2 - 1))
        gap_min = min(gap_min, float(S.lili_gap[i]) / max(1.0, float(S.normA2[i]) ** 2))
    ok = max(worst.values()) <= 1e-10 and frame_err <= 1e-12 and gap_min >= -1e-10
    detail = (f"max rel err {max(worst.values()):.2e} (<=1e-10), |S^2+T^2-1| {frame_err:.2e} (<=1e-12), "
              f"min Li-Li gap/|A|^4 {gap_min:.2e} (>=-1e-10) over {n_jets} jets")
    return CriterionResult(1, "geometry kernel vs brute-force oracle", ok, detail,
                           dict(worst=worst, frame_err=frame_err, gap_min=gap_min))


# -- 2 ---------------------------------------------------------------------------

def heat_limit_error(N, a=1e-3, T=0.5, R=4.0, L=8.0):
    """Relative sup error of the raw flow of bump(a, (1,1)) against the heat solution."""
    h = 2 * L / (N - 1)
    grid = build_grid(2, N, L, max(1.0, 2 * h))
    gmap, _ = build_initial(InitialSpec("bump", {"a": a, "k": (1.0, 1.0), "R": R}), grid)
    state = FlowState(gmap, 0.0)
    steps = math.ceil(T / cfl_dt(grid))
    for _ in range(steps):
        state = step(state, T / steps)
    x = grid.coords

    def s(y):
        return np.sin(y) * bump_cutoff(y / R)

    def c(y):
        return np.cos(y) * bump_cutoff(y / R)

    # sin(x1 + x2) c(x1) c(x2) splits into products of one-dimensional profiles
    Sx, Cx = oracles.heat_solution_1d(s, x, T, R), oracles.heat_solution_1d(c, x, T, R)
    exact = a * (Sx[:, None] * Cx[None, :] + Cx[:, None] * Sx[None, :])
    return float(np.max(np.abs(state.map.values[..., 0] - exact)) / np.max(np.abs(exact)))


def criterion_2() -> CriterionResult:
    a = 1e-3
    e65, e129 = heat_limit_error(65, a), heat_limit_error(129, a)
    order = math.log2(e65 / e129)
    bound = 1e-4 + a * a
    ok = e129 <= bound and order >= 1.9
    return CriterionResult(2, "heat-limit convergence", ok,
                           f"rel err N=129 {e129:.2e} (<= {bound:.2e}), observed order {order:.2f} (>=1.9)",
                           dict(e65=e65, e129=e129, order=order))


# -- 3, 4, 5, 9 -------------------------------------------------------------------------

@lru_cache(maxsize=None)
def cone_raw_run():
    eps = 0.25
    specs = [BoundSpec(k, {"epsilon": eps}) for k in ("p_min", "mean_ratio", "interior_H", "interior_A", "lili")]
    specs.append(BoundSpec("gaussian", {"t0": 2.0}))
    cfg = FlowConfig(initial=InitialSpec("cone2theta", {"beta": 0.2}), mode="raw", epsilon=eps,
                     t_end=1.0, monitor_dt=0.05, monitors=specs)
    return evolve(cfg)


def criterion_3() -> CriterionResult:
    state, series = cone_raw_run()
    tol = _tol(state.grid.h)
    v = series.values("p_min")
    ok = bool(np.min(v) >= v[0] - tol)
    return CriterionResult(3, "p preservation", ok,
                           f"initial inner-min p {v[0]:.6f}, lowest {np.min(v):.6f}, tol {tol:.4f}",
                           dict(series=v))


def criterion_4() -> CriterionResult:
    state, series = cone_raw_run()
    tol = _tol(state.grid.h)
    v = series.values("mean_ratio")
    ok = bool(np.all(v <= v[0] + tol))
    return CriterionResult(4, "mean-ratio monotone bound", ok,
                           f"initial sup |H|^2/p {v[0]:.6f}, largest {np.max(v):.6f}, tol {tol:.4f}",
                           dict(series=v))


def criterion_5() -> CriterionResult:
    state, series = cone_raw_run()
    tol = _tol(state.grid.h)
    eps, m = 0.25, 2
    vh = series.values("interior_H")
    va = series.values("interior_A")
    thr_a = interior_A_threshold(eps)
    ok = bool(np.all(vh <= m / eps + tol) and np.all(va <= thr_a + tol) and abs(thr_a - 8.0) < 1e-12)
    return CriterionResult(5, "interior estimates", ok,
                           f"sup (2t|H|^2+m)/p {np.max(vh):.4f} (<= {m / eps:g}+tol), "
                           f"sup t|A|^2 {np.max(va):.4f} (<= {thr_a:g}+tol)",
                           dict(interior_H=vh, interior_A=va))


def criterion_9() -> CriterionResult:
    state, series = cone_raw_run()
    tol = _tol(state.grid.h)
    vals = series.values("gaussian")
    tails = np.array([r.carry["gauss"][1] for r in series.reports])
    excess = vals[1:] - (vals[:-1] + tails[:-1] + tol)
    ok = bool(np.all(excess <= 0))
    inc = float(np.max(np.diff(vals)))
    return CriterionResult(9, "Gaussian density monotonicity", ok,
                           f"largest step increase {inc:.2e}, tail bound <= {np.max(tails):.2e}, tol {tol:.4f}",
                           dict(series=vals, tails=tails))


# -- 6 ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def cone_expander_run():
    cfg = FlowConfig(initial=InitialSpec("cone2theta", {"beta": 0.2}), mode="normalized",
                     t_end=6.0, monitor_dt=0.1, epsilon=0.25)
    return solve_expander_flow(cfg)


def criterion_6() -> CriterionResult:
    run = cone_expander_run()
    tol = _tol(run.state.grid.h)
    last = run.reports[-1]
    later = [r.residual_sup for r in run.reports if r.s >= 1.0]
    monotone = all(b <= a for a, b in zip(later, later[1:]))
    change, allowed = stationarity_check(run.state, 1e-3)
    selfsim = self_similarity_check(run.state, t_short=0.05)
    ok = (last.residual_sup < 1e-3 and last.s <= 6.0 + 1e-9 and monotone
          and run.endpoint_min_p >= 0.25 - tol and change <= allowed and selfsim <= 5e-3)
    return CriterionResult(6, "expander convergence", ok,
                           f"residual {last.residual_sup:.2e} at s={last.s:.2f}, monotone for s>=1: {monotone}, "
                           f"endpoint min p {run.endpoint_min_p:.4f}, step change {change:.2e} (<= {allowed:.2e}), "
                           f"self-similarity {selfsim:.2e} (<= 5e-3)",
                           dict(residuals=[r.residual_sup for r in run.reports]))


# -- 7 ---------------------------------------------------------------------------

def sinlog_conical_value(L, N=129, delta=0.5):
    h = 2 * L / (N - 1)
    grid = build_grid(2, N, L, max(1.0, 2 * h))
    gmap, _ = build_initial(InitialSpec("sinlog"), grid)
    rep = monitor_suite(FlowState(gmap, 0.0), None, [BoundSpec("conical", {"delta": delta})])
    return rep.entries["conical"].value


@lru_cache(maxsize=None)
def sinlog_normalized_run(s_end=4.0):
    cfg = FlowConfig(initial=InitialSpec("sinlog"), mode="normalized", t_end=s_end, monitor_dt=0.1)
    return solve_expander_flow(cfg)


def criterion_7() -> CriterionResult:
    v1 = sinlog_conical_value(math.exp(math.pi))
    v2 = sinlog_conical_value(math.exp(2 * math.pi))
    run = sinlog_normalized_run()
    growth = v2 / v1
    nonconv = (not run.converged) and not run.diagnostics["monotone_after_1"]
    ok = growth >= 2.0 and nonconv
    return CriterionResult(7, "sinlog counterexample", ok,
                           f"conical value {v1:.3g} -> {v2:.3g} (factor {growth:.1f} >= 2); normalized run "
                           f"converged={run.converged}, decay rate {run.diagnostics['decay_rate']:.3f}",
                           dict(growth=growth, diagnostics=run.diagnostics))


# -- 8 ---------------------------------------------------------------------------

def criterion_8() -> CriterionResult:
    cfg = FlowConfig(initial=InitialSpec("shear", {"a": 0.5}), mode="raw", t_end=0.5, monitor_dt=0.05,
                     monitors=[BoundSpec("splitting_p0")])
    state, series = evolve(cfg)
    tol = _tol(state.grid.h)
    v = series.values("splitting_p0")
    ok = bool(np.all(v <= tol))
    return CriterionResult(8, "splitting regime p = 0", ok, f"max |p| {np.max(v):.2e} (<= {tol:.4f})",
                           dict(series=v))


# -- 10 ---------------------------------------------------------------------------

def criterion_10() -> CriterionResult:
    beta, u0 = 1.0, 1.0
    lin = ode_bound(lambda k: beta * k, u0, 1.0, 1e-3)
    e1 = float(np.max(np.abs(lin.k / (u0 * np.exp(beta * lin.t)) - 1)))
    log = ode_bound(lambda k: k * (1 - k), 0.1, 1.0, 1e-3)
    ref = oracles.logistic(log.t, 0.1)
    e2 = float(np.max(np.abs(log.k / ref - 1)))
    ok = e1 <= 1e-8 and e2 <= 1e-8 and not lin.blown_up and not log.blown_up
    return CriterionResult(10, "ODE comparator", ok, f"exponential rel err {e1:.1e}, logistic rel err {e2:.1e}",
                           dict(e_exp=e1, e_logistic=e2))


# -- 11 ---------------------------------------------------------------------------

def _csv_with_threads(threads, out_dir):
    old = os.environ.get("GMCF_THREADS")
    os.environ["GMCF_THREADS"] = str(threads)
    try:
        cfg = FlowConfig(N=65, t_end=0.2, monitor_dt=0.05, out_dir=str(out_dir),
                         initial=InitialSpec("cone2theta", {"beta": 0.2}))
        state, _ = evolve(cfg)
    finally:
        if old is None:
            del os.environ["GMCF_THREADS"]
        else:
            os.environ["GMCF_THREADS"] = old
    return (Path(out_dir) / "monitors.csv").read_bytes(), (Path(out_dir) / "final.gmcf").read_bytes(), state


def criterion_11() -> CriterionResult:
    with tempfile.TemporaryDirectory() as tmp:
        csv1, snap1, state = _csv_with_threads(1, Path(tmp) / "t1")
        csv8, snap8, _ = _csv_with_threads(8, Path(tmp) / "t8")
        path = Path(tmp) / "roundtrip.gmcf"
        write_snapshot(state, path)
        back = read_snapshot(path)
        raw = path.read_bytes()
    same_state = (back.map.values.tobytes() == state.map.values.tobytes() and back.time == state.time
                  and back.step_count == state.step_count and back.mode == state.mode
                  and back.grid == state.grid)
    same_bytes = encode_snapshot(decode_snapshot(raw)) == raw
    ok = same_state and same_bytes and csv1 == csv8 and snap1 == snap8
    return CriterionResult(11, "persistence and determinism", ok,
                           f"roundtrip identical: {same_state and same_bytes}; CSV threads 1 vs 8 identical: "
                           f"{csv1 == csv8}; snapshots identical: {snap1 == snap8}")


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def run_all(numbers=None, seed=0, echo=print):
    results = []
    for k in numbers or sorted(CRITERIA):
        res = CRITERIA[k](seed=seed) if k == 1 else CRITERIA[k]()
        if echo:
            echo(res.line())
        results.append(res)
    return results
