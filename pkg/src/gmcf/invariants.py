"""Runtime monitors for the quantitative bounds along the flow.

Every monitor is a reduction over inner-region nodes.  Each entry of a
:class:`MonitorReport` stores the observed value, its threshold and a
margin oriented so that positive means "inside the bound"; an entry
passes when ``margin >= -tol`` with ``tol = C_tol * h^2``.

In normalized mode all quantities are converted back to the raw flow
before comparison (x = k x~, f = k f~, |A|^2 = |A~|^2 / k^2, ...), since
the bounds are stated for the unscaled flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import chi2

from . import geometry
from .grid import diff1, inner_mask, jet

KINDS = (
    "p_min", "mean_ratio", "interior_H", "interior_A", "decay_a", "decay_b", "decay_c",
    "growth_poly", "conical", "gaussian", "lili", "splitting_p0", "evol_consistency",
    "interior_dA",
)
RAW_ONLY = ("gaussian", "evol_consistency")
UPPER = {"mean_ratio", "interior_H", "interior_A", "growth_poly", "conical", "gaussian",
         "splitting_p0", "evol_consistency", "interior_dA"}


@dataclass
class BoundSpec:
    """A monitor kind with its parameters.

    Recognised params: ``epsilon``; ``sigma`` (decay_a, decay_c); ``k``
    (decay_b); ``coeffs`` (growth_poly, a_0 > 0 and a_l >= 0); ``delta``
    and optional fixed ``c`` (conical); ``y0`` and ``t0`` (gaussian);
    ``dt_probe`` (evol_consistency).
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown monitor kind {self.kind!r}")
        p = self.params
        eps = p.get("epsilon", 0.25)
        if not 0 < eps <= 1:
            raise ValueError(f"{self.kind}: epsilon must lie in (0, 1]")
        if self.kind in ("decay_a", "decay_c") and not p.get("sigma", 1.0) > 0:
            raise ValueError(f"{self.kind}: sigma must be positive")
        if self.kind == "decay_b" and not p.get("k", 1.0) > 0:
            raise ValueError("decay_b: k must be positive")
        if self.kind == "growth_poly":
            a = np.asarray(p.get("coeffs", (1.0, 1.0)), dtype=float)
            if a.size == 0 or a[0] <= 0 or np.any(a < 0):
                raise ValueError("growth_poly: coefficients must be >= 0 with a_0 > 0")
        if self.kind == "conical":
            if not 0 < p.get("delta", 0.5) <= 1:
                raise ValueError("conical: delta must lie in (0, 1]")
            if p.get("c") is not None and not p["c"] > 0:
                raise ValueError("conical: c must be positive")
        if self.kind == "gaussian" and not p.get("t0", 2.0) > 0:
            raise ValueError("gaussian: t0 must be positive")


@dataclass
class MonitorEntry:
    kind: str
    value: float
    threshold: float
    margin: float
    passed: bool
    asserted: bool = True
    location: tuple = ()
    note: str = ""


@dataclass
class MonitorReport:
    time: float
    raw_time: float
    mode: str
    step_count: int
    tol: float
    entries: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    carry: dict = field(default_factory=dict)

    def failures(self):
        return [e for e in self.entries.values() if e.asserted and not e.passed]

    @property
    def passed(self) -> bool:
        return not self.failures()


class MonitorSeries:
    """Ordered list of reports with CSV export."""

    def __init__(self, specs, mode="raw"):
        order = {k: i for i, k in enumerate(KINDS)}
        self.kinds = sorted({s.kind for s in specs}, key=order.get)
        self.mode = mode
        self.reports: list[MonitorReport] = []
        self.certificate = None

    def append(self, report: MonitorReport):
        self.reports.append(report)

    def __len__(self):
        return len(self.reports)

    def __getitem__(self, i):
        return self.reports[i]

    def values(self, kind):
        return np.array([r.entries[kind].value for r in self.reports])

    def times(self):
        return np.array([r.time for r in self.reports])

    def failures(self):
        return [(r.time, e) for r in self.reports for e in r.failures()]

    def header(self):
        cols = ["t" if self.mode == "raw" else "s"]
        for k in self.kinds:
            cols += [f"{k}_value", f"{k}_threshold", f"{k}_pass"]
        extra = self.reports[0].extra if self.reports else {}
        return cols + list(extra)

    def rows(self):
        for r in self.reports:
            row = [_fmt(r.time)]
            for k in self.kinds:
                e = r.entries[k]
                row += [_fmt(e.value), _fmt(e.threshold), "1" if e.passed else "0"]
            row += [_fmt(v) for v in r.extra.values()]
            yield row

    def to_csv(self) -> str:
        lines = [",".join(self.header())]
        lines += [",".join(row) for row in self.rows()]
        return "\n".join(lines) + "\n"

    def write_csv(self, path):
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def _fmt(x) -> str:
    return "%.17g" % float(x)


# -- geometry on the inner region ----------------------------------------------

@dataclass
class InnerGeometry:
    sample: geometry.GeometrySample
    x: np.ndarray        # raw-scale domain points
    f: np.ndarray        # raw-scale values
    grid_x: np.ndarray   # grid coordinates (normalized in normalized mode)
    t: float             # raw time
    kappa: float
    J: np.ndarray


def inner_geometry(state, workers=1) -> InnerGeometry:
    grid = state.grid
    mask = inner_mask(grid)
    J, H2 = jet(state.map, workers)
    J, H2 = J[mask], H2[mask]
    k = state.scale()
    t = state.raw_time()
    if not math.isfinite(t):
        raise ValueError(f"raw time not representable at s = {state.time:g}")
    pts = grid.points()[mask]
    return InnerGeometry(
        sample=geometry.sample(J, H2),
        x=k * pts,
        f=k * state.map.values[mask],
        grid_x=pts,
        t=t,
        kappa=k,
        J=J,
    )


def _argext(values, lower):
    return int(np.argmin(values) if lower else np.argmax(values))


def _entry(kind, values, threshold, tol, geo, asserted=True, note="", reduce=None):
    lower = kind not in UPPER
    values = np.asarray(values, dtype=float)
    if reduce is not None:
        value, idx = reduce
    elif values.size:
        idx = _argext(values, lower)
        value = float(values[idx])
    else:
        value, idx = float("nan"), None
    margin = (value - threshold) if lower else (threshold - value)
    passed = bool(np.isfinite(value) and margin >= -tol)
    loc = tuple(float(v) for v in geo.grid_x[idx]) if idx is not None else ()
    return MonitorEntry(kind, float(value), float(threshold), float(margin), passed, asserted, loc, note)


def interior_A_threshold(epsilon: float) -> float:
    """2 / (3 sqrt(eps) - 1)^2, meaningful for eps > 1/9."""
    return 2.0 / (3.0 * math.sqrt(epsilon) - 1.0) ** 2


def conical_envelope(k0, a0, delta, m, t):
    """c(t) = k(t) (1 + 2mt)^{1-delta} with k' = 4(a0^2 + delta^2) k + 2m, k(0) = k0."""
    gam = 4.0 * (a0 * a0 + delta * delta)
    if gam == 0:
        kt = k0 + 2.0 * m * t
    else:
        if gam * t > 700.0:
            return math.inf
        kt = (k0 + 2.0 * m / gam) * math.exp(gam * t) - 2.0 * m / gam
    return kt * (1.0 + 2.0 * m * t) ** (1.0 - delta)


def default_specs(config) -> list[BoundSpec]:
    base = dict(epsilon=config.epsilon)
    return [
        BoundSpec("p_min", base),
        BoundSpec("mean_ratio", base),
        BoundSpec("interior_H", base),
        BoundSpec("interior_A", base),
        BoundSpec("conical", dict(base, delta=config.delta, c=config.c)),
        BoundSpec("lili", base),
    ]


def monitor_suite(state, baseline, specs, previous=None, C_tol=10.0, workers=1) -> MonitorReport:
    """Evaluate every monitor in ``specs`` on the inner region.

    ``baseline`` is the report at time zero (``None`` when computing the
    baseline itself); ``previous`` is the last report, used by the
    monotone series (gaussian) and the running sup |A| of the conical
    envelope.
    """
    grid = state.grid
    tol = C_tol * grid.h**2
    for s in specs:
        if s.kind in RAW_ONLY and state.mode != "raw":
            raise ValueError(f"monitor {s.kind} is only defined for raw-mode runs")
    geo = inner_geometry(state, workers)
    S = geo.sample
    m = grid.m
    k2 = geo.kappa**2
    t = geo.t
    p = S.p
    normH2 = S.normH2 / k2
    normA2 = S.normA2 / k2
    is_base = baseline is None
    carry = dict(previous.carry) if previous is not None else {}
    sup_A = max(carry.get("sup_A", 0.0), float(np.sqrt(np.max(normA2))) if normA2.size else 0.0)
    carry["sup_A"] = sup_A

    def base_value(kind, current):
        return current if is_base else baseline.entries[kind].value

    def hypothesis_ok(eps):
        pmin0 = float(np.min(p)) if is_base else baseline.carry["p_min0"]
        return pmin0 >= eps - tol

    if is_base:
        carry["p_min0"] = float(np.min(p))

    report = MonitorReport(state.time, t, state.mode, state.step_count, tol, carry=carry)
    E = report.entries
    for spec in specs:
        kind, prm = spec.kind, spec.params
        eps = prm.get("epsilon", 0.25)
        if kind == "p_min":
            vmin = float(np.min(p))
            thr = base_value(kind, vmin)
            E[kind] = _entry(kind, p, thr, tol, geo, note=f"epsilon={eps:g}")
        elif kind == "mean_ratio":
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(p > 0, normH2 / p, np.inf)
            E[kind] = _entry(kind, ratio, base_value(kind, float(np.max(ratio))), tol, geo)
        elif kind == "interior_H":
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.where(p > 0, (2.0 * t * normH2 + m) / p, np.inf)
            E[kind] = _entry(kind, q, m / eps, tol, geo, asserted=hypothesis_ok(eps))
        elif kind == "interior_A":
            active = eps > 1.0 / 9.0
            thr = interior_A_threshold(eps) if active else math.inf
            note = "" if active else "not asserted: epsilon <= 1/9"
            E[kind] = _entry(kind, t * normA2, thr, tol, geo, asserted=active and hypothesis_ok(eps), note=note)
        elif kind in ("decay_a", "decay_b", "decay_c"):
            eta = np.sum(geo.x**2, axis=-1) + 2.0 * m * t
            if kind == "decay_a":
                env = eps * np.exp(-prm.get("sigma", 1.0) * np.sqrt(eta + 1.0))
            elif kind == "decay_b":
                env = eps / (eta + 1.0) ** prm.get("k", 1.0)
            else:
                env = eps / np.log(eta + 1.0 + prm.get("sigma", 1.0))
            d = p - env
            ok = float(np.min(d)) >= -tol if is_base else baseline.entries[kind].value >= -tol
            E[kind] = _entry(kind, d, 0.0, tol, geo, asserted=ok)
        elif kind == "growth_poly":
            a = np.asarray(prm.get("coeffs", (1.0, 1.0)), dtype=float)
            deg = a.size - 1
            eta = np.sum(geo.x**2, axis=-1) + 2.0 * (m + 2 * deg) * t
            phi = np.polynomial.polynomial.polyval(eta, a)
            d = np.sum(geo.f**2, axis=-1) - phi
            ok = float(np.max(d)) <= tol if is_base else baseline.entries[kind].value <= tol
            E[kind] = _entry(kind, d, 0.0, tol, geo, asserted=ok)
        elif kind == "conical":
            delta = prm.get("delta", 0.5)
            F = np.concatenate([geo.x, geo.f], axis=-1)
            Fp = np.einsum("...pq,...q->...p", S.Pperp, F)
            ratio = np.sum(Fp**2, axis=-1) / (1.0 + np.sum(F**2, axis=-1)) ** (1.0 - delta)
            vmax = float(np.max(ratio))
            if prm.get("c") is not None:
                thr, note = float(prm["c"]), "fixed c"
            else:
                k0 = base_value(kind, vmax)
                thr, note = conical_envelope(k0, sup_A, delta, m, t), f"sup|A|={sup_A:.6g}"
            entry = _entry(kind, ratio, thr, tol, geo, note=note)
            # relative tolerance plus a roundoff floor for exactly conical data
            entry.passed = bool(np.isfinite(vmax) and vmax <= thr * (1.0 + tol) + 1e-12)
            E[kind] = entry
        elif kind == "lili":
            E[kind] = _entry(kind, S.lili_gap / k2**2, 0.0, tol, geo)
        elif kind == "splitting_p0":
            # only meaningful for data that start with p = 0
            vmax = float(np.max(np.abs(p)))
            ok = vmax <= tol if is_base else baseline.entries[kind].value <= tol
            E[kind] = _entry(kind, np.abs(p), 0.0, tol, geo, asserted=ok)
        elif kind == "gaussian":
            t0 = prm.get("t0", 2.0)
            y0 = prm.get("y0")
            if y0 is None:
                y0 = carry.get("y0")
            if y0 is None:
                y0 = origin_lift(state)
            carry["y0"] = tuple(float(v) for v in y0)
            val, tail = gaussian_density(state, y0, t0)
            if is_base or previous is None:
                thr = val
            else:
                thr = previous.carry["gauss"][0] + previous.carry["gauss"][1]
            carry["gauss"] = (val, tail)
            E[kind] = _entry(kind, [], thr, tol, geo, reduce=(val, None),
                             note=f"tail<={tail:.3g}")
        elif kind == "evol_consistency":
            res = evol_consistency(state, prm.get("dt_probe"), workers=workers)
            E[kind] = _entry(kind, [], tol, tol, geo, reduce=(res["residual_sup"], None),
                             asserted=False, note=f"lhs_sup={res['lhs_sup']:.3g}")
            # pass iff residual <= tol (margin is tol - value)
            E[kind].passed = bool(res["residual_sup"] <= tol)
        elif kind == "interior_dA":
            dA2 = covariant_dA2(state, workers)[inner_mask(grid)] / k2**2
            entry = _entry(kind, t * t * dA2, math.inf, tol, geo, asserted=False,
                           note="bounded only; no numeric threshold")
            E[kind] = entry
    return report


# -- ODE comparison ------------------------------------------------------------

@dataclass
class ODEBound:
    t: np.ndarray
    k: np.ndarray
    blown_up: bool


def ode_bound(Phi: Callable[[float], float], u0: float, horizon: float, dt_ode: float) -> ODEBound:
    """Classical RK4 for k' = Phi(k), k(0) = u0 on a uniform mesh."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if dt_ode <= 0 or dt_ode > horizon / 100 * (1 + 1e-12):
        raise ValueError("dt_ode must satisfy 0 < dt_ode <= horizon/100")
    steps = int(math.ceil(horizon / dt_ode - 1e-9))
    h = horizon / steps
    t = np.linspace(0.0, horizon, steps + 1)
    k = np.empty(steps + 1)
    k[0] = u0
    for i in range(steps):
        y = k[i]
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = Phi(y)
            k2 = Phi(y + 0.5 * h * k1)
            k3 = Phi(y + 0.5 * h * k2)
            k4 = Phi(y + h * k3)
            k[i + 1] = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not math.isfinite(k[i + 1]):
            return ODEBound(t[: i + 1], k[: i + 1], True)
    return ODEBound(t, k, False)


# -- Gaussian density ------------------------------------------------------------

def origin_lift(state):
    """Ambient point (0, f(0)) using the centre node of the grid."""
    grid = state.grid
    c = (grid.N // 2,) * grid.m
    return tuple([0.0] * grid.m + list(state.scale() * state.map.values[c]))


def gaussian_density(state, y0, t0, band=None):
    """Backward heat kernel weighted area over the inner region.

    Returns ``(value, tail)``.  ``tail`` bounds the missing contribution
    of the graph outside the inner box: since |y0 - F|^2 >= |y0_x - x|^2,
    it is at most sup sqrt(det g) times the mass of an m-dimensional
    Gaussian of variance 2 tau per axis outside radius R - |y0_x|, i.e.
    ``chi2.sf((R - |y0_x|)^2 / (2 tau), m)``, with sup sqrt(det g) taken
    over the whole grid as a proxy for the exterior.
    """
    if state.mode != "raw":
        raise ValueError("gaussian_density is defined for raw-mode states")
    tau = t0 - state.time
    if not tau > 0:
        raise ValueError("gaussian_density needs t0 > current time")
    grid = state.grid
    m = grid.m
    if band is None:
        mask = inner_mask(grid)
        R = grid.L - grid.band
    else:
        from .grid import Grid
        sub = Grid(grid.m, grid.N, grid.L, band)
        mask = inner_mask(sub)
        R = grid.L - band
    J, _ = jet(state.map)
    _, _, detg = geometry.metric(J)
    sq = np.sqrt(detg)
    F = np.concatenate([grid.points(), state.map.values], axis=-1)
    y0 = np.asarray(y0, dtype=float)
    d2 = np.sum((F - y0) ** 2, axis=-1)
    rho = (4.0 * math.pi * tau) ** (-m / 2) * np.exp(-d2 / (4.0 * tau))
    value = float(np.sum((rho * sq)[mask]) * grid.h**m)
    reach = max(R - float(np.linalg.norm(y0[:m])), 0.0)
    tail = float(chi2.sf(reach**2 / (2.0 * tau), m) * np.max(sq))
    return value, tail


# -- evolution-equation consistency -----------------------------------------------

def _H_field(gmap):
    J, H2 = jet(gmap)
    g, ginv, detg = geometry.metric(J)
    P, A, H = geometry.second_fundamental(J, H2, ginv)
    return J, H2, ginv, detg, P, A, H


def evol_consistency(state, dt_probe=None, workers=1):
    """Check d/dt|H|^2 = Lap|H|^2 - 2|grad_perp H|^2 + 2|A^H|^2 on the inner region.

    The time derivative along the flow is the centred difference of
    |H|^2 over one probe step forward and backward, corrected by the
    tangential drift w = g^{-1} J v of the non-parametric gauge.
    """
    from .flow import cfl_dt, step

    if state.mode != "raw":
        raise ValueError("evol_consistency requires a raw-mode state")
    grid = state.grid
    dt = dt_probe if dt_probe is not None else cfl_dt(grid, 0.25)
    if dt > cfl_dt(grid, 1.0):
        raise ValueError("dt_probe exceeds the CFL step")
    plus = step(state, dt, workers=workers)
    minus = step(state, -dt, workers=workers)

    def normH2(st):
        H = _H_field(st.map)[-1]
        return np.sum(H * H, axis=-1)

    J, H2, ginv, detg, P, A, H = _H_field(state.map)
    Q = np.sum(H * H, axis=-1)
    dQdt = (normH2(plus) - normH2(minus)) / (2.0 * dt)
    m = grid.m
    gradQ = np.stack([diff1(grid, Q, i) for i in range(m)], axis=-1)
    v = geometry.graph_rate(J, H2, ginv)
    w = np.einsum("...ij,...ja,...a->...i", ginv, J, v)
    lhs = dQdt - np.sum(w * gradQ, axis=-1)

    sq = np.sqrt(detg)
    flux = sq[..., None] * np.einsum("...ij,...j->...i", ginv, gradQ)
    lap = sum(diff1(grid, flux[..., i], i) for i in range(m)) / sq
    dH = np.stack([diff1(grid, H, k) for k in range(m)], axis=-2)      # (..., m, m+n)
    PdH = np.einsum("...pq,...kq->...kp", P, dH)
    grad_perp = np.einsum("...kl,...kp,...lp->...", ginv, PdH, PdH)
    AH2 = geometry.curvature_norms(ginv, A)[2]
    rhs = lap - 2.0 * grad_perp + 2.0 * AH2

    mask = inner_mask(grid)
    res = np.abs(lhs - rhs)[mask]
    return dict(
        residual_sup=float(np.max(res)),
        lhs_sup=float(np.max(np.abs(lhs[mask]))),
        rhs_sup=float(np.max(np.abs(rhs[mask]))),
    )


def covariant_dA2(state, workers=1):
    """|nabla A|^2 on the whole grid from finite differences of A.

    nabla_k A_ij = P (d_k A_ij) - Gamma^l_ki A_lj - Gamma^l_kj A_il with
    the graph Christoffel symbols Gamma^l_ki = g^lp <d_p F, d_k d_i F>.
    """
    grid = state.grid
    m = grid.m
    J, H2, ginv, detg, P, A, H = _H_field(state.map)
    dA = np.stack([diff1(grid, A, k) for k in range(m)], axis=-4)       # (..., k, i, j, p)
    PdA = np.einsum("...pq,...kijq->...kijp", P, dA)
    Gam = np.einsum("...lp,...pa,...kia->...lki", ginv, J, H2)
    corr = np.einsum("...lki,...ljp->...kijp", Gam, A)
    nab = PdA - corr - np.swapaxes(corr, -2, -3)
    return np.einsum("...ka,...ib,...jc,...kijp,...abcp->...", ginv, ginv, ginv, nab, nab, optimize=True)
