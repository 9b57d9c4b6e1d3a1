"""Catalog of closed-form initial maps f0: R^m -> R^n.

Every entry provides the map and its exact Jacobian, so certificates do
not depend on finite-difference resolution.  Entries:

``linear``      f = A x
``cone2theta``  beta r (cos 2theta, sin 2theta), smoothed near the origin
``sinlog``      (|x| sin log|x|, 0) with an even polynomial fill on |x| <= 1
``bowl_like``   (s u(|x|/s), 0) with u the rotationally symmetric translator
``shear``       (x1 + a sin x2, x2)
``bump``        (a sin(k.x) prod_i c(x_i/R), 0) with a compactly supported c
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from . import geometry
from .grid import Grid, GridMap, inner_mask


class InitialDataError(ValueError):
    pass


@dataclass
class InitialSpec:
    name: str
    params: dict = field(default_factory=dict)
    r0: float = 0.5
    r1: float = 3.0


@dataclass
class Certificate:
    min_p: float
    max_lambda: float
    conical_ratio: float
    delta: float
    min_p_at: tuple
    conical_at: tuple


@dataclass
class CatalogEntry:
    """A resolved catalog entry.

    ``conical`` means exactly 1-homogeneous for |x| >= r1, ``uniform``
    means claimed uniformly area decreasing.
    """

    name: str
    m: int
    n: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    conical: bool = False
    uniform: bool = False


# -- smooth step -------------------------------------------------------------

def _phi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _dphi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos]) / x[pos] ** 2
    return out


def smoothstep(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    a, b = _phi(x), _phi(1.0 - np.asarray(x, dtype=float))
    return a / (a + b)


def smoothstep_deriv(x):
    x = np.asarray(x, dtype=float)
    a, b = _phi(x), _phi(1.0 - x)
    da, db = _dphi(x), -_dphi(1.0 - x)
    return (da * (a + b) - a * (da + db)) / (a + b) ** 2


def bump_cutoff(u):
    """exp(1 - 1/(1 - u^2)) on |u| < 1, zero outside; equals 1 at u = 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


def bump_cutoff_deriv(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui**2)) * (-2.0 * ui / (1.0 - ui**2) ** 2)
    return out


# -- entries -------------------------------------------------------------------

def _linear(params, m):
    A = params.get("A", 0.3)
    A = np.atleast_1d(np.asarray(A, dtype=float))
    n = int(params.get("n", 2))
    if A.size == 1:
        A = A[0] * np.eye(n, m)
    elif A.size == n * m:
        A = A.reshape(n, m)
    else:
        raise InitialDataError(f"linear: A needs 1 or n*m = {n * m} entries, got {A.size}")

    def f(x):
        return np.einsum("am,...m->...a", A, x)

    def jac(x):
        return np.broadcast_to(A.T, x.shape[:-1] + A.T.shape).copy()

    return CatalogEntry("linear", m, n, f, jac, conical=True)


def _cone2theta(params, m, r0, r1):
    if m < 2:
        raise InitialDataError("cone2theta needs m >= 2")
    beta = float(params.get("beta", 0.2))

    def parts(x):
        x1, x2 = x[..., 0], x[..., 1]
        r = np.hypot(x1, x2)
        rs = np.where(r > 0, r, 1.0)
        z = (r - r0) / (r1 - r0)
        s = smoothstep(z)
        ds = smoothstep_deriv(z) / (r1 - r0)
        w = s / rs + (1.0 - s) / r1
        dw = np.where(r > 0, ds / rs - s / rs**2 - ds / r1, 0.0)
        return x1, x2, rs, w, dw

    def f(x):
        x1, x2, _, w, _ = parts(x)
        return beta * w[..., None] * np.stack([x1**2 - x2**2, 2 * x1 * x2], axis=-1)

    def jac(x):
        x1, x2, rs, w, dw = parts(x)
        J = np.zeros(x.shape[:-1] + (m, 2))
        q = np.stack([x1**2 - x2**2, 2 * x1 * x2], axis=-1)
        # d/dx_i of beta w(r) q(x)
        J[..., 0, 0] = 2 * x1 * w
        J[..., 0, 1] = 2 * x2 * w
        J[..., 1, 0] = -2 * x2 * w
        J[..., 1, 1] = 2 * x1 * w
        J[..., 0, :] += (dw * x1 / rs)[..., None] * q
        J[..., 1, :] += (dw * x2 / rs)[..., None] * q
        return beta * J

    return CatalogEntry("cone2theta", m, 2, f, jac, conical=True, uniform=True)


def _sinlog_fill_coefficients():
    # even polynomial a + b r^2 + c r^4 + d r^6 matching r sin log r to third order at r = 1
    M = np.array([
        [1, 1, 1, 1],
        [0, 2, 4, 6],
        [0, 2, 12, 30],
        [0, 0, 24, 120],
    ], dtype=float)
    return np.linalg.solve(M, np.array([0.0, 1.0, 1.0, -2.0]))


_SINLOG_FILL = _sinlog_fill_coefficients()


def sinlog_profile(r):
    """u(r) = r sin log r for r >= 1 and the even polynomial fill below."""
    r = np.asarray(r, dtype=float)
    a, b, c, d = _SINLOG_FILL
    r2 = r * r
    inner = a + r2 * (b + r2 * (c + r2 * d))
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = r * np.sin(np.log(np.where(r >= 1, r, 1.0)))
    return np.where(r >= 1, outer, inner)


def sinlog_profile_deriv(r):
    r = np.asarray(r, dtype=float)
    a, b, c, d = _SINLOG_FILL
    inner = r * (2 * b + r * r * (4 * c + 6 * d * r * r))
    L = np.log(np.where(r >= 1, r, 1.0))
    outer = np.sin(L) + np.cos(L)
    return np.where(r >= 1, outer, inner)


def _radial(name, m, u, du, uniform):
    def f(x):
        r = np.sqrt(np.sum(x * x, axis=-1))
        out = np.zeros(x.shape[:-1] + (2,))
        out[..., 0] = u(r)
        return out

    def jac(x):
        r = np.sqrt(np.sum(x * x, axis=-1))
        rs = np.where(r > 0, r, 1.0)
        J = np.zeros(x.shape[:-1] + (m, 2))
        J[..., :, 0] = (du(r) / rs)[..., None] * x
        return J

    return CatalogEntry(name, m, 2, f, jac, uniform=uniform)


def bowl_profile(m, r_max, h_ode=1e-3):
    """Rotationally symmetric translator profile u(r) on [0, r_max].

    Solves u'' = (1 + u'^2)(1 - (m-1) u'/r) with u(0) = u'(0) = 0 by
    classical RK4 on the first-order system; the singular point r = 0 is
    handled with the limit u''(0) = 1/m.  Returns ``(r, u, du)``.
    """
    if m < 2:
        raise ValueError("bowl_profile needs m >= 2")
    steps = max(1, int(np.ceil(r_max / h_ode)))
    h = r_max / steps
    r = np.linspace(0.0, r_max, steps + 1)
    y = np.zeros((steps + 1, 2))

    def rhs(rr, yy):
        v = yy[1]
        if rr == 0.0:
            return np.array([v, 1.0 / m])
        return np.array([v, (1.0 + v * v) * (1.0 - (m - 1) * v / rr)])

    for k in range(steps):
        rk, yk = r[k], y[k]
        k1 = rhs(rk, yk)
        k2 = rhs(rk + h / 2, yk + h / 2 * k1)
        k3 = rhs(rk + h / 2, yk + h / 2 * k2)
        k4 = rhs(rk + h, yk + h * k3)
        y[k + 1] = yk + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return r, y[:, 0], y[:, 1]


class _BowlSpline:
    """Profile spline that extends itself when asked for larger radii."""

    def __init__(self, m, scale):
        self.m = m
        self.scale = scale
        self.r_max = 0.0
        self._build(16.0)

    def _build(self, r_max):
        r, u, du = bowl_profile(self.m, r_max, h_ode=min(1e-2, r_max / 2000))
        self.u = CubicSpline(r, u)
        self.du = CubicSpline(r, du)
        self.r_max = r_max

    def _ensure(self, rho):
        top = float(np.max(rho)) if np.size(rho) else 0.0
        if top > self.r_max:
            self._build(2.0 * top)

    def value(self, r):
        rho = np.asarray(r) / self.scale
        self._ensure(rho)
        return self.scale * self.u(rho)

    def deriv(self, r):
        rho = np.asarray(r) / self.scale
        self._ensure(rho)
        return self.du(rho)


def _bowl_like(params, m):
    scale = float(params.get("scale", 1.0))
    if scale <= 0:
        raise InitialDataError("bowl_like: scale must be positive")
    spl = _BowlSpline(m, scale)
    return _radial("bowl_like", m, spl.value, spl.deriv, uniform=False)


def _shear(params, m):
    if m < 2:
        raise InitialDataError("shear needs m >= 2")
    a = float(params.get("a", 0.5))

    def f(x):
        return np.stack([x[..., 0] + a * np.sin(x[..., 1]), x[..., 1]], axis=-1)

    def jac(x):
        J = np.zeros(x.shape[:-1] + (m, 2))
        J[..., 0, 0] = 1.0
        J[..., 1, 0] = a * np.cos(x[..., 1])
        J[..., 1, 1] = 1.0
        return J

    return CatalogEntry("shear", m, 2, f, jac)


def _bump(params, m):
    a = float(params.get("a", 1e-3))
    k = np.atleast_1d(np.asarray(params.get("k", 1.0), dtype=float))
    if k.size == 1:
        k = np.full(m, k[0])
    if k.size != m:
        raise InitialDataError(f"bump: k needs 1 or m = {m} entries")
    R = float(params.get("R", 4.0))

    def f(x):
        c = np.prod(bump_cutoff(x / R), axis=-1)
        out = np.zeros(x.shape[:-1] + (2,))
        out[..., 0] = a * np.sin(x @ k) * c
        return out

    def jac(x):
        cs = bump_cutoff(x / R)
        dcs = bump_cutoff_deriv(x / R) / R
        c = np.prod(cs, axis=-1)
        phase = x @ k
        J = np.zeros(x.shape[:-1] + (m, 2))
        for i in range(m):
            others = np.prod(np.delete(cs, i, axis=-1), axis=-1)
            J[..., i, 0] = a * (k[i] * np.cos(phase) * c + np.sin(phase) * dcs[..., i] * others)
        return J

    entry = CatalogEntry("bump", m, 2, f, jac)
    entry.support = R
    return entry


CATALOG = ("linear", "cone2theta", "sinlog", "bowl_like", "shear", "bump")


def resolve(spec: InitialSpec, m: int) -> CatalogEntry:
    """Turn a spec into a concrete entry for domain dimension m."""
    name, p = spec.name, spec.params
    if name == "linear":
        return _linear(p, m)
    if name == "cone2theta":
        return _cone2theta(p, m, spec.r0, spec.r1)
    if name == "sinlog":
        return _radial("sinlog", m, sinlog_profile, sinlog_profile_deriv, uniform=True)
    if name == "bowl_like":
        return _bowl_like(p, m)
    if name == "shear":
        return _shear(p, m)
    if name == "bump":
        return _bump(p, m)
    raise InitialDataError(f"unknown catalog entry {name!r}; known: {', '.join(CATALOG)}")


def _validate(spec: InitialSpec, entry: CatalogEntry, grid: Grid):
    if entry.name == "cone2theta":
        if not (0 < spec.r0 < spec.r1 < grid.L - grid.band):
            raise InitialDataError(
                f"cone2theta needs 0 < r0 < r1 < L - band (r0={spec.r0}, r1={spec.r1}, "
                f"L - band={grid.L - grid.band})"
            )
    if entry.name == "bump" and entry.support >= grid.L - grid.band:
        raise InitialDataError("bump: support radius R must be < L - band")


def certify(entry: CatalogEntry, points: np.ndarray, delta: float = 0.5) -> Certificate:
    """min p, max singular value and the conical ratio over given points."""
    pts = points.reshape(-1, points.shape[-1])
    J = entry.jacobian(pts)
    f = entry.evaluate(pts)
    p, _, _ = geometry.area_p(J)
    lam = geometry.singular_values(J)
    F = np.concatenate([pts, f], axis=-1)
    P = geometry.normal_projector(J)
    Fperp = np.einsum("...pq,...q->...p", P, F)
    ratio = np.sum(Fperp**2, axis=-1) / (1.0 + np.sum(F**2, axis=-1)) ** (1.0 - delta)
    ip, ic = int(np.argmin(p)), int(np.argmax(ratio))
    return Certificate(
        min_p=float(p[ip]),
        max_lambda=float(np.max(lam[:, 0])) if lam.size else 0.0,
        conical_ratio=float(ratio[ic]),
        delta=delta,
        min_p_at=tuple(float(v) for v in pts[ip]),
        conical_at=tuple(float(v) for v in pts[ic]),
    )


def build_initial(spec: InitialSpec, grid: Grid, epsilon: float | None = None, delta: float = 0.5):
    """Sample a catalog entry on the grid and certify it on the inner region.

    Raises if an entry claimed uniformly area decreasing certifies below
    ``epsilon``.
    """
    entry = resolve(spec, grid.m)
    _validate(spec, entry, grid)
    pts = grid.points()
    gmap = GridMap(grid, entry.evaluate(pts))
    cert = certify(entry, pts[inner_mask(grid)], delta)
    if epsilon is not None and entry.uniform and cert.min_p < epsilon:
        raise InitialDataError(
            f"{spec.name}: certificate min p = {cert.min_p:.6g} < epsilon = {epsilon:g}"
        )
    return gmap, cert
