"""Uniform tensor-product grids on [-L, L]^m and finite-difference stencils.

Fields are numpy arrays whose first ``m`` axes are the spatial node axes
(C order, so axis 0 is the slowest index).  Vector-valued fields carry
their components on a trailing axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``N`` nodes per axis on the box ``[-L, L]^m``.

    ``band`` is the width of the boundary layer excluded from monitors.
    The constructor does not validate; use :func:`build_grid`.
    """

    m: int
    N: int
    L: float
    band: float

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.N - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.m

    @cached_property
    def coords(self) -> np.ndarray:
        """1-D node coordinates x_i = -L + i h."""
        return -self.L + np.arange(self.N) * self.h

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.coords] * self.m), indexing="ij"))

    @cached_property
    def _points(self) -> np.ndarray:
        pts = np.stack(self.mesh, axis=-1)
        pts.setflags(write=False)
        return pts

    def points(self) -> np.ndarray:
        """Node positions, shape ``shape + (m,)`` (cached, read-only)."""
        return self._points

    def radius2(self) -> np.ndarray:
        return sum(x * x for x in self.mesh)

    def boundary_mask(self) -> np.ndarray:
        """Outermost ring of nodes (any index equal to 0 or N-1); cached, read-only."""
        return self._boundary

    @cached_property
    def _boundary(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.m):
            idx = [slice(None)] * self.m
            idx[axis] = 0
            mask[tuple(idx)] = True
            idx[axis] = -1
            mask[tuple(idx)] = True
        mask.setflags(write=False)
        return mask

    def refine(self) -> "Grid":
        """Same box with N -> 2N - 1, i.e. half the spacing."""
        return Grid(self.m, 2 * self.N - 1, self.L, self.band)

    def coarsen(self) -> "Grid":
        if (self.N - 1) % 2:
            raise GridError("grid cannot be coarsened: N - 1 is not even")
        return Grid(self.m, (self.N - 1) // 2 + 1, self.L, self.band)


def build_grid(m: int, N: int, L: float, band: float) -> Grid:
    if m < 1:
        raise GridError("m must be >= 1")
    if N % 2 == 0:
        raise GridError("N must be odd")
    if N < 5:
        raise GridError("N must be >= 5")
    if not L > 0:
        raise GridError("L must be positive")
    h = 2.0 * L / (N - 1)
    # 2h is the stencil half-width; allow for rounding in band = 2h exactly
    if band < 2.0 * h * (1 - 1e-12) or band >= L:
        raise GridError(f"band must satisfy 2h <= band < L (h={h:g}, band={band:g}, L={L:g})")
    return Grid(m, N, float(L), float(band))


def inner_mask(grid: Grid) -> np.ndarray:
    """Nodes whose coordinates all satisfy |x_i| <= L - band."""
    limit = grid.L - grid.band + 1e-9 * grid.h
    inside = np.abs(grid.coords) <= limit
    mask = np.ones(grid.shape, dtype=bool)
    for axis in range(grid.m):
        shape = [1] * grid.m
        shape[axis] = grid.N
        mask = mask & inside.reshape(shape)
    return mask


def diff1(grid: Grid, f: np.ndarray, axis: int) -> np.ndarray:
    """First derivative along a spatial axis.

    Fourth-order central stencil at nodes two or more cells from the
    boundary, second-order central on the next ring and second-order
    one-sided on the boundary itself.
    """
    h = grid.h
    g = np.moveaxis(f, axis, 0)
    out = np.empty(g.shape, dtype=float)
    out[2:-2] = (-g[4:] + 8.0 * g[3:-1] - 8.0 * g[1:-3] + g[:-4]) / (12.0 * h)
    out[1] = (g[2] - g[0]) / (2.0 * h)
    out[-2] = (g[-1] - g[-3]) / (2.0 * h)
    out[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h)
    out[-1] = (3.0 * g[-1] - 4.0 * g[-2] + g[-3]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


def _diff2_same(grid: Grid, f: np.ndarray, axis: int) -> np.ndarray:
    h2 = grid.h * grid.h
    g = np.moveaxis(f, axis, 0)
    out = np.empty(g.shape, dtype=float)
    out[2:-2] = (-g[4:] + 16.0 * g[3:-1] - 30.0 * g[2:-2] + 16.0 * g[1:-3] - g[:-4]) / (12.0 * h2)
    out[1] = (g[0] - 2.0 * g[1] + g[2]) / h2
    out[-2] = (g[-1] - 2.0 * g[-2] + g[-3]) / h2
    out[0] = (2.0 * g[0] - 5.0 * g[1] + 4.0 * g[2] - g[3]) / h2
    out[-1] = (2.0 * g[-1] - 5.0 * g[-2] + 4.0 * g[-3] - g[-4]) / h2
    return np.moveaxis(out, 0, axis)


def diff2(grid: Grid, f: np.ndarray, axis_a: int, axis_b: int) -> np.ndarray:
    """Second derivative d_a d_b; mixed terms compose two first derivatives.

    The composition order is canonical (lower axis first), so the result
    is bitwise symmetric in (axis_a, axis_b).
    """
    if axis_a == axis_b:
        return _diff2_same(grid, f, axis_a)
    lo, hi = sorted((axis_a, axis_b))
    return diff1(grid, diff1(grid, f, lo), hi)


@dataclass
class GridMap:
    """Sampled values f^alpha at every node, shape ``grid.shape + (n,)``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[:-1] != self.grid.shape:
            raise GridError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape} + (n,)"
            )
        if not np.all(np.isfinite(self.values)):
            raise GridError("GridMap values must be finite")

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    def flat(self) -> np.ndarray:
        """Values in lexicographic node order, components fastest."""
        return self.values.reshape(-1)

    def copy(self) -> "GridMap":
        return GridMap(self.grid, self.values.copy())


def jet(gmap: GridMap, workers: int = 1):
    """Finite-difference jet ``(J, H2)`` of a GridMap.

    ``J`` has shape ``grid.shape + (m, n)`` and ``H2`` has shape
    ``grid.shape + (m, m, n)``.  With ``workers > 1`` the independent
    stencil applications run on a thread pool; each derivative array is
    produced by the same code either way, so results do not depend on
    the worker count.
    """
    grid = gmap.grid
    m = grid.m
    f = gmap.values
    jobs = [(i, i) for i in range(m)] + [(i, j) for i in range(m) for j in range(i, m)]

    def run(k):
        a, b = jobs[k]
        return diff1(grid, f, a) if k < m else diff2(grid, f, a, b)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(len(jobs))))
    else:
        results = [run(k) for k in range(len(jobs))]

    J = np.stack(results[:m], axis=-2)
    H2 = np.empty(grid.shape + (m, m, gmap.n))
    for (a, b), d in zip(jobs[m:], results[m:]):
        H2[..., a, b, :] = d
        H2[..., b, a, :] = d
    return J, H2
