import math

import numpy as np
import pytest

from gmcf.expander import (
    ExpanderReport, decay_rate, expander_fields, expander_residual, solve_expander_flow,
    stationarity_check,
)
from gmcf.flow import FlowConfig, FlowState
from gmcf.grid import GridMap, build_grid, inner_mask
from gmcf.initialdata import InitialSpec, build_initial


def test_linear_map_is_an_expander():
    grid = build_grid(2, 33, 4.0, 1.0)
    gmap, _ = build_initial(InitialSpec("linear", {"A": 0.5}), grid)
    rep = expander_residual(FlowState(gmap, 0.0, "normalized"))
    assert rep.residual_sup < 1e-12
    assert rep.graph_residual_sup < 1e-12
    change, bound = stationarity_check(FlowState(gmap, 0.0, "normalized"))
    assert change <= bound


def test_parabola_graph_residual():
    grid = build_grid(1, 129, 2.0, 0.25)
    x = grid.points()[..., 0]
    _, graph, _ = expander_fields(FlowState(GridMap(grid, (x**2)[..., None]), 0.0, "normalized"))
    i = int(np.argmin(np.abs(x - 1.0)))
    assert x[i] == 1.0
    assert graph[i, 0] == pytest.approx(1.4, abs=1e-10)


@pytest.mark.parametrize("seed", range(4))
def test_ambient_residual_is_dominated(seed):
    rng = np.random.default_rng(seed)
    grid = build_grid(2, 33, 3.0, 0.75)
    x, y = grid.mesh
    c = rng.normal(size=6)
    vals = np.stack([c[0] * np.sin(c[1] * x + y), c[2] * x * y + c[3] * np.cos(c[4] * y + c[5])], axis=-1)
    ambient, graph, _ = expander_fields(FlowState(GridMap(grid, vals), 0.0, "normalized"))
    mask = inner_mask(grid)
    a = np.linalg.norm(ambient, axis=-1)[mask]
    g = np.linalg.norm(graph, axis=-1)[mask]
    assert np.all(a <= g * (1 + 1e-12) + 1e-12)


def test_residual_needs_normalized_state():
    grid = build_grid(2, 33, 4.0, 1.0)
    with pytest.raises(ValueError):
        expander_residual(FlowState(GridMap(grid, np.zeros(grid.shape + (2,))), 0.0))


def test_decay_rate_fit():
    reps = [ExpanderReport(s, math.exp(-2 * s), 0.0, 0.0) for s in np.linspace(0, 3, 31)]
    assert decay_rate(reps) == pytest.approx(-2.0)
    assert math.isnan(decay_rate(reps[:5]))


def test_solver_stops_at_once_for_linear_data():
    cfg = FlowConfig(N=33, L=4.0, band=1.0, initial=InitialSpec("linear", {"A": 0.3}), t_end=1.0)
    run = solve_expander_flow(cfg)
    assert run.converged
    assert run.state.mode == "normalized"
    assert len(run.reports) == 1
    assert run.endpoint_uniform
    assert run.diagnostics["conical"]


def test_sinlog_does_not_settle():
    cfg = FlowConfig(N=65, L=8.0, band=1.0, initial=InitialSpec("sinlog"), t_end=1.0, epsilon=0.3)
    run = solve_expander_flow(cfg)
    assert not run.converged
    assert run.reports[-1].residual_sup > 100 * cfg.tol_exp
    assert "residual_sup" in run.series.header()
