import math

import numpy as np
import pytest

from gmcf import flow
from gmcf.flow import FlowConfig, FlowInstability, FlowState, cfl_dt, evolve, mcf_rhs, normalized_rhs, rhs, step
from gmcf.grid import GridMap, build_grid, inner_mask
from gmcf.initialdata import InitialSpec, build_initial


def state_of(grid, values, mode="raw", time=0.0):
    return FlowState(GridMap(grid, values), time, mode)


def sine_state(N=129, a=0.5, L=2 * np.pi):
    grid = build_grid(1, N, L, 4 * L / (N - 1))
    x = grid.points()[..., 0]
    vals = np.stack([a * np.sin(x), np.zeros_like(x)], axis=-1)
    return state_of(grid, vals)


def test_sine_rate_closed_form():
    a = 0.5
    st = sine_state(a=a)
    x = st.grid.points()[..., 0]
    want = -a * np.sin(x) / (1 + a**2 * np.cos(x) ** 2)
    got = mcf_rhs(st)[..., 0]
    inside = ~st.grid.boundary_mask()
    assert np.max(np.abs(got - want)[inside]) < 1e-4
    assert np.all(got[~inside] == 0)


def test_linear_map_is_stationary():
    grid = build_grid(2, 33, 4.0, 1.0)
    gmap, _ = build_initial(InitialSpec("linear", {"A": 0.4}), grid)
    for mode in ("raw", "normalized"):
        r = rhs(FlowState(gmap, 0.0, mode))
        assert np.max(np.abs(r)) < 1e-12


def test_normalized_parabola():
    grid = build_grid(1, 129, 2.0, 0.25)
    x = grid.points()[..., 0]
    st = state_of(grid, (x**2 / 2)[..., None], "normalized")
    want = 1 / (1 + x**2) + x**2 / 2
    inside = ~grid.boundary_mask()
    np.testing.assert_allclose(normalized_rhs(st)[..., 0][inside], want[inside], atol=1e-10)


def test_rhs_mode_guards():
    st = sine_state(N=33)
    with pytest.raises(ValueError):
        normalized_rhs(st)
    st.mode = "normalized"
    with pytest.raises(ValueError):
        mcf_rhs(st)
    with pytest.raises(ValueError):
        FlowState(st.map, 0.0, "scaled")


def test_normalized_equals_raw_on_conical_annulus():
    # homogeneous of degree one: -f + x . Df vanishes where the cone is exact
    grid = build_grid(2, 129, 8.0, 1.0)
    gmap, _ = build_initial(InitialSpec("cone2theta", {"beta": 0.2}), grid)
    raw = mcf_rhs(FlowState(gmap, 0.0, "raw"))
    nrm = normalized_rhs(FlowState(gmap, 0.0, "normalized"))
    r = np.sqrt(grid.radius2())
    ann = (r > 3.5) & inner_mask(grid)
    assert np.max(np.abs(nrm - raw)[ann]) < 1e-5
    assert np.max(np.abs(raw[ann])) > 1e-3


def test_cfl_example():
    grid = build_grid(2, 65, 3.2, 0.5)
    assert grid.h == pytest.approx(0.1)
    assert cfl_dt(grid, 0.5) == pytest.approx(0.00125)


def test_step_rejects_large_dt():
    st = sine_state(N=33)
    with pytest.raises(ValueError):
        step(st, 1.01 * cfl_dt(st.grid, 1.0))
    with pytest.raises(ValueError):
        step(st, 0.0)


def test_linear_heat_decay():
    # a tiny sine mode decays like e^{-t}; boundary values are exactly zero
    a = 1e-4
    st = sine_state(N=129, a=a)
    x = st.grid.points()[..., 0]
    dt = cfl_dt(st.grid, 0.5)
    n = int(round(0.2 / dt))
    for _ in range(n):
        st = step(st, 0.2 / n)
    err = np.max(np.abs(st.map.values[..., 0] - a * math.exp(-st.time) * np.sin(x)))
    assert err < 1e-3 * a
    assert st.step_count == n


def test_local_error_is_third_order():
    st = sine_state(N=65, a=0.8)
    dt = cfl_dt(st.grid, 0.5)
    errs = []
    for d in (dt, dt / 2, dt / 4):
        one = step(st, d).map.values
        two = step(step(st, d / 2), d / 2).map.values
        errs.append(np.max(np.abs(one - two)))
    assert 6.0 < errs[0] / errs[1] < 10.0
    assert 6.0 < errs[1] / errs[2] < 10.0


def test_time_reversal():
    st = sine_state(N=65, a=0.8)
    dt = cfl_dt(st.grid, 0.5)
    back = step(step(st, dt), -dt)
    assert np.max(np.abs(back.map.values - st.map.values)) < 50 * dt**3
    assert back.time == pytest.approx(0.0, abs=1e-15)


def test_raw_boundary_is_frozen():
    grid = build_grid(2, 33, 4.0, 1.0)
    gmap, _ = build_initial(InitialSpec("cone2theta", {"beta": 0.3}, 0.5, 2.5), grid)
    st = FlowState(gmap, 0.0)
    dt = cfl_dt(grid)
    for _ in range(20):
        st = step(st, dt)
    b = grid.boundary_mask()
    np.testing.assert_array_equal(st.map.values[b], gmap.values[b])
    assert np.max(np.abs(st.map.values - gmap.values)) > 0


def test_boundary_callback_is_applied():
    st = sine_state(N=33)
    b = st.grid.boundary_mask()
    out = step(st, cfl_dt(st.grid), boundary=lambda t: np.full((b.sum(), 2), t))
    np.testing.assert_allclose(out.map.values[b], out.time)


def test_instability_reports_node():
    grid = build_grid(2, 33, 4.0, 1.0)
    vals = np.zeros(grid.shape + (2,))
    vals[16, 20, 1] = np.inf
    st = flow._bare_state(grid, vals, 0.25, "raw")
    with pytest.raises(FlowInstability) as info:
        rhs(st)
    assert info.value.time == 0.25
    i, j = info.value.location
    assert abs(i - 16) <= 2 and abs(j - 20) <= 2


def test_threads_are_bitwise_deterministic():
    grid = build_grid(2, 65, 8.0, 1.0)
    gmap, _ = build_initial(InitialSpec("cone2theta"), grid)
    st = FlowState(gmap, 0.0)
    a = step(st, cfl_dt(grid), workers=1).map.values
    b = step(st, cfl_dt(grid), workers=4).map.values
    np.testing.assert_array_equal(a, b)


def test_resolve_workers(monkeypatch):
    monkeypatch.setenv("GMCF_THREADS", "3")
    assert flow.resolve_workers() == 3
    monkeypatch.setenv("GMCF_THREADS", "0")
    assert flow.resolve_workers() >= 1
    assert flow.resolve_workers(2) == 2


def test_time_conversions():
    gm = sine_state(N=33).map
    st = FlowState(gm, math.log(3.0), "normalized")
    assert st.scale() == pytest.approx(3.0)
    assert st.raw_time() == pytest.approx(4.0)
    assert FlowState(gm, 0.7).raw_time() == 0.7


def test_flow_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        FlowConfig(cfl_factor=1.0)
    with pytest.raises(ValueError):
        FlowConfig(mode="other")


def test_evolve_writes_outputs(tmp_path):
    cfg = FlowConfig(N=33, L=4.0, band=1.0, initial=InitialSpec("linear", {"A": 0.3}),
                     t_end=0.1, monitor_dt=0.05, out_dir=str(tmp_path), snapshot_every=1)
    state, series = evolve(cfg)
    assert state.time == pytest.approx(0.1)
    assert len(series) == 3
    assert not series.failures()
    assert (tmp_path / "monitors.csv").exists()
    assert (tmp_path / "final.gmcf").exists()
    assert (tmp_path / "snapshot_000002.gmcf").exists()
    assert series.certificate.min_p == pytest.approx(0.834862, abs=1e-6)


def test_normalized_boundary_follows_rescaled_data():
    cfg = FlowConfig(N=33, L=4.0, band=1.0, initial=InitialSpec("sinlog"), mode="normalized")
    grid = cfg.grid()
    fn = flow.boundary_function(cfg, grid)
    xb = grid.points()[grid.boundary_mask()]
    s = 0.3
    from gmcf.initialdata import sinlog_profile
    want = sinlog_profile(math.exp(s) * np.linalg.norm(xb, axis=-1)) / math.exp(s)
    np.testing.assert_allclose(fn(s)[:, 0], want, rtol=1e-13)
    cone = FlowConfig(N=33, L=4.0, band=1.0, mode="normalized",
                      initial=InitialSpec("cone2theta", {}, 0.5, 2.5))
    assert flow.boundary_function(cone, grid) is None
