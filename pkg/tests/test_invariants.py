import math

import numpy as np
import pytest
from scipy.stats import chi2

from gmcf.flow import FlowConfig, FlowState, evolve
from gmcf.grid import GridMap, build_grid
from gmcf.initialdata import InitialSpec, build_initial
from gmcf.invariants import (
    KINDS, BoundSpec, MonitorSeries, conical_envelope, covariant_dA2, evol_consistency,
    gaussian_density, interior_A_threshold, monitor_suite, ode_bound, origin_lift,
)


def smooth_datum(grid, a):
    x, y = grid.mesh
    c = np.exp(-(x * x + y * y) / 8)
    return np.stack([a * np.sin(x) * np.cos(0.5 * y) * c, a * np.cos(x + y) * c], axis=-1)


def linear_state(A=0.3, N=33, L=4.0):
    grid = build_grid(2, N, L, 1.0)
    gmap, _ = build_initial(InitialSpec("linear", {"A": A}), grid)
    return FlowState(gmap, 0.0)


def test_ode_bound_exponential():
    out = ode_bound(lambda k: k, 1.0, 1.0, 0.01)
    assert not out.blown_up
    assert out.k[-1] == pytest.approx(math.e, rel=1e-9)
    assert out.t[-1] == pytest.approx(1.0)


def test_ode_bound_blow_up():
    out = ode_bound(lambda k: k * k, 1.0, 2.0, 0.001)
    assert out.blown_up
    assert out.t[-1] <= 1.01


def test_ode_bound_step_rule():
    with pytest.raises(ValueError):
        ode_bound(lambda k: k, 1.0, 1.0, 0.02)
    with pytest.raises(ValueError):
        ode_bound(lambda k: k, 1.0, 0.0, 0.001)


def test_interior_A_threshold_value():
    assert interior_A_threshold(0.25) == pytest.approx(8.0)


def test_conical_envelope_matches_ode():
    k0, a0, delta, m, t = 0.4, 0.3, 0.5, 2, 0.7
    gam = 4 * (a0**2 + delta**2)
    k = ode_bound(lambda u: gam * u + 2 * m, k0, t, t / 1000).k[-1]
    assert conical_envelope(k0, a0, delta, m, t) == pytest.approx(k * (1 + 2 * m * t) ** (1 - delta), rel=1e-10)
    assert conical_envelope(1.0, 0.0, 0.0, 2, 0.5) == pytest.approx(9.0)
    assert conical_envelope(1.0, 10.0, 0.5, 2, 10.0) == math.inf


def test_bound_spec_validation():
    with pytest.raises(ValueError):
        BoundSpec("nonsense")
    with pytest.raises(ValueError):
        BoundSpec("p_min", {"epsilon": 0.0})
    with pytest.raises(ValueError):
        BoundSpec("growth_poly", {"coeffs": (0.0, 1.0)})
    with pytest.raises(ValueError):
        BoundSpec("conical", {"c": -1.0})
    BoundSpec("decay_b", {"k": 2.0})


def test_linear_data_passes_every_monitor():
    st = linear_state()
    specs = [BoundSpec(k, {"epsilon": 0.25}) for k in KINDS if k != "gaussian"]
    base = monitor_suite(st, None, specs)
    rep = monitor_suite(st, base, specs, previous=base)
    assert rep.passed, rep.failures()
    assert rep.entries["p_min"].value == pytest.approx(0.834862, abs=1e-6)
    assert rep.entries["lili"].value == pytest.approx(0.0, abs=1e-20)
    assert rep.entries["evol_consistency"].value < 1e-12


def test_baseline_thresholds():
    grid = build_grid(2, 65, 8.0, 1.0)
    gmap, _ = build_initial(InitialSpec("cone2theta"), grid)
    specs = [BoundSpec("p_min"), BoundSpec("mean_ratio")]
    base = monitor_suite(FlowState(gmap, 0.0), None, specs)
    assert base.entries["mean_ratio"].threshold == base.entries["mean_ratio"].value
    assert base.entries["p_min"].threshold == base.entries["p_min"].value
    later = monitor_suite(FlowState(gmap, 0.1), base, specs, previous=base)
    assert later.entries["p_min"].threshold == base.entries["p_min"].value


def test_shear_splits_at_p_zero():
    grid = build_grid(2, 65, 8.0, 1.0)
    gmap, _ = build_initial(InitialSpec("shear"), grid)
    rep = monitor_suite(FlowState(gmap, 0.0), None, [BoundSpec("splitting_p0")])
    assert rep.entries["splitting_p0"].value <= 1e-12
    assert rep.entries["splitting_p0"].asserted
    lin = monitor_suite(linear_state(), None, [BoundSpec("splitting_p0")])
    assert not lin.entries["splitting_p0"].asserted


def test_hypothesis_gates_interior_H():
    grid = build_grid(2, 129, 8.0, 1.0)
    gmap, _ = build_initial(InitialSpec("shear"), grid)
    rep = monitor_suite(FlowState(gmap, 0.0), None, [BoundSpec("interior_H"), BoundSpec("interior_A")])
    assert not rep.entries["interior_H"].asserted
    assert not rep.entries["interior_A"].asserted
    small = monitor_suite(linear_state(), None, [BoundSpec("interior_A", {"epsilon": 0.1})])
    assert not small.entries["interior_A"].asserted


def test_raw_only_kinds_rejected_in_normalized_mode():
    st = linear_state()
    st.mode = "normalized"
    for kind in ("gaussian", "evol_consistency"):
        with pytest.raises(ValueError):
            monitor_suite(st, None, [BoundSpec(kind)])


def test_gaussian_density_of_plane():
    grid = build_grid(2, 65, 8.0, 1.0)
    st = FlowState(GridMap(grid, np.zeros(grid.shape + (2,))), 0.0)
    val, tail = gaussian_density(st, (0.0, 0.0, 0.0, 0.0), 2.0)
    assert tail == pytest.approx(chi2.sf(49 / 4, 2))
    assert 1 - tail - 1e-8 <= val <= 1 + 1e-8
    smaller, _ = gaussian_density(st, (0.0, 0.0, 0.0, 0.0), 2.0, band=3.0)
    assert smaller < val
    with pytest.raises(ValueError):
        gaussian_density(FlowState(st.map, 2.0), (0.0,) * 4, 2.0)


def test_origin_lift():
    grid = build_grid(2, 33, 4.0, 1.0)
    vals = np.zeros(grid.shape + (2,))
    vals[16, 16] = (0.5, -1.0)
    st = FlowState(GridMap(grid, vals), 0.0)
    assert origin_lift(st) == (0.0, 0.0, 0.5, -1.0)


def test_evol_consistency_converges_under_refinement():
    res = []
    for N in (33, 65, 129):
        grid = build_grid(2, N, 8.0, 1.0)
        st = FlowState(GridMap(grid, smooth_datum(grid, 0.4)), 0.0)
        res.append(evol_consistency(st)["residual_sup"])
    assert res[0] / res[1] >= 3.0
    assert res[1] / res[2] >= 3.0


def test_evol_consistency_relative_residual_shrinks_with_amplitude():
    grid = build_grid(2, 65, 8.0, 1.0)
    rel = []
    for a in (0.4, 0.1):
        r = evol_consistency(FlowState(GridMap(grid, smooth_datum(grid, a)), 0.0))
        rel.append(r["residual_sup"] / r["lhs_sup"])
    assert rel[1] < rel[0]


def test_covariant_dA_vanishes_for_linear_data():
    assert np.max(covariant_dA2(linear_state())) < 1e-24


def test_rotation_invariance():
    grid = build_grid(2, 65, 8.0, 1.0)
    gmap, _ = build_initial(InitialSpec("cone2theta", {"beta": 0.3}), grid)
    # rotating the domain by 90 degrees maps nodes onto nodes
    rot = np.rot90(gmap.values, k=1, axes=(0, 1)).copy()
    specs = [BoundSpec(k) for k in ("p_min", "mean_ratio", "interior_H", "lili", "conical")]
    a = monitor_suite(FlowState(gmap, 0.0), None, specs)
    b = monitor_suite(FlowState(GridMap(grid, rot), 0.0), None, specs)
    for k in a.entries:
        assert a.entries[k].value == pytest.approx(b.entries[k].value, rel=1e-10, abs=1e-14), k


def test_series_csv(tmp_path):
    cfg = FlowConfig(N=33, L=4.0, band=1.0, initial=InitialSpec("linear", {"A": 0.3}),
                     t_end=0.05, monitor_dt=0.05, monitors=[BoundSpec("lili"), BoundSpec("p_min")])
    _, series = evolve(cfg)
    assert isinstance(series, MonitorSeries)
    assert series.header() == ["t", "p_min_value", "p_min_threshold", "p_min_pass",
                               "lili_value", "lili_threshold", "lili_pass"]
    path = tmp_path / "m.csv"
    series.write_csv(path)
    rows = path.read_text().strip().splitlines()
    assert len(rows) == 3
    assert float(rows[1].split(",")[1]) == series[0].entries["p_min"].value
