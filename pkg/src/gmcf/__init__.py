"""Finite-difference laboratory for codimension-two graphical mean curvature flow."""

from .grid import Grid, GridError, GridMap, build_grid, diff1, diff2, inner_mask, jet
from .geometry import GeometrySample, Jet, sample
from .flow import FlowConfig, FlowInstability, FlowState, cfl_dt, evolve, mcf_rhs, normalized_rhs, step
from .initialdata import InitialSpec, build_initial, bowl_profile
from .invariants import BoundSpec, MonitorReport, gaussian_density, monitor_suite, ode_bound
from .expander import ExpanderReport, expander_residual, solve_expander_flow
from .persist import read_snapshot, write_snapshot

__version__ = "0.1.0"

__all__ = [
    "Grid", "GridError", "GridMap", "build_grid", "diff1", "diff2", "inner_mask", "jet",
    "GeometrySample", "Jet", "sample",
    "FlowConfig", "FlowInstability", "FlowState", "cfl_dt", "evolve", "mcf_rhs", "normalized_rhs", "step",
    "InitialSpec", "build_initial", "bowl_profile",
    "BoundSpec", "MonitorReport", "gaussian_density", "monitor_suite", "ode_bound",
    "ExpanderReport", "expander_residual", "solve_expander_flow",
    "read_snapshot", "write_snapshot",
]
