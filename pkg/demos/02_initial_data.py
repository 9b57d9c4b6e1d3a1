"""Certifying initial data before a run.

Every catalog entry is sampled on the grid and certified on the inner
region with its closed-form Jacobian: the smallest p, the largest
singular value and the conical quotient.  A run refuses data that are
claimed uniformly area decreasing but certify below epsilon.
"""

from gmcf import InitialSpec, build_grid, build_initial
from gmcf.initialdata import InitialDataError

grid = build_grid(2, 129, 8.0, 1.0)
for spec in [
    InitialSpec("linear", {"A": 0.3}),
    InitialSpec("cone2theta", {"beta": 0.2}),
    InitialSpec("sinlog"),
    InitialSpec("bowl_like"),
    InitialSpec("shear", {"a": 0.5}),
    InitialSpec("bump", {"a": 1e-3}),
]:
    _, cert = build_initial(spec, grid)
    print(f"{spec.name:11s} min p {cert.min_p:9.6f}   max lambda {cert.max_lambda:8.4f}   "
          f"conical quotient {cert.conical_ratio:9.4f}")

# the bowl gets steeper without bound, so larger boxes certify worse
for L in (8.0, 16.0, 32.0):
    _, cert = build_initial(InitialSpec("bowl_like"), build_grid(2, 65, L, L / 8))
    print(f"bowl_like on L={L:4.0f}: min p {cert.min_p:.4f}")

try:
    build_initial(InitialSpec("sinlog"), grid, epsilon=0.5)
except InitialDataError as exc:
    print("rejected:", exc)
