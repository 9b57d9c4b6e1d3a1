"""A radial graph that is area decreasing but not asymptotically conical.

u(r) = r sin(log r) keeps p >= 1/3, yet its conical quotient keeps
growing on larger boxes and the normalized flow does not settle: the
expander residual oscillates in s instead of decaying.
"""

import math

from gmcf import FlowConfig, InitialSpec, solve_expander_flow
from gmcf.acceptance import sinlog_conical_value

for k in (1, 2):
    L = math.exp(k * math.pi)
    print(f"L = e^{k}pi = {L:7.1f}: conical quotient {sinlog_conical_value(L):.3g}")

run = solve_expander_flow(FlowConfig(initial=InitialSpec("sinlog"), mode="normalized",
                                     t_end=4.0, monitor_dt=0.25, epsilon=0.3))
for r in run.reports:
    print(f"s={r.s:4.2f}  residual {r.residual_sup:.3e}")
print("converged:", run.converged, " monotone after s=1:", run.diagnostics["monotone_after_1"])
