"""Gaussian density along the raw flow and the ODE comparator.

The backward heat-kernel density centred at the lifted origin should
not increase in time; its truncation to the grid is bounded by a
chi-square tail.  The comparator integrates k' = Phi(k) by RK4 and
flags finite-time blow-up.
"""

from gmcf import BoundSpec, FlowConfig, InitialSpec, evolve, ode_bound

cfg = FlowConfig(initial=InitialSpec("cone2theta", {"beta": 0.2}), t_end=1.0, monitor_dt=0.1,
                 monitors=[BoundSpec("gaussian", {"t0": 2.0})])
_, series = evolve(cfg)
for rep in series:
    e = rep.entries["gaussian"]
    print(f"t={rep.time:3.1f}  density {e.value:.6f}  ({e.note})")

k = ode_bound(lambda u: u * u, 1.0, 2.0, 0.001)
print(f"k' = k^2 from k(0)=1 blows up: {k.blown_up}, last finite time {k.t[-1]:.3f}")
