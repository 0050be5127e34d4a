#!/usr/bin/env python3
"""The scalar curvature flow d/dt log F = -(H(u,u) - c(t)).

Runs the normalized flow on a conformally flat torus (it relaxes toward the
flat metric), shows the diagnostics stream, the stationarity of flat states,
the exact scaling law on a round sphere patch, and the diagnostic gap
between the two tensor-level flow drivers on a non-Riemannian state.
"""

import numpy as np

import finslerflow as ff
from finslerflow.flow import (
    diagnostics,
    dt_policy,
    encode_state,
    run_flow,
    tensor_flow_gap,
    uniform_scaling_flow,
)

TWO_PI = 2 * np.pi

conf = ff.get_entry("conformal-torus")
bg, fg = ff.build_grid(2, 32, TWO_PI, 32)
state = encode_state(
    conf.structure, bg, fg, mode="normalized", stepper="rk4", fiber_cut=2
)
print("normalized flow on the conformal torus (32x32x32, rk4):")
print("policy dt =", dt_policy(state))
traj = run_flow(state, steps=120, dt=5e-3)
for row in traj.rows[:: max(1, len(traj.rows) // 8)]:
    print(f"  step {row.step:4d}  t={row.time:.4f}  V={row.V:9.4f}  "
          f"max|H(u,u)|={row.max_abs_huu:.5f}  gem={row.gem_residual:.1e}")
print(f"sup|H(u,u)| decay: {traj.rows[0].max_abs_huu:.4f} -> "
      f"{traj.rows[-1].max_abs_huu:.4f}")

print("\nflat torus is stationary:")
flat = encode_state(ff.get_entry("euclidean").structure, bg, fg)
after = run_flow(flat, steps=20, dt=1e-3).final_state
print("  max|log F| after 20 steps:", np.max(np.abs(after.logF)))

print("\nround sphere under the uniform scaling ansatz (phi^2 = 1 - 2 K0 t):")
sphere = ff.get_entry("sphere-patch", r=1.0)
ts, phis = uniform_scaling_flow(sphere.structure, [0.2, 0.1], 0.4, T=0.1, dt=1e-3)
print("  phi(0.1)^2 =", phis[-1] ** 2, " exact:", 1 - 2 * 0.1)

print("\ntensor-driver comparison -Htilde_ij vs -H(u,u) g_ij:")
for name in ("conformal-torus", "randers-torus"):
    st = encode_state(ff.get_entry(name).structure, bg, fg)
    print(f"  {name:18s} max normalized gap = {tensor_flow_gap(st):.3e}")
print("  (zero for generalized Einstein states; the scalar flow integrates")
print("   the conformal driver, the gap tracks the 4th-order one)")
