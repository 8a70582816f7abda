"""Geodesic of the Poincare half-plane from (0, 1) with unit horizontal speed.

The exact path is the unit semicircle (tanh t, 1/cosh t).  The script also
runs the residual checks that the verify subcommand reports.
"""

import numpy as np

from algmech.algebroid import SamplePlan
from algmech.catalog import build_builtin
from algmech.dynamics import integrate_rk4, synthesize_semispray_ode
from algmech.verify import run_verification

entry = build_builtin("poincare_half_plane")
sysm = entry.system
field = synthesize_semispray_ode(sysm, sysm.semispray())
traj = integrate_rk4(field, [0.0, 1.0], [1.0, 0.0], 0.0, 1.0, 1e-3)

exact = entry.oracles["x"](traj.times)
print("max |x - exact|       %.2e" % np.max(np.abs(traj.x - exact)))
print("max |x1^2 + x2^2 - 1| %.2e" % np.max(np.abs(np.sum(traj.x ** 2, axis=1) - 1.0)))

checks = run_verification(sysm, SamplePlan(seed=0, count=8, box=entry.plan.box))
for c in checks:
    mark = {True: "ok", False: "FAIL", None: "skip"}[c.passed]
    res = "-" if c.max_residual is None else "%.2e" % c.max_residual
    print(f"{mark:<5}{c.check:<36}{res}")
