"""Free rigid body as a Lagrangian system on so(3) over a point.

Integrates the canonical semispray, compares with the Euler equations written
by hand and prints the energy and Casimir drift.
"""

import numpy as np

from algmech.catalog import build_builtin
from algmech.dynamics import integrate_rk4, relative_drift, rk4_step, synthesize_semispray_ode
from algmech.mechanics import energy_map
from algmech.smoothfn import ExprMap

entry = build_builtin("rigid_body_so3", [1.0, 2.0, 3.0])
sysm = entry.system
field = synthesize_semispray_ode(sysm, sysm.semispray())
monitors = {
    "energy": energy_map(sysm.lagrangian(), sysm.gh, sysm.algebroid),
    "casimir": ExprMap.from_strings("y1^2 + (2*y2)^2 + (3*y3)^2", 3, 3),
}
traj = integrate_rk4(field, np.zeros(3), np.ones(3), 0.0, 5.0, 1e-3, monitors)

euler = entry.oracles["euler_rhs"]
w = np.ones(3)
for k in range(1, len(traj.times)):
    w = rk4_step(lambda t, v: euler(v), traj.times[k - 1], w, traj.times[k] - traj.times[k - 1])

print("omega(5)       ", traj.y[-1])
print("Euler equations", w)
print("energy drift    %.2e" % relative_drift(traj.monitors["energy"]))
print("Casimir drift   %.2e" % relative_drift(traj.monitors["casimir"]))
