"""Steady slip-to-force map of the distributed friction patch.

Sweeps the frozen slip velocity and tabulates the stationary axle force
per unit vertical load: linear at small slip, saturating at large slip.
Also prints the stationary point behind the reference scenario.
"""
import os

import numpy as np

from bristletrack import (Grid, build_kernels, build_matrices, psi_matrix,
                          solve_equilibrium)
from bristletrack.config import parse_config

body, axles, cfg, _ = parse_config("")
mats = build_matrices(body, axles)
grid = Grid(cfg.n_intervals)
kernels = build_kernels(grid, mats)

rows = []
for v in np.linspace(-8.0, 8.0, 33):
    y = np.array([v, v])
    f = psi_matrix(y, kernels, grid, mats) @ y
    rows.append((v, f[0] / (2 * axles[0].fz), f[1] / (2 * axles[1].fz)))

print(" slip (m/s) | front F/(2 Fz) | rear F/(2 Fz)")
for v, f1, f2 in rows[::4]:
    print(f"  {v:8.2f} | {f1:13.4f} | {f2:12.4f}")

out = os.path.join(os.path.dirname(__file__), "out_force_map.csv")
with open(out, "w") as fh:
    fh.write("v_slip,front_norm_force,rear_norm_force\n")
    for r in rows:
        fh.write(",".join(repr(float(x)) for x in r) + "\n")
print(f"force map written to {out}")

eq = solve_equilibrium(mats, kernels, grid, x_star=np.zeros(2))
print(f"stationary forces for the gust: {np.round(eq.forces, 1)} N, "
      f"steering {np.round(np.degrees(eq.u_star), 3)} deg")
