"""Actuator-delay and initial-condition sweeps of the closed loop.

A 0.6 s delay still stabilizes (with visible ringing); 1 s does not.
Scaling the initial condition along the downwind direction shows the
finite basin of the design.
"""
import dataclasses

from bristletrack import run_scenario
from bristletrack.config import parse_config

body, axles, cfg, sweep = parse_config("")

print("delay sweep:")
for d in (0.2, 0.6, 1.0):
    tr = run_scenario(body, axles, dataclasses.replace(cfg, delay_u=d))
    verdict = "diverged" if tr.max_norm() > sweep["diverge_norm"] else "stable"
    print(f"  delay {d:.1f} s: max norm {tr.max_norm():8.2f}  -> {verdict}")

print("initial-condition sweep (x0 = k * [-0.3, 0.05]):")
for k in (1, 2, 3, 4, 5):
    x0 = (k * sweep["ic_base"][0], k * sweep["ic_base"][1])
    tr = run_scenario(body, axles, dataclasses.replace(cfg, x0=x0))
    verdict = "diverged" if tr.max_norm() > sweep["diverge_norm"] else "stable"
    print(f"  k = {k}: max norm {tr.max_norm():8.2f}  -> {verdict}")
