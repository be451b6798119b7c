"""Open-loop run: the oversteer vehicle diverges under the side gust.

Prints the times at which the coupled state norm crosses a few levels
and writes the decimated trace next to this script.
"""
import dataclasses
import os

from bristletrack import run_scenario
from bristletrack.config import parse_config

body, axles, cfg, _ = parse_config("")
cfg = dataclasses.replace(cfg, mode="open_loop", delay_u=0.0,
                          noise_enabled=False, observer_enabled=False)
trace = run_scenario(body, axles, cfg)

print(f"initial norm : {trace.norm[0]:.3f}")
for level in (2.0, 5.0, 10.0, 20.0):
    t = trace.first_time_norm_above(level)
    print(f"norm > {level:4.0f} at t = {t if t is None else round(t, 2)} s")
print(f"norm at t_end: {trace.norm[-1]:.2f}")

out = os.path.join(os.path.dirname(__file__), "out_open_loop.csv")
trace.to_csv(out)
print(f"trace written to {out}")
