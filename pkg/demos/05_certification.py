"""Structural certification at the reference parameters.

Checks the dissipativity margin of the transport operator, its
preservation under the frozen friction source, the unit normalization
of the control profile, equilibrium stationarity, the observer error
matrix, the source Lipschitz constant, and a 100-trial passivity
balance along random open-loop trajectories.
"""
from bristletrack import certify
from bristletrack.config import parse_config

body, axles, cfg, _ = parse_config("")
report = certify(body, axles, n_intervals=cfg.n_intervals)
print(report.text())
print("all pass:", report.all_pass)
