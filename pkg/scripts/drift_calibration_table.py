"""Calibrated drift thresholds B for the 2x2 switch across alpha and load.

For each pair this prints B, the number of states in the enumerated ball
that miss the drift target, the largest L_alpha among them, and a fresh
check on sampled states beyond B.
"""
import numpy as np

from maxweight_lab.model import NetworkInstance
from maxweight_lab.sim import calibrate_drift_threshold, exact_drift_batch, sample_states

print(f"{'alpha':>6} {'rho':>5} {'B':>8} {'ball':>8} {'misses':>7} {'worst L':>8} {'fresh misses':>13}")
for alpha in (0.5, 1.0, 2.0):
    for rho in (0.5, 0.8, 0.9):
        net = NetworkInstance.iq_uniform(2, rho)
        cal = calibrate_drift_threshold(net, alpha)
        states = sample_states(np.random.default_rng(0), net.M, alpha, 1000, cal.B, 4 * cal.B)
        fresh = int(np.sum(exact_drift_batch(states, net, alpha, "L") > cal.target))
        print(f"{alpha:6.2f} {rho:5.2f} {cal.B:8.3f} {cal.n_states:8d} {cal.n_violations:7d} "
              f"{cal.max_violation_L:8.3f} {fresh:13d}  {cal.method}")
