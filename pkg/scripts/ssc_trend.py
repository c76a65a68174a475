"""Median collapse distance D(r) of the critically loaded 2x2 switch.

Usage: python scripts/ssc_trend.py [seeds] [alpha]
"""
import sys

import numpy as np

from maxweight_lab.model import NetworkInstance
from maxweight_lab.sim import ssc_experiment

seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 20
alpha = float(sys.argv[2]) if len(sys.argv) > 2 else 1.0
net = NetworkInstance.iq_uniform(2, 1.0)
r_values = [5, 10, 20, 40]
res = ssc_experiment(net, net.rates, np.full(4, 0.5), alpha, r_values, 1.0, seed=1, replications=seeds)
for r in r_values:
    d = np.array([x.D_r for x in res if x.r == r])
    print(f"r={r:3d}  median D={np.median(d):.4f}  q10={np.quantile(d, .1):.4f}  q90={np.quantile(d, .9):.4f}")
