"""
Context that fades
==================

With a long context window, the vanishing factor decides how much context
survives from slot to slot. Larger factors leave LC with fewer effective
examples, and once the factor outpaces what a pair serves per slot, the
edge stops paying off and traffic drifts to the cloud.
"""

import dataclasses

import numpy as np

from pfmcache.catalog import default_scenario
from pfmcache.engine import sweep

base = default_scenario()
base = dataclasses.replace(base, models=tuple(dataclasses.replace(m, window=2**14) for m in base.models))

nus = [0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 4.0]
rep = sweep(base, ["lc"], "vanish", nus, seeds=range(5))

print("   nu   K(T)   edge-served   accuracy cost")
for nu in nus:
    runs = [r.report for r in rep.select(nu, "lc")]
    k = np.mean([r.per_slot[-1].context_total for r in runs])
    edge = np.mean([sum(m.edge_served for m in r.per_slot) for r in runs])
    acc = np.mean([r.component_averages["accuracy_loss"] for r in runs])
    print(f"{nu:5.2f} {k:7.1f} {edge:12.0f} {acc:15.6f}")
