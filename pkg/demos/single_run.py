"""
One simulation, four policies
=============================

Run the default scenario (one edge server, 30 services, 100 slots) under
every policy and compare the time-averaged cost and where it comes from.
"""

from pfmcache.catalog import default_scenario
from pfmcache.engine import run
from pfmcache.policy import PolicyKind

scenario = default_scenario()

for kind in PolicyKind:
    rep = run(scenario, kind, seed=0)
    parts = ", ".join(f"{k}={v:.5f}" for k, v in rep.component_averages.items())
    print(f"{kind.value:>5}  total={rep.average_total:.5f}  ({parts})")
    print(f"       switching share over the last 20 slots: {rep.switching_share:.2%}")

# a closer look at LC: what is cached at the end, and how much context it holds
lc = run(scenario, "lc", seed=0)
last = lc.per_slot[-1]
print("cached pairs at T:", len(last.cache["edge-0"]))
print("total effective examples at T:", round(last.context_total, 1))
print("edge-served share:", round(sum(m.edge_served for m in lc.per_slot)
                                  / sum(m.requests for m in lc.per_slot), 3))
