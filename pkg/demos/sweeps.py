"""
Sweeping services and GPUs
==========================

Cost as the number of services grows, and as the server gets more GPUs.
Each point is a mean over paired seeds (the same request streams for every
policy).
"""

from pfmcache.catalog import default_scenario
from pfmcache.engine import sweep

scenario = default_scenario()
policies = ["lc", "fifo", "lfu", "cloud"]

rep = sweep(scenario, policies, "num_services", [10, 20, 30, 40, 50], seeds=range(5))
print("services  " + "  ".join(f"{p:>8}" for p in policies))
for v in rep.values:
    rows = {r["policy"]: r for r in rep.summary() if r["axis_value"] == v}
    print(f"{v:>8}  " + "  ".join(f"{rows[p]['total_mean']:8.5f}" for p in policies))

rep = sweep(scenario, policies, "gpu_count", [2, 4, 8, 16], seeds=range(5))
print()
print("    gpus  " + "  ".join(f"{p:>8}" for p in policies))
for v in rep.values:
    rows = {r["policy"]: r for r in rep.summary() if r["axis_value"] == v}
    print(f"{v:>8}  " + "  ".join(f"{rows[p]['total_mean']:8.5f}" for p in policies))
