"""Time-slotted simulation driver, runs and parameter sweeps."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import policy as pol
from .catalog import ScenarioConfig, validate_scenario
from .context import ContextState, Pair, update_context
from .cost import CostBreakdown, SlotDecision, Triple, average_objective, slot_cost
from .policy import PolicyKind, PolicyState

SWEEP_AXES = ("horizon", "num_services", "gpu_count", "vanish", "window")
SWITCHING_TAIL = 0.2
_REL_TOL = 1e-9


class ConstraintViolation(RuntimeError):
    """A policy produced a decision outside the feasible set."""


def generate_requests(seed: int, scenario: ScenarioConfig, slot: int) -> dict[Triple, int]:
    """Poisson request counts for one slot, attributed to preferred models.

    Every (server, service) draws from its own stream keyed by
    ``(seed, slot, server index, service index)``, so adding or removing
    entities never changes anyone else's draws.
    """
    out = {}
    for n, server in enumerate(scenario.servers):
        for i, svc in enumerate(scenario.services):
            if svc.rate <= 0:
                count = 0
            else:
                rng = np.random.Generator(np.random.PCG64([seed, slot, n, i]))
                count = int(rng.poisson(svc.rate))
            out[(server.id, svc.id, svc.preferred_model)] = count
    return out


@dataclass(frozen=True)
class SlotMetrics:
    slot: int
    cost: CostBreakdown
    cache: Mapping[str, tuple[Pair, ...]]
    context_total: float  # sum of K over all servers and pairs, after the update
    requests: float
    edge_served: float
    cloud_served: float
    served_pairs: int = 0  # pairs with a nonzero edge-served count this slot

    def to_dict(self) -> dict:
        return {
            "slot": self.slot,
            "cost": self.cost.as_dict(),
            "cache": {n: [list(p) for p in pairs] for n, pairs in self.cache.items()},
            "context_total": self.context_total,
            "requests": self.requests,
            "edge_served": self.edge_served,
            "cloud_served": self.cloud_served,
            "served_pairs": self.served_pairs,
        }


@dataclass
class SimulationState:
    slot: int
    context: dict[str, ContextState]
    cache: dict[str, list[Pair]]
    policy_state: PolicyState
    decision: SlotDecision | None = None
    routed: Mapping[Triple, float] = field(default_factory=dict)  # last slot's requests, per executing model

    @classmethod
    def initial(cls, scenario: ScenarioConfig) -> "SimulationState":
        ids = [s.id for s in scenario.servers]
        return cls(slot=0, context={n: ContextState() for n in ids}, cache={n: [] for n in ids},
                   policy_state=PolicyState())


@dataclass(frozen=True)
class RunReport:
    policy: str
    seed: int
    per_slot: tuple[SlotMetrics, ...]
    average_total: float
    component_averages: Mapping[str, float]
    switching_share: float

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "seed": self.seed,
            "per_slot": [m.to_dict() for m in self.per_slot],
            "average_total": self.average_total,
            "component_averages": dict(self.component_averages),
            "switching_share": self.switching_share,
        }


def _vanish_map(scenario: ScenarioConfig) -> dict[Pair, float]:
    out = {}
    for svc in scenario.services:
        for m in scenario.group_members(svc.preferred_model):
            out[(svc.id, m.id)] = scenario.vanish(svc, m.id)
    return out


def _available_memory(scenario: ScenarioConfig, server, requests, prev: SlotDecision | None) -> float:
    rho = scenario.costs.runtime_mem_per_request
    if rho == 0 or prev is None:
        return server.memory_gb
    reserved = math.fsum(r * prev.edge_fraction(t) * scenario.model(t[2]).size * rho
                         for t, r in requests.items() if t[0] == server.id)
    return max(0.0, server.memory_gb - reserved)


def check_constraints(decision: SlotDecision, routed: Mapping[Triple, float],
                      scenario: ScenarioConfig) -> None:
    """Raise :class:`ConstraintViolation` if memory, execution or energy limits are broken."""
    for server in scenario.servers:
        pairs = decision.cache.get(server.id, frozenset())
        used = math.fsum(scenario.model(m).size for _, m in pairs)
        if used > server.memory_gb * (1 + _REL_TOL):
            raise ConstraintViolation(
                f"memory: server {server.id} caches {used} GB > {server.memory_gb} GB")
        energy = 0.0
        for t, r in routed.items():
            if t[0] != server.id:
                continue
            b = decision.offload.get(t, 0.0)
            if not 0.0 <= b <= 1.0:
                raise ConstraintViolation(f"offload fraction b={b} outside [0, 1] at {t}")
            if r > 0 and b > 0 and not decision.cached(*t):
                raise ConstraintViolation(f"execution: b={b} > a=0 at {t}")
            energy += server.energy_per_request(scenario.model(t[2])) * decision.edge_fraction(t) * r
        budget = server.energy_budget_j
        if energy > budget * (1 + _REL_TOL) + 1e-12:
            raise ConstraintViolation(
                f"energy: server {server.id} uses {energy} J > {budget} J")


def step(state: SimulationState, scenario: ScenarioConfig, kind: PolicyKind, seed: int,
         vanish: Mapping[Pair, float] | None = None) -> tuple[SimulationState, SlotMetrics]:
    """Advance one slot: requests, caching, offloading, checks, cost, context, bookkeeping."""
    kind = PolicyKind.parse(kind)
    if vanish is None:
        vanish = _vanish_map(scenario)
    t = state.slot + 1
    requests = generate_requests(seed, scenario, t)
    models = scenario.model_index
    windows = {m.id: m.window for m in scenario.models}

    caches: dict[str, list[Pair]] = {}
    routed: dict[Triple, float] = {}
    offload: dict[Triple, float] = {}
    for server in scenario.servers:
        n = server.id
        prev = state.cache[n]
        ctx = state.context[n]
        if kind is PolicyKind.CLOUD_ONLY or server.energy_budget_j <= 0:
            new, _ = pol.decide_cloud_only(requests)
        elif kind is PolicyKind.LEAST_CONTEXT:
            cap = _available_memory(scenario, server, requests, state.decision)
            new = pol.decide_cache_lc(ctx, requests, prev, server, models, capacity=cap)
        elif kind is PolicyKind.FIFO:
            new = pol.decide_cache_fifo(state.policy_state, requests, prev, server, models)
        else:
            new = pol.decide_cache_lfu(state.policy_state, requests, prev, server, models)
        caches[n] = new
        r_n = pol.route_requests(new, requests, ctx, scenario, server)
        routed.update(r_n)
        offload.update(pol.decide_offloading(new, r_n, ctx, scenario, server))

    decision = SlotDecision(cache={n: frozenset(p) for n, p in caches.items()}, offload=offload)
    check_constraints(decision, routed, scenario)

    new_context = {}
    edge_total, cloud_total = [], []
    for server in scenario.servers:
        n = server.id
        served = {}
        for tr, r in routed.items():
            if tr[0] != n:
                continue
            e = decision.edge_fraction(tr) * r
            edge_total.append(e)
            cloud_total.append(r - e)
            if e > 0:
                served[(tr[1], tr[2])] = e
        new_context[n] = update_context(state.context[n], served, vanish, windows)
        state.policy_state.load_order[n] = list(caches[n])
        state.policy_state.record_served(n, served)

    # accuracy is charged at the counters the slot ends with
    cost = slot_cost(state.decision, decision, routed, new_context, scenario)

    new_state = SimulationState(slot=t, context=new_context, cache=caches,
                                policy_state=state.policy_state, decision=decision, routed=routed)
    metrics = SlotMetrics(
        slot=t, cost=cost,
        cache={n: tuple(sorted(p)) for n, p in caches.items()},
        context_total=math.fsum(c.total() for c in new_context.values()),
        requests=float(sum(requests.values())),
        edge_served=math.fsum(edge_total),
        cloud_served=math.fsum(cloud_total),
        served_pairs=sum(1 for e in edge_total if e > 0),
    )
    return new_state, metrics


def switching_share(per_slot: Sequence[SlotMetrics], tail: float = SWITCHING_TAIL) -> float:
    """Switching cost as a share of total cost over the last ``tail`` fraction of slots."""
    k = max(1, math.ceil(len(per_slot) * tail))
    last = per_slot[-k:]
    total = math.fsum(m.cost.total for m in last)
    if total == 0:
        return 0.0
    return math.fsum(m.cost.switching for m in last) / total


def run(scenario: ScenarioConfig, policy: str | PolicyKind, seed: int | None = None) -> RunReport:
    kind = PolicyKind.parse(policy)
    seed = scenario.seed if seed is None else seed
    state = SimulationState.initial(scenario)
    vanish = _vanish_map(scenario)
    per_slot = []
    for _ in range(scenario.horizon):
        state, metrics = step(state, scenario, kind, seed, vanish)
        per_slot.append(metrics)
    breakdowns = [m.cost for m in per_slot]
    comps = {name: math.fsum(getattr(b, name) for b in breakdowns) / len(breakdowns)
             for name in CostBreakdown.COMPONENTS}
    return RunReport(policy=kind.value, seed=seed, per_slot=tuple(per_slot),
                     average_total=average_objective(breakdowns), component_averages=comps,
                     switching_share=switching_share(per_slot))


# --------------------------------------------------------------------------
# sweeps

def materialize(scenario: ScenarioConfig, axis: str, value: float) -> ScenarioConfig:
    """Copy of ``scenario`` with one axis set to ``value``, re-validated.

    ``num_services`` truncates the service list or extends it round-robin
    with renamed copies; ``vanish`` sets every model's factor and drops
    per-service overrides; ``gpu_count`` applies to every server.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; valid axes: {', '.join(SWEEP_AXES)}")
    replace = dataclasses.replace
    if axis == "horizon":
        out = replace(scenario, horizon=_as_int(axis, value))
    elif axis == "num_services":
        k = _as_int(axis, value)
        base = scenario.services
        if not base:
            raise ValueError("cannot replicate an empty service list")
        services = []
        for j in range(k):
            svc = base[j % len(base)]
            if j >= len(base):
                svc = replace(svc, id=f"{svc.id}-r{j // len(base)}")
            services.append(svc)
        out = replace(scenario, services=tuple(services))
    elif axis == "gpu_count":
        k = _as_int(axis, value)
        out = replace(scenario, servers=tuple(replace(s, gpu_count=k) for s in scenario.servers))
    elif axis == "vanish":
        out = replace(scenario,
                      models=tuple(replace(m, vanish=float(value)) for m in scenario.models),
                      services=tuple(replace(s, vanish_override=None) for s in scenario.services))
    else:
        k = _as_int(axis, value)
        out = replace(scenario, models=tuple(replace(m, window=k) for m in scenario.models))
    return validate_scenario(out)


def _as_int(axis: str, value: float) -> int:
    if float(value) != int(value):
        raise ValueError(f"sweep axis {axis} needs integer values, got {value}")
    return int(value)


@dataclass(frozen=True)
class SweepRun:
    axis_value: float
    policy: str
    seed: int
    report: RunReport


@dataclass(frozen=True)
class SweepReport:
    axis: str
    values: tuple
    policies: tuple[str, ...]
    seeds: tuple[int, ...]
    runs: tuple[SweepRun, ...] = field(repr=False)

    def select(self, value=None, policy=None) -> list[SweepRun]:
        return [r for r in self.runs
                if (value is None or r.axis_value == value) and (policy is None or r.policy == policy)]

    def summary(self) -> list[dict]:
        """Mean and standard deviation across seeds per (value, policy)."""
        rows = []
        for v in self.values:
            for p in self.policies:
                reports = [r.report for r in self.select(v, p)]
                row = {"axis_value": v, "policy": p, "seeds": len(reports)}
                series = {"total": [r.average_total for r in reports]}
                for name in CostBreakdown.COMPONENTS:
                    series[name] = [r.component_averages[name] for r in reports]
                for name, xs in series.items():
                    arr = np.asarray(xs)
                    row[f"{name}_mean"] = float(arr.mean())
                    row[f"{name}_std"] = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
                rows.append(row)
        return rows


def sweep(scenario: ScenarioConfig, policies: Iterable[str | PolicyKind], axis: str,
          values: Sequence[float], seeds: Sequence[int]) -> SweepReport:
    kinds = [PolicyKind.parse(p) for p in policies]
    values, seeds = tuple(values), tuple(seeds)
    if not values:
        raise ValueError("sweep needs at least one axis value")
    if not seeds:
        raise ValueError("sweep needs at least one seed")
    if not kinds:
        raise ValueError("sweep needs at least one policy")
    runs = []
    for v in values:
        sc = materialize(scenario, axis, v)
        for kind in kinds:
            for s in seeds:
                runs.append(SweepRun(v, kind.value, s, run(sc, kind, s)))
    return SweepReport(axis=axis, values=values, policies=tuple(k.value for k in kinds),
                       seeds=seeds, runs=tuple(runs))
