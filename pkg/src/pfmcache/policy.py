"""Per-slot caching and offloading decisions.

Caching policies return the new cache of one server as a list of
``(service, model)`` pairs in load order (oldest first). Offloading works on
the cache that results and fills the server's energy budget greedily.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .catalog import ModelProfile, ScenarioConfig, ServerProfile
from .context import ContextState, Pair, accuracy, effective_examples, next_examples
from .cost import Triple

# Per pending request; lets demanded zero-context pairs into free memory
# without ever outranking a pair with K >= 1.
ADMISSION_EPSILON = 1e-6

KNAPSACK_EXACT_MAX_ITEMS = 25


class PolicyKind(enum.Enum):
    LEAST_CONTEXT = "lc"
    FIFO = "fifo"
    LFU = "lfu"
    CLOUD_ONLY = "cloud"

    @classmethod
    def parse(cls, name: "str | PolicyKind") -> "PolicyKind":
        if isinstance(name, PolicyKind):
            return name
        key = name.strip().lower()
        for kind in cls:
            if key in (kind.value, kind.name.lower()):
                return kind
        valid = ", ".join(k.value for k in cls)
        raise ValueError(f"unknown policy {name!r}; valid names: {valid}")


@dataclass
class PolicyState:
    """Baseline bookkeeping for one run, per server."""

    load_order: dict[str, list[Pair]] = field(default_factory=dict)
    hit_counts: dict[str, dict[Pair, float]] = field(default_factory=dict)

    def record_served(self, server: str, served: Mapping[Pair, float]) -> None:
        counts = self.hit_counts.setdefault(server, {})
        for pair, n in served.items():
            if n > 0:
                counts[pair] = counts.get(pair, 0.0) + n


# --------------------------------------------------------------------------
# knapsack

def knapsack_exact(values: Sequence[float], weights: Sequence[float],
                   capacity: float) -> tuple[tuple[int, ...], float]:
    """Optimal 0/1 knapsack by exhaustive enumeration.

    Returns ``(indices, value)``. Among optimal subsets the one with the
    smallest enumeration mask is returned. Intended as a test oracle, so the
    item count is capped at 25.
    """
    n = len(values)
    if n != len(weights):
        raise ValueError("values and weights differ in length")
    if n > KNAPSACK_EXACT_MAX_ITEMS:
        raise ValueError(f"knapsack_exact handles at most {KNAPSACK_EXACT_MAX_ITEMS} items, got {n}")
    if any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")
    if n == 0 or capacity <= 0:
        return (), 0.0
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    bits = np.arange(n, dtype=np.int64)
    best_value, best_mask = 0.0, 0
    chunk = 1 << 16
    for start in range(0, 1 << n, chunk):
        masks = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        take = ((masks[:, None] >> bits) & 1).astype(float)
        tot_w = take @ w
        tot_v = np.where(tot_w <= capacity, take @ v, -np.inf)
        k = int(np.argmax(tot_v))
        if tot_v[k] > best_value:
            best_value, best_mask = float(tot_v[k]), int(masks[k])
    chosen = tuple(i for i in range(n) if best_mask >> i & 1)
    return chosen, best_value


def knapsack_greedy(values: Sequence[float], weights: Sequence[float],
                    capacity: float) -> tuple[int, ...]:
    """Density-ordered greedy with the best-single-item fallback.

    Items are scanned in descending value/weight (ties by index) and taken
    whenever they still fit. If one feasible item alone beats the packed
    set, that item is returned instead; this guarantees half the optimum.
    """
    order = sorted(range(len(values)), key=lambda k: (-values[k] / weights[k], k))
    chosen, used, packed = [], 0.0, 0.0
    for k in order:
        if values[k] <= 0:
            continue
        if used + weights[k] <= capacity:
            chosen.append(k)
            used += weights[k]
            packed += values[k]
    single = max((k for k in range(len(values)) if weights[k] <= capacity and values[k] > 0),
                 key=lambda k: (values[k], -k), default=None)
    if single is not None and values[single] > packed:
        return (single,)
    return tuple(sorted(chosen))


# --------------------------------------------------------------------------
# caching

def _pending(requests: Mapping[Triple, float], server: str) -> dict[Pair, float]:
    return {(t[1], t[2]): r for t, r in requests.items() if t[0] == server and r > 0}


def decide_cache_lc(context: ContextState, requests: Mapping[Triple, float],
                    prev_cache: Sequence[Pair], server: ServerProfile,
                    models: Mapping[str, ModelProfile],
                    capacity: float | None = None) -> list[Pair]:
    """Least Context: keep the pairs with the most effective examples.

    Solves max sum(K) s.t. sum(size) <= capacity with :func:`knapsack_greedy`
    over every pair that has context, pending requests, or is already
    cached. Previously cached pairs the knapsack leaves out are kept if they
    still fit, so nothing is evicted unless memory is needed.
    """
    cap = server.memory_gb if capacity is None else capacity
    pending = _pending(requests, server.id)
    candidates = set(pending) | set(prev_cache)
    candidates |= {p for p, k in context.counters.items() if k > 0 and p[1] in models}
    items = sorted(candidates)
    values = [effective_examples(context, *p) + ADMISSION_EPSILON * pending.get(p, 0.0) for p in items]
    weights = [models[p[1]].size for p in items]
    picked = {items[k] for k in knapsack_greedy(values, weights, cap)}

    used = sum(models[p[1]].size for p in picked)
    kept = []
    for p in prev_cache:
        if p in picked:
            kept.append(p)
        elif used + models[p[1]].size <= cap:
            kept.append(p)
            used += models[p[1]].size
    new = sorted(picked - set(kept), key=lambda p: (-values[items.index(p)], p))
    return kept + new


def _admit(cache: list[Pair], requests: Mapping[Triple, float], server: ServerProfile,
           models: Mapping[str, ModelProfile], victim_key) -> list[Pair]:
    cache = list(cache)
    pending = _pending(requests, server.id)
    cap = server.memory_gb
    used = sum(models[p[1]].size for p in cache)
    need = sorted((p for p in pending if p not in cache), key=lambda p: (pending[p], p))
    for pair in need:
        size = models[pair[1]].size
        if size > cap:
            continue
        while used + size > cap:
            victim = min(range(len(cache)), key=lambda k: victim_key(cache[k], k))
            used -= models[cache.pop(victim)[1]].size
        cache.append(pair)
        used += size
    return cache


def decide_cache_fifo(state: PolicyState, requests: Mapping[Triple, float],
                      prev_cache: Sequence[Pair], server: ServerProfile,
                      models: Mapping[str, ModelProfile]) -> list[Pair]:
    """Admit missed pairs (smallest demand first), evicting the oldest load."""
    order = state.load_order.get(server.id, list(prev_cache))
    return _admit(order, requests, server, models, lambda pair, pos: pos)


def decide_cache_lfu(state: PolicyState, requests: Mapping[Triple, float],
                     prev_cache: Sequence[Pair], server: ServerProfile,
                     models: Mapping[str, ModelProfile]) -> list[Pair]:
    """As FIFO, but evict the fewest cumulative hits (this slot's demand included), oldest first on ties."""
    order = state.load_order.get(server.id, list(prev_cache))
    hits = state.hit_counts.get(server.id, {})
    pending = _pending(requests, server.id)
    return _admit(order, requests, server, models,
                  lambda pair, pos: (hits.get(pair, 0.0) + pending.get(pair, 0.0), pos))


def decide_cloud_only(requests: Mapping[Triple, float]) -> tuple[list[Pair], dict[Triple, float]]:
    return [], {}


# --------------------------------------------------------------------------
# routing and offloading

def edge_marginal_cost(model: ModelProfile, k: float, server: ServerProfile,
                       scenario: ScenarioConfig) -> float:
    """Edge cost of serving one request on ``model`` with ``k`` examples in context."""
    c = scenario.costs
    return (c.trans_unit
            + c.compute_coeff * model.flops_per_request / server.gflops
            + c.acc_coeff * (1.0 - accuracy(model, k)))


def served_marginal_cost(model: ModelProfile, service: str, requests: float, fraction: float,
                         context: ContextState, scenario: ScenarioConfig,
                         server: ServerProfile) -> float:
    """Per-request edge cost when ``fraction`` of ``requests`` is served on ``model``.

    Accuracy is read at the counter the pair ends the slot with, so the
    requests served now count as in-context examples for this slot.
    """
    k = next_examples(effective_examples(context, service, model.id), fraction * requests,
                      scenario.vanish(service, model.id), model.window)
    return edge_marginal_cost(model, k, server, scenario)


def route_requests(cache: Sequence[Pair], requests: Mapping[Triple, float],
                   context: ContextState, scenario: ScenarioConfig,
                   server: ServerProfile) -> dict[Triple, float]:
    """Move each request onto the model that will execute it.

    A request whose preferred pair is not cached goes to the cheapest cached
    pair of the same service within the preferred model's group; with no such
    pair it stays put and ends up in the cloud.
    """
    cached = set(cache)
    routed: dict[Triple, float] = {}
    for (n, i, m), r in sorted(requests.items()):
        if n != server.id:
            continue
        target = m
        if (i, m) not in cached:
            peers = [p for p in scenario.group_members(m) if p.id != m and (i, p.id) in cached]
            if peers:
                best = min(peers, key=lambda p: (
                    served_marginal_cost(p, i, r, 1.0, context, scenario, server), p.id))
                target = best.id
        key = (n, i, target)
        routed[key] = routed.get(key, 0) + r
    return routed


def decide_offloading(cache: Sequence[Pair], requests: Mapping[Triple, float],
                      context: ContextState, scenario: ScenarioConfig,
                      server: ServerProfile) -> dict[Triple, float]:
    """Edge fractions ``b`` for one server, given its cache.

    A pair is worth serving when its full-service edge cost per request is
    at most the cloud price. Worthwhile pairs are filled into the energy
    budget by saving per joule; the pair at the boundary gets the fraction
    that exhausts the budget, unless serving only that fraction would cost
    more than the cloud, in which case it is skipped and the scan goes on.
    """
    cached = set(cache)
    candidates = []
    for t, r in sorted(requests.items()):
        if t[0] != server.id or r <= 0 or (t[1], t[2]) not in cached:
            continue
        model = scenario.model(t[2])
        cloud = scenario.cloud_unit(t[2])
        saving = cloud - served_marginal_cost(model, t[1], r, 1.0, context, scenario, server)
        if saving < 0:
            continue
        e = server.energy_per_request(model)
        candidates.append((-saving / e, t, r, e, model, cloud))
    candidates.sort(key=lambda c: (c[0], c[1]))

    b: dict[Triple, float] = {}
    budget = server.energy_budget_j
    for _, t, r, e, model, cloud in candidates:
        need = e * r
        if need <= budget:
            b[t] = 1.0
            budget -= need
            continue
        frac = budget / need if budget > 0 else 0.0
        if frac > 0 and served_marginal_cost(model, t[1], r, frac, context, scenario, server) <= cloud:
            b[t] = frac
            budget = 0.0
        else:
            b[t] = 0.0
    return b
