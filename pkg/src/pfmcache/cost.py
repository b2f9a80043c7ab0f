"""Per-slot cost components and the time-averaged objective.

Every function takes the slot's :class:`SlotDecision` and a request mapping
``(server, service, model) -> count``. The request mapping is expected to be
already *routed*: when a request is served by a group substitute, its count
sits on the substitute's triple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .catalog import ModelProfile, ScenarioConfig, ServerProfile
from .context import ContextState, Pair, accuracy, effective_examples

Triple = tuple[str, str, str]  # (server, service, model)


@dataclass(frozen=True)
class CostBreakdown:
    switching: float = 0.0
    transmission: float = 0.0
    computing: float = 0.0
    accuracy_loss: float = 0.0
    cloud: float = 0.0
    total: float = 0.0

    COMPONENTS = ("switching", "transmission", "computing", "accuracy_loss", "cloud")

    @classmethod
    def assemble(cls, switching, transmission, computing, accuracy_loss, cloud) -> "CostBreakdown":
        total = switching + transmission + computing + accuracy_loss + cloud
        return cls(switching, transmission, computing, accuracy_loss, cloud, total)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in (*self.COMPONENTS, "total")}


@dataclass(frozen=True)
class SlotDecision:
    """Caching bits (as the set of cached pairs per server) and offload fractions."""

    cache: Mapping[str, frozenset[Pair]] = field(default_factory=dict)
    offload: Mapping[Triple, float] = field(default_factory=dict)

    def cached(self, server: str, service: str, model: str) -> int:
        return int((service, model) in self.cache.get(server, frozenset()))

    def edge_fraction(self, triple: Triple) -> float:
        """a * b for one triple."""
        if not self.cached(*triple):
            return 0.0
        return self.offload.get(triple, 0.0)


def _sorted_items(requests: Mapping[Triple, float]) -> Iterable[tuple[Triple, float]]:
    return sorted(requests.items())


def switching_cost(prev_cache: Mapping[str, Iterable[Pair]], new_cache: Mapping[str, Iterable[Pair]],
                   switch_lambda: float) -> float:
    """``lambda`` per newly loaded pair, summed over servers. Evictions are free."""
    loads = 0
    for server, pairs in new_cache.items():
        loads += len(set(pairs) - set(prev_cache.get(server, ())))
    return switch_lambda * loads


def transmission_cost(decision: SlotDecision, requests: Mapping[Triple, float], trans_unit: float) -> float:
    return math.fsum(trans_unit * r * decision.edge_fraction(t) for t, r in _sorted_items(requests))


def computing_cost(decision: SlotDecision, requests: Mapping[Triple, float],
                   models: Mapping[str, ModelProfile], server: ServerProfile,
                   compute_coeff: float) -> float:
    """Inference latency of the edge-served share on one server, in cost units."""
    f = server.gflops
    return math.fsum(
        compute_coeff * r * decision.edge_fraction(t) * (models[t[2]].flops_per_request / f)
        for t, r in _sorted_items(requests) if t[0] == server.id)


def accuracy_cost(decision: SlotDecision, requests: Mapping[Triple, float],
                  context: Mapping[str, ContextState], models: Mapping[str, ModelProfile],
                  acc_coeff: float) -> float:
    """``acc_coeff * (1 - A(K))`` per edge-served request, using the executing model's curve."""
    total = []
    for t, r in _sorted_items(requests):
        ab = decision.edge_fraction(t)
        if ab == 0.0 or r == 0:
            continue
        state = context.get(t[0], ContextState())
        a = accuracy(models[t[2]], effective_examples(state, t[1], t[2]))
        total.append(acc_coeff * (1.0 - a) * r * ab)
    return math.fsum(total)


def cloud_cost(decision: SlotDecision, requests: Mapping[Triple, float], cloud_unit) -> float:
    """Pay-per-request cloud cost for every request not served at the edge.

    ``cloud_unit`` is either a scalar or a callable ``model_id -> price``.
    """
    price = cloud_unit if callable(cloud_unit) else (lambda _m: cloud_unit)
    return math.fsum(price(t[2]) * (1.0 - decision.edge_fraction(t)) * r
                     for t, r in _sorted_items(requests))


def slot_cost(prev_decision: SlotDecision | None, decision: SlotDecision,
              requests: Mapping[Triple, float], context: Mapping[str, ContextState],
              scenario: ScenarioConfig) -> CostBreakdown:
    c = scenario.costs
    prev_cache = prev_decision.cache if prev_decision is not None else {}
    models = scenario.model_index
    return CostBreakdown.assemble(
        switching=switching_cost(prev_cache, decision.cache, c.switch_lambda),
        transmission=transmission_cost(decision, requests, c.trans_unit),
        computing=math.fsum(computing_cost(decision, requests, models, s, c.compute_coeff)
                            for s in scenario.servers),
        accuracy_loss=accuracy_cost(decision, requests, context, models, c.acc_coeff),
        cloud=cloud_cost(decision, requests, scenario.cloud_unit),
    )


def average_objective(breakdowns: Sequence[CostBreakdown]) -> float:
    if not breakdowns:
        raise ValueError("average_objective needs at least one slot")
    return math.fsum(b.total for b in breakdowns) / len(breakdowns)
