"""Age-of-Context bookkeeping and the in-context accuracy curve."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .catalog import ModelProfile

Pair = tuple[str, str]  # (service id, model id)


@dataclass(frozen=True)
class ContextState:
    """Effective in-context example counts K, keyed by (service, model).

    Pairs never seen are implicitly zero. The state is a value: updates
    return a new instance.
    """

    counters: Mapping[Pair, float] = field(default_factory=dict)

    def total(self) -> float:
        return math.fsum(self.counters.values())


def next_examples(k: float, served: float, vanish: float, window: int) -> float:
    """One step of the counter recurrence for a single pair."""
    return min(float(window), max(0.0, k + served - vanish))


def update_context(prev: ContextState, served: Mapping[Pair, float],
                   vanish: Mapping[Pair, float], windows: Mapping[str, int]) -> ContextState:
    """Advance every counter one slot.

    ``K' = min(w, max(0, K + served - nu))`` for every pair that appears in
    ``prev``, ``served`` or ``vanish``. Pairs with no entry in ``served``
    still decay. ``vanish`` defaults to 0 for pairs it does not list.
    """
    for (_, model_id) in served:
        if model_id not in windows:
            raise KeyError(f"unknown model id {model_id!r} in served counts")
    keys = set(prev.counters) | set(served) | set(vanish)
    out = {}
    for pair in sorted(keys):
        k = next_examples(prev.counters.get(pair, 0.0), served.get(pair, 0.0),
                          vanish.get(pair, 0.0), windows[pair[1]])
        if k > 0.0 or pair in prev.counters:
            out[pair] = k
    return ContextState(out)


def effective_examples(state: ContextState, service: str, model: str) -> float:
    return state.counters.get((service, model), 0.0)


def accuracy(model: ModelProfile, k: float) -> float:
    """In-context accuracy as a fraction in [0, 1].

    The logarithmic fit is only applied for ``k > 0``; ``k == 0`` returns
    the zero-shot accuracy, which also keeps negative exponents finite.
    """
    if k <= 0.0:
        return min(1.0, max(0.0, model.acc_zero / 100.0))
    if model.acc_one_gain == 0.0:
        pct = model.acc_zero
    else:
        try:
            power = k**model.alpha
        except OverflowError:  # tiny k with a negative exponent
            power = math.inf
        pct = model.acc_zero + model.acc_one_gain * math.log2(1.0 + power)
    return min(1.0, max(0.0, pct / 100.0))
