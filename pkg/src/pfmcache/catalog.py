"""Static configuration: model, service and server profiles, cost coefficients.

Scenario documents are plain JSON-compatible mappings with the top-level keys
``horizon, seed, servers, models, services, costs``. :func:`validate_scenario`
turns one into an immutable :class:`ScenarioConfig`; :meth:`ScenarioConfig.to_dict`
goes the other way.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Mapping, Optional, Sequence


class ScenarioError(ValueError):
    """A scenario document is malformed or violates a field bound."""


@dataclass(frozen=True)
class ModelProfile:
    id: str
    group: str
    size: float  # GB of GPU memory per cached copy
    flops_per_request: float  # GFLOPs
    window: int
    acc_zero: float  # percent
    acc_one_gain: float  # percent
    alpha: float
    vanish: float
    cloud_unit: Optional[float] = None  # overrides CostCoefficients.cloud_unit

    def peak_accuracy(self) -> float:
        """Accuracy (percent) at a full context window, before clamping."""
        if self.window < 1:
            return self.acc_zero
        return self.acc_zero + self.acc_one_gain * math.log2(1.0 + self.window**self.alpha)


@dataclass(frozen=True)
class ServiceProfile:
    id: str
    preferred_model: str
    rate: float = 1.0
    vanish_override: Optional[float] = None


@dataclass(frozen=True)
class ServerProfile:
    id: str
    gpu_count: int
    gpu_memory_gb: float
    gpu_gflops: float
    power_w: float
    efficiency_gflops_per_w: float
    slot_seconds: float = 1.0

    @property
    def memory_gb(self) -> float:
        return self.gpu_count * self.gpu_memory_gb

    @property
    def gflops(self) -> float:
        return self.gpu_count * self.gpu_gflops

    @property
    def energy_budget_j(self) -> float:
        """Joules available for inference in one slot."""
        return self.power_w * self.slot_seconds

    def energy_per_request(self, model: ModelProfile) -> float:
        """Joules consumed by one request on ``model``."""
        return model.flops_per_request / self.efficiency_gflops_per_w


@dataclass(frozen=True)
class CostCoefficients:
    switch_lambda: float = 0.0001
    trans_unit: float = 0.0001
    cloud_unit: float = 0.0015
    acc_coeff: float = 0.01
    compute_coeff: float = 1.0
    runtime_mem_per_request: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    horizon: int
    servers: tuple[ServerProfile, ...]
    models: tuple[ModelProfile, ...]
    services: tuple[ServiceProfile, ...]
    costs: CostCoefficients
    seed: int = 0
    _model_index: dict = field(default=None, init=False, repr=False, compare=False)
    _service_index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_model_index", {m.id: m for m in self.models})
        object.__setattr__(self, "_service_index", {s.id: s for s in self.services})

    def service(self, service_id: str) -> ServiceProfile:
        return self._service_index[service_id]

    def model(self, model_id: str) -> ModelProfile:
        return self._model_index[model_id]

    @property
    def model_index(self) -> dict[str, ModelProfile]:
        return self._model_index

    def group_members(self, model_id: str) -> list[ModelProfile]:
        group = self.model(model_id).group
        return [m for m in self.models if m.group == group]

    def vanish(self, service: ServiceProfile | str, model_id: str) -> float:
        if isinstance(service, str):
            service = self.service(service)
        if service.vanish_override is not None:
            return service.vanish_override
        return self.model(model_id).vanish

    def cloud_unit(self, model_id: str) -> float:
        override = self.model(model_id).cloud_unit
        return self.costs.cloud_unit if override is None else override

    def to_dict(self) -> dict[str, Any]:
        def strip(d):
            return {k: v for k, v in d.items() if v is not None}

        return {
            "horizon": self.horizon,
            "seed": self.seed,
            "servers": [asdict(s) for s in self.servers],
            "models": [strip(asdict(m)) for m in self.models],
            "services": [strip(asdict(s)) for s in self.services],
            "costs": asdict(self.costs),
        }


# --------------------------------------------------------------------------
# validation

def _require(cond: bool, where: str, message: str) -> None:
    if not cond:
        raise ScenarioError(f"{where}: {message}")


def _number(raw: Mapping, key: str, where: str, default: Any = ..., integer=False):
    if key not in raw:
        if default is ...:
            raise ScenarioError(f"{where}: missing field '{key}'")
        return default
    value = raw[key]
    if value is None and default is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}.{key}: expected a number, got {value!r}")
    if integer:
        if isinstance(value, float):
            if not value.is_integer():
                raise ScenarioError(f"{where}.{key}: expected an integer, got {value!r}")
            value = int(value)
        return value
    if not math.isfinite(value):
        raise ScenarioError(f"{where}.{key}: must be finite, got {value!r}")
    return float(value)


def _string(raw: Mapping, key: str, where: str) -> str:
    if key not in raw:
        raise ScenarioError(f"{where}: missing field '{key}'")
    value = raw[key]
    _require(isinstance(value, str) and value != "", f"{where}.{key}", "expected a non-empty string")
    return value


def _check_keys(raw: Mapping, cls, where: str) -> None:
    allowed = {f.name for f in fields(cls) if not f.name.startswith("_")}
    unknown = set(raw) - allowed
    _require(not unknown, where, f"unknown field(s) {sorted(unknown)}")


def _mapping_list(raw: Mapping, key: str) -> list[Mapping]:
    if key not in raw:
        raise ScenarioError(f"scenario: missing field '{key}'")
    items = raw[key]
    _require(isinstance(items, (list, tuple)), f"scenario.{key}", "expected a list")
    for k, item in enumerate(items):
        _require(isinstance(item, Mapping), f"scenario.{key}[{k}]", "expected an object")
    return list(items)


def _parse_model(raw: Mapping, where: str) -> ModelProfile:
    _check_keys(raw, ModelProfile, where)
    m = ModelProfile(
        id=_string(raw, "id", where),
        group=_string(raw, "group", where),
        size=_number(raw, "size", where),
        flops_per_request=_number(raw, "flops_per_request", where),
        window=_number(raw, "window", where, integer=True),
        acc_zero=_number(raw, "acc_zero", where),
        acc_one_gain=_number(raw, "acc_one_gain", where),
        alpha=_number(raw, "alpha", where),
        vanish=_number(raw, "vanish", where),
        cloud_unit=_number(raw, "cloud_unit", where, default=None),
    )
    _require(m.size > 0, f"{where}.size", f"must satisfy size > 0, got {m.size}")
    _require(m.flops_per_request > 0, f"{where}.flops_per_request",
             f"must satisfy flops_per_request > 0, got {m.flops_per_request}")
    _require(m.window >= 0, f"{where}.window", f"must satisfy window >= 0, got {m.window}")
    _require(m.acc_zero >= 0, f"{where}.acc_zero", f"must satisfy acc_zero >= 0, got {m.acc_zero}")
    if m.alpha >= 0 and m.window >= 1:
        peak = m.peak_accuracy()
        _require(peak <= 100.0, f"{where}.acc_one_gain",
                 f"accuracy at full window is {peak:.6g}%, must be <= 100")
    _require(m.vanish >= 0, f"{where}.vanish", f"must satisfy vanish >= 0, got {m.vanish}")
    if m.cloud_unit is not None:
        _require(m.cloud_unit >= 0, f"{where}.cloud_unit", "must be >= 0")
    return m


def _parse_service(raw: Mapping, where: str) -> ServiceProfile:
    _check_keys(raw, ServiceProfile, where)
    s = ServiceProfile(
        id=_string(raw, "id", where),
        preferred_model=_string(raw, "preferred_model", where),
        rate=_number(raw, "rate", where, default=1.0),
        vanish_override=_number(raw, "vanish_override", where, default=None),
    )
    _require(s.rate >= 0, f"{where}.rate", f"must satisfy rate >= 0, got {s.rate}")
    if s.vanish_override is not None:
        _require(s.vanish_override >= 0, f"{where}.vanish_override", "must be >= 0")
    return s


def _parse_server(raw: Mapping, where: str) -> ServerProfile:
    _check_keys(raw, ServerProfile, where)
    s = ServerProfile(
        id=_string(raw, "id", where),
        gpu_count=_number(raw, "gpu_count", where, integer=True),
        gpu_memory_gb=_number(raw, "gpu_memory_gb", where),
        gpu_gflops=_number(raw, "gpu_gflops", where),
        power_w=_number(raw, "power_w", where),
        efficiency_gflops_per_w=_number(raw, "efficiency_gflops_per_w", where),
        slot_seconds=_number(raw, "slot_seconds", where, default=1.0),
    )
    _require(s.gpu_count > 0, f"{where}.gpu_count", f"must satisfy gpu_count > 0, got {s.gpu_count}")
    _require(s.memory_gb > 0, f"{where}.gpu_memory_gb", "total memory gpu_count * gpu_memory_gb must be > 0")
    _require(s.gpu_gflops > 0, f"{where}.gpu_gflops", "must be > 0")
    _require(s.efficiency_gflops_per_w > 0, f"{where}.efficiency_gflops_per_w", "must be > 0")
    _require(s.slot_seconds > 0, f"{where}.slot_seconds", "must be > 0")
    # power_w == 0 is a legal "no edge execution" server
    _require(s.power_w >= 0, f"{where}.power_w", f"must satisfy power_w >= 0, got {s.power_w}")
    if s.power_w == 0:
        warnings.warn(f"{where}: power_w = 0, server cannot execute any request", stacklevel=3)
    return s


def _parse_costs(raw: Mapping) -> CostCoefficients:
    where = "scenario.costs"
    _require(isinstance(raw, Mapping), where, "expected an object")
    _check_keys(raw, CostCoefficients, where)
    defaults = CostCoefficients()
    values = {f.name: _number(raw, f.name, where, default=getattr(defaults, f.name))
              for f in fields(CostCoefficients)}
    for name, value in values.items():
        _require(value >= 0, f"{where}.{name}", f"must be >= 0, got {value}")
    return CostCoefficients(**values)


def validate_scenario(raw: Mapping[str, Any] | ScenarioConfig) -> ScenarioConfig:
    """Validate a scenario document and return the immutable config.

    Raises :class:`ScenarioError` naming the offending field on any structural
    problem, bound violation or dangling model reference.
    """
    if isinstance(raw, ScenarioConfig):
        raw = raw.to_dict()
    if not isinstance(raw, Mapping):
        raise ScenarioError("scenario: expected a top-level object")
    unknown = set(raw) - {"horizon", "seed", "servers", "models", "services", "costs"}
    _require(not unknown, "scenario", f"unknown field(s) {sorted(unknown)}")

    horizon = _number(raw, "horizon", "scenario", integer=True)
    _require(horizon > 0, "scenario.horizon", f"must satisfy horizon > 0, got {horizon}")
    seed = _number(raw, "seed", "scenario", default=0, integer=True)
    _require(seed >= 0, "scenario.seed", "must be an unsigned integer")

    models = tuple(_parse_model(m, f"scenario.models[{k}]")
                   for k, m in enumerate(_mapping_list(raw, "models")))
    _require(len(models) > 0, "scenario.models", "at least one model is required")
    ids = [m.id for m in models]
    _require(len(set(ids)) == len(ids), "scenario.models", "duplicate model id")

    services = tuple(_parse_service(s, f"scenario.services[{k}]")
                     for k, s in enumerate(_mapping_list(raw, "services")))
    sids = [s.id for s in services]
    _require(len(set(sids)) == len(sids), "scenario.services", "duplicate service id")
    known = set(ids)
    for k, s in enumerate(services):
        if s.preferred_model not in known:
            raise ScenarioError(
                f"scenario.services[{k}].preferred_model: dangling reference to unknown model "
                f"'{s.preferred_model}'")

    servers = tuple(_parse_server(s, f"scenario.servers[{k}]")
                    for k, s in enumerate(_mapping_list(raw, "servers")))
    _require(len(servers) > 0, "scenario.servers", "at least one server is required")
    nids = [s.id for s in servers]
    _require(len(set(nids)) == len(nids), "scenario.servers", "duplicate server id")

    if "costs" not in raw:
        raise ScenarioError("scenario: missing field 'costs'")
    costs = _parse_costs(raw["costs"])

    smallest = min(m.size for m in models)
    for s in servers:
        if s.memory_gb < smallest:
            warnings.warn(f"server '{s.id}' ({s.memory_gb} GB) cannot hold any model", stacklevel=2)

    return ScenarioConfig(horizon=horizon, servers=servers, models=models,
                          services=services, costs=costs, seed=seed)


# --------------------------------------------------------------------------
# defaults

# Published in-context fits for GPT-3 13B / 175B: (acc_zero, acc_one_gain, alpha) per task.
GPT3_ACCURACY = {
    "translation": {"13b": (15.45, 11.8, 0.0923), "175b": (22.03, 7.59, 0.1565)},
    "arithmetic": {"13b": (3.79, 12.19, -0.0501), "175b": (25.99, 14.72, 0.1813)},
    "superglue": {"13b": (54.40, 9.89, 0.0969), "175b": (58.20, 10.70, 0.1431)},
}

DEFAULT_WINDOW = 2048

# Reconstructed profiles. Sizes are runtime footprints (weights plus
# activation / KV headroom) and flops are per-request workloads; the
# non-GPT accuracy curves are illustrative in-context fits. All of it is
# plain config data.
_RECONSTRUCTED = [
    # id, group, size GB, GFLOPs/request, (acc_zero, acc_one_gain, alpha), vanish
    ("gpt-13b", "gpt", 40.0, 2600.0, None, 0.5),
    ("gpt-175b", "gpt", 400.0, 35000.0, None, 0.5),
    ("uniformer-s", "uniformer", 40.0, 250.0, (86.0, 4.0, 0.15), 0.5),
    ("uniformer-b", "uniformer", 80.0, 500.0, (87.0, 4.0, 0.18), 0.5),
    ("clip-b", "clip", 32.0, 150.0, (85.5, 4.5, 0.14), 0.5),
    ("clip-l", "clip", 64.0, 400.0, (86.5, 4.5, 0.17), 0.5),
]


def default_catalog(task: str = "translation", window: int = DEFAULT_WINDOW) -> list[ModelProfile]:
    """Six models in three substitutable groups (GPTs, Uniformers, CLIPs).

    The two GPT entries take their accuracy curves from the GPT-3 13B/175B
    fits for ``task``; the remaining entries are reconstructions.
    """
    gpt = GPT3_ACCURACY[task]
    out = []
    for mid, group, size, flops, acc, vanish in _RECONSTRUCTED:
        if acc is None:
            acc = gpt[mid.split("-")[1]]
        a0, a1, alpha = acc
        out.append(ModelProfile(id=mid, group=group, size=size, flops_per_request=flops,
                                window=window, acc_zero=a0, acc_one_gain=a1, alpha=alpha,
                                vanish=vanish))
    return out


def default_server(server_id: str = "edge-0") -> ServerProfile:
    return ServerProfile(id=server_id, gpu_count=8, gpu_memory_gb=80.0, gpu_gflops=312000.0,
                         power_w=300.0, efficiency_gflops_per_w=810.0, slot_seconds=1.0)


def default_services(models: Sequence[ModelProfile], count: int = 30,
                     rate: float = 1.0) -> list[ServiceProfile]:
    """``count`` services assigned round-robin over ``models``."""
    return [ServiceProfile(id=f"svc-{k:02d}", preferred_model=models[k % len(models)].id, rate=rate)
            for k in range(count)]


def default_scenario(seed: int = 0) -> ScenarioConfig:
    models = default_catalog()
    return ScenarioConfig(horizon=100, servers=(default_server(),), models=tuple(models),
                          services=tuple(default_services(models)), costs=CostCoefficients(),
                          seed=seed)
