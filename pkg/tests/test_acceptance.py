"""Acceptance gate: ten criteria, each printing one PASS/FAIL line."""

import dataclasses
import math
import random
import time
import warnings

import numpy as np
import pytest

from pfmcache.catalog import GPT3_ACCURACY, ModelProfile, default_scenario, validate_scenario
from pfmcache.cli import main
from pfmcache.context import ContextState, accuracy, next_examples, update_context
from pfmcache.engine import SimulationState, run, step, sweep
from pfmcache.policy import PolicyKind, knapsack_exact, knapsack_greedy

POLICIES = [k.value for k in PolicyKind]
BASELINES = ("fifo", "lfu", "cloud")


def timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def row_model(a0, a1, alpha):
    return ModelProfile(id="m", group="g", size=1.0, flops_per_request=1.0, window=2048,
                        acc_zero=a0, acc_one_gain=a1, alpha=alpha, vanish=0.0)


def test_c01_accuracy_anchors(verdict):
    def check():
        worst = 0.0
        for task in GPT3_ACCURACY.values():
            for a0, a1, alpha in task.values():
                m = row_model(a0, a1, alpha)
                worst = max(worst, abs(accuracy(m, 0) - a0 / 100), abs(accuracy(m, 1) - (a0 + a1) / 100))
        k64 = accuracy(row_model(*GPT3_ACCURACY["translation"]["175b"]), 64)
        return worst, k64

    (worst, k64), secs = timed(check)
    ok = worst <= 1e-9 and abs(k64 - 0.337539) <= 1e-5 and secs < 1
    verdict(1, "accuracy anchors", ok, f"max K=0/1 err {worst:.1e}, A(64)={k64:.8f}, {secs:.2f}s")
    assert ok


def test_c02_recurrence_suite(verdict):
    rng = random.Random(20240201)
    tuples = [(0.0, 0.0, 1.0, 2048), (3.0, 1.0, 10.0, 2048), (2040.0, 20.0, 0.0, 2048),
              (5.0, 5.0, 0.0, 8), (0.0, 7.0, 0.0, 0)]
    while len(tuples) < 1000:
        w = rng.choice([0, 1, 64, 2048, 2**14])
        tuples.append((rng.uniform(0, w), rng.choice([0.0, rng.uniform(0, 50)]),
                       rng.choice([0.0, rng.uniform(0, 20)]), w))

    def check():
        bad = 0
        for k, r, nu, w in tuples:
            expected = min(w, max(0, k + r - nu))
            pair = ("i", "m")
            got = update_context(ContextState({pair: k}), {pair: r}, {pair: nu}, {"m": w}).counters[pair]
            bad += got != expected or next_examples(k, r, nu, w) != expected
        return bad

    bad, secs = timed(check)
    ok = bad == 0 and secs < 1
    verdict(2, "context recurrence suite", ok, f"{len(tuples)} tuples, {bad} mismatches, {secs:.2f}s")
    assert ok


def test_c03_knapsack_oracle(verdict):
    rng = np.random.default_rng(0)

    def check():
        ratios = []
        for _ in range(500):
            n = int(rng.integers(1, 13))
            v = rng.uniform(1, 100, n)
            w = rng.uniform(1, 100, n)
            cap = float(rng.uniform(0.25, 0.75) * w.sum())
            _, best = knapsack_exact(v, w, cap)
            got = float(sum(v[k] for k in knapsack_greedy(list(v), list(w), cap)))
            ratios.append(1.0 if best == 0 else got / best)
        return np.array(ratios)

    ratios, secs = timed(check)
    near = float(np.mean(ratios >= 0.95))
    q = np.quantile(ratios, [0.0, 0.05, 0.25, 0.5])
    dist = f"min {q[0]:.3f} p5 {q[1]:.3f} p25 {q[2]:.3f} median {q[3]:.3f}"
    ok = ratios.min() >= 0.5 and near >= 0.9 and secs < 5
    verdict(3, "knapsack greedy vs exact", ok, f"{near:.1%} within 5% of optimum; {dist}; {secs:.2f}s")
    assert ok


def random_scenario(rng: random.Random):
    doc = default_scenario().to_dict()
    models = []
    for k in range(rng.randint(1, 6)):
        w = rng.choice([0, 1, 64, 2048, 2**14])
        a0 = rng.uniform(30, 95)
        alpha = rng.uniform(-0.2, 0.3)
        gain = rng.uniform(0, 10)
        if alpha >= 0 and w >= 1:
            gain = min(gain, (100 - a0) / math.log2(1 + w**alpha))
        models.append({"id": f"m{k}", "group": f"g{rng.randint(0, 2)}", "size": rng.uniform(5, 300),
                       "flops_per_request": rng.uniform(50, 40000), "window": w, "acc_zero": a0,
                       "acc_one_gain": gain, "alpha": alpha, "vanish": rng.uniform(0, 3)})
    doc["models"] = models
    doc["services"] = [{"id": f"s{j}", "preferred_model": rng.choice(models)["id"],
                        "rate": rng.choice([0.0, 0.5, 1.0, 3.0])} for j in range(rng.randint(1, 30))]
    base = doc["servers"][0]
    doc["servers"] = [dict(base, id=f"edge-{n}", gpu_count=rng.randint(1, 16),
                           gpu_memory_gb=rng.choice([24.0, 40.0, 80.0]),
                           power_w=rng.choice([0.0, 5.0, 50.0, 300.0, 600.0]))
                      for n in range(rng.randint(1, 2))]
    doc["costs"]["runtime_mem_per_request"] = rng.choice([0.0, 0.0, 0.01])
    doc["horizon"] = 100
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return validate_scenario(doc)


def audit_slot(sc, state, requests_total):
    """Independent check of memory, execution, energy and conservation for one committed slot."""
    d = state.decision
    problems = []
    for server in sc.servers:
        cached = d.cache.get(server.id, frozenset())
        if sum(sc.model(m).size for _, m in cached) > server.memory_gb + 1e-9:
            problems.append("memory")
        energy = 0.0
        for t, r in state.routed.items():
            if t[0] != server.id:
                continue
            b = d.offload.get(t, 0.0)
            a = (t[1], t[2]) in cached
            if b > 0 and not a or not 0 <= b <= 1:
                problems.append("execution")
            energy += sc.model(t[2]).flops_per_request / server.efficiency_gflops_per_w * a * b * r
        if energy > server.power_w * server.slot_seconds * (1 + 1e-9):
            problems.append("energy")
    if sum(state.routed.values()) != requests_total:
        problems.append("conservation")
    return problems


def test_c04_constraint_safety(verdict):
    rng = random.Random(4)
    scenarios = [random_scenario(rng) for _ in range(50)]

    def check():
        problems, slots, drift = [], 0, 0.0
        for k, sc in enumerate(scenarios):
            for p in POLICIES:
                state = SimulationState.initial(sc)
                for _ in range(sc.horizon):
                    state, m = step(state, sc, p, seed=k)
                    problems += audit_slot(sc, state, m.requests)
                    drift = max(drift, abs(m.edge_served + m.cloud_served - m.requests))
                    slots += 1
        return problems, slots, drift

    (problems, slots, drift), secs = timed(check)
    ok = not problems and drift <= 1e-9 and secs < 30
    verdict(4, "constraint safety and conservation", ok,
            f"{slots} slots, {len(problems)} violations, max edge+cloud drift {drift:.1e}, {secs:.1f}s")
    assert ok


def test_c05_lc_beats_baselines_and_switching_settles(verdict):
    sc = default_scenario()

    def check():
        return {p: [run(sc, p, s) for s in range(20)] for p in POLICIES}

    reports, secs = timed(check)
    mean = {p: float(np.mean([r.average_total for r in reps])) for p, reps in reports.items()}
    share = {p: float(np.mean([r.switching_share for r in reps])) for p, reps in reports.items()}
    ok = (all(mean["lc"] < mean[b] for b in BASELINES)
          and share["lc"] < 0.05 and share["lc"] < share["fifo"] and secs < 60)
    costs = " ".join(f"{p}={mean[p]:.5f}" for p in POLICIES)
    verdict(5, "LC cheapest on defaults, switching settles", ok,
            f"{costs}; switching share lc={share['lc']:.2%} fifo={share['fifo']:.2%}; {secs:.1f}s")
    assert ok


def test_c06_cost_grows_with_services(verdict):
    values = [10, 20, 30, 40, 50]

    def check():
        return sweep(default_scenario(), POLICIES, "num_services", values, range(10))

    rep, secs = timed(check)
    curves = {p: [r["total_mean"] for r in rep.summary() if r["policy"] == p] for p in POLICIES}
    ok = all(all(x <= y for x, y in zip(c, c[1:])) for c in curves.values()) and secs < 180
    lc = ", ".join(f"{x:.4f}" for x in curves["lc"])
    verdict(6, "cost non-decreasing in services", ok, f"lc [{lc}]; {secs:.1f}s")
    assert ok


def test_c07_lc_never_worse_across_gpu_counts(verdict):
    values = [2, 4, 8, 16]

    def check():
        return sweep(default_scenario(), POLICIES, "gpu_count", values, range(10))

    rep, secs = timed(check)
    means = {(r["axis_value"], r["policy"]): r["total_mean"] for r in rep.summary()}
    margins = [min(means[(v, b)] for b in BASELINES) - means[(v, "lc")] for v in values]
    ok = min(margins) >= 0 and secs < 180
    verdict(7, "LC <= baselines at every GPU count", ok,
            "margins " + ", ".join(f"{v}:{m:.5f}" for v, m in zip(values, margins)) + f"; {secs:.1f}s")
    assert ok


def test_c08_vanishing_factor_mechanism(verdict):
    nus = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0]
    base = dataclasses.replace(default_scenario(),
                               models=tuple(dataclasses.replace(m, window=2**14)
                                            for m in default_scenario().models))

    def check():
        return sweep(base, ["lc"], "vanish", nus, range(10))

    rep, secs = timed(check)
    final_k, volume = [], []
    for nu in nus:
        runs = [r.report for r in rep.select(nu, "lc")]
        final_k.append(float(np.mean([r.per_slot[-1].context_total for r in runs])))
        volume.append(float(np.mean([sum(m.edge_served for m in r.per_slot) for r in runs])))
    # mean requests an active pair serves at the edge per slot, with no decay
    no_decay = [r.report for r in rep.select(0.0, "lc")]
    served = sum(m.edge_served for r in no_decay for m in r.per_slot)
    active = sum(m.served_pairs for r in no_decay for m in r.per_slot)
    threshold = served / active
    tail = [v for nu, v in zip(nus, volume) if nu > threshold]
    k_ok = all(x >= y for x, y in zip(final_k, final_k[1:]))
    v_ok = len(tail) >= 2 and all(x >= y for x, y in zip(tail, tail[1:]))
    ok = k_ok and v_ok and secs < 180
    verdict(8, "context and edge volume fall with vanishing factor", ok,
            f"K(T) {final_k[0]:.0f}->{final_k[-1]:.1f}; threshold {threshold:.2f}; "
            f"tail volume {', '.join(f'{v:.0f}' for v in tail)}; {secs:.1f}s")
    assert ok


def test_c09_byte_identical_output(verdict, tmp_path):
    def invoke(name):
        code = main(["--policy", "lc,fifo,lfu,cloud", "--seed", "0", "--out", str(tmp_path / name)])
        return code, [(tmp_path / name / f).read_bytes() for f in ("summary.csv", "per_slot.csv")]

    ((c1, a), (c2, b)), secs = timed(lambda: (invoke("a"), invoke("b")))
    ok = c1 == c2 == 0 and a == b and secs < 10
    verdict(9, "byte-identical CSV", ok, f"{sum(map(len, a))} bytes, {secs:.1f}s")
    assert ok


def test_c10_zero_power_equals_cloud(verdict):
    sc = default_scenario()
    off = dataclasses.replace(sc, servers=tuple(dataclasses.replace(s, power_w=0.0) for s in sc.servers))

    def check():
        mismatches = 0
        for seed in range(3):
            cloud = run(off, "cloud", seed)
            for p in ("lc", "fifo", "lfu"):
                rep = run(off, p, seed)
                mismatches += rep.average_total != cloud.average_total
                mismatches += [m.cost.total for m in rep.per_slot] != [m.cost.total for m in cloud.per_slot]
        return mismatches

    bad, secs = timed(check)
    ok = bad == 0 and secs < 10
    verdict(10, "zero power budget equals cloud-only", ok, f"{bad} mismatches over 3 seeds, {secs:.1f}s")
    assert ok


@pytest.mark.parametrize("nu", [0.5, 2.0])
def test_vanish_sweep_runs_report_accuracy_cost(nu):
    # supporting check: the accuracy component is produced for the study's CSV output
    sc = dataclasses.replace(default_scenario(), horizon=20)
    rep = sweep(sc, ["lc"], "vanish", [nu], [0])
    assert rep.runs[0].report.component_averages["accuracy_loss"] >= 0
