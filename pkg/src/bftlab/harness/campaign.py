"""Seeded fuzz campaigns with counterexample minimization.

Each campaign seed deterministically expands into one randomized
configuration (size, adversary mix, pre-GST chaos, partitions), so a failing
seed is its own replay handle.  A failure is then shrunk by trying simpler
variants of the configuration and keeping any that still fail.
"""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any

from ..simnet import from_dict, run
from ..simnet.config import STRATEGIES
from .oracles import evaluate

DEFAULT_STRATEGIES = ("silent", "forking", "equivocator", "withholder", "timeout_abuser")
BUNDLED_STRATEGIES = tuple(s for s in STRATEGIES if s != "none")


@dataclass
class FuzzSpec:
    protocols: tuple[str, ...] = ("pipelined_fhs",)
    sizes: tuple[int, ...] = (4, 7)
    strategies: tuple[str, ...] = DEFAULT_STRATEGIES
    max_views: int = 20
    gst_max: int = 300
    drop_prob_max: float = 0.3
    partitions: bool = True
    check_liveness: bool = False

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None) -> "FuzzSpec":
        data = dict(data or {})
        for key in ("protocols", "sizes", "strategies"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def fuzz_config(base: dict[str, Any], spec: FuzzSpec, seed: int) -> dict[str, Any]:
    """The randomized configuration for one campaign seed."""
    rng = random.Random(f"fuzz/{seed}")
    n = rng.choice(spec.sizes)
    f = (n - 1) // 3
    byz = sorted(rng.sample(range(n), rng.randint(1, f))) if f else []
    per_replica = {str(r): rng.choice(spec.strategies) for r in byz}
    gst = rng.randint(0, spec.gst_max)
    partitions = []
    if spec.partitions and gst > 1 and rng.random() < 0.5:
        start = rng.randint(0, gst - 1)
        end = rng.randint(start + 1, gst)
        pool = list(range(n))
        rng.shuffle(pool)
        cut = rng.randint(1, n - 1)
        partitions.append({"start": start, "end": end, "groups": [sorted(pool[:cut]), sorted(pool[cut:])]})
    cfg = dict(base)
    cfg.update({
        "protocol": rng.choice(spec.protocols),
        "n": n,
        "f": f,
        "seed": seed,
        "max_views": spec.max_views,
        "network": {**base.get("network", {}), "gst": gst,
                    "drop_prob": round(rng.uniform(0, spec.drop_prob_max), 3)},
        "partitions": partitions,
        "adversary": {"strategy": "none", "byzantine": byz, "per_replica": per_replica,
                      "params": dict(base.get("adversary", {}).get("params", {}))},
        "trace_level": "protocol",
    })
    return cfg


def liveness_config(protocol: str, n: int, seed: int, schedule: str = "round_robin",
                    gst_max: int = 300, drop_prob_max: float = 0.3, views_per_replica: int = 8) -> dict[str, Any]:
    """One post-GST liveness run: a bundled strategy (cycled by seed) on 1..f replicas.

    Before GST messages are lost with a random probability and a random
    partition may split the replicas, so the run starts from a messy state.
    """
    rng = random.Random(f"liveness/{protocol}/{n}/{seed}")
    f = (n - 1) // 3
    strategy = BUNDLED_STRATEGIES[seed % len(BUNDLED_STRATEGIES)]
    byz = sorted(rng.sample(range(n), rng.randint(1, f)))
    gst = rng.randint(0, gst_max)
    partitions = []
    if gst > 1 and rng.random() < 0.5:
        start = rng.randint(0, gst - 1)
        pool = list(range(n))
        rng.shuffle(pool)
        cut = rng.randint(1, n - 1)
        partitions.append({"start": start, "end": rng.randint(start + 1, gst),
                           "groups": [sorted(pool[:cut]), sorted(pool[cut:])]})
    return {
        "protocol": protocol,
        "n": n,
        "f": f,
        "seed": seed,
        "max_views": views_per_replica * n,
        "network": {"gst": gst, "drop_prob": round(rng.uniform(0, drop_prob_max), 3)},
        "partitions": partitions,
        "pacemaker": {"schedule": schedule},
        "adversary": {"strategy": strategy, "byzantine": byz},
        "trace_level": "protocol",
    }


@dataclass
class FuzzResult:
    seed: int
    safety_ok: bool
    liveness_ok: bool
    counterexample: dict[str, Any] | None
    config: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed, "safety_ok": self.safety_ok, "liveness_ok": self.liveness_ok,
            "counterexample": self.counterexample, "config": self.config,
        }


def check(cfg: dict[str, Any]) -> tuple[bool, bool, dict[str, Any] | None]:
    rep = evaluate(run(from_dict(cfg)))
    return rep.safety_ok, rep.liveness_ok, rep.safety_counterexample


def _one(args: tuple[dict[str, Any], FuzzSpec, int]) -> FuzzResult:
    base, spec, seed = args
    cfg = fuzz_config(base, spec, seed)
    safe, live, cex = check(cfg)
    return FuzzResult(seed, safe, live, cex, cfg)


@dataclass
class CampaignSummary:
    runs: int
    safety_failures: list[int] = field(default_factory=list)
    liveness_failures: list[int] = field(default_factory=list)
    minimized: dict[int, dict[str, Any]] = field(default_factory=dict)
    by_protocol: dict[str, int] = field(default_factory=dict)
    check_liveness: bool = False

    @property
    def exit_code(self) -> int:
        if self.safety_failures:
            return 2
        if self.check_liveness and self.liveness_failures:
            return 3
        return 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "runs": self.runs,
            "safety_failures": self.safety_failures,
            "liveness_failures": self.liveness_failures,
            "minimized": {str(k): v for k, v in sorted(self.minimized.items())},
            "by_protocol": dict(sorted(self.by_protocol.items())),
            "exit_code": self.exit_code,
        }


def campaign(base: dict[str, Any], spec: FuzzSpec, seeds: range | list[int], workers: int = 1,
             minimize_failures: bool = True) -> CampaignSummary:
    jobs = [(base, spec, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_one, jobs, chunksize=16))
    else:
        results = [_one(j) for j in jobs]
    results.sort(key=lambda r: r.seed)
    summary = CampaignSummary(len(results), check_liveness=spec.check_liveness)
    for r in results:
        summary.by_protocol[r.config["protocol"]] = summary.by_protocol.get(r.config["protocol"], 0) + 1
        if not r.safety_ok:
            summary.safety_failures.append(r.seed)
            if minimize_failures:
                summary.minimized[r.seed] = minimize(r.config)
        if not r.liveness_ok:
            summary.liveness_failures.append(r.seed)
    return summary


def minimize(cfg: dict[str, Any], still_fails=None) -> dict[str, Any]:
    """Shrink a failing configuration while ``still_fails`` holds.

    Tries, in order: fewer views (bisection), dropping partitions, turning
    Byzantine replicas honest one at a time, and removing message loss.
    Returns the smallest configuration found plus the event index of the
    first violation, which ``replay --until`` accepts.
    """
    if still_fails is None:
        def still_fails(c: dict[str, Any]) -> bool:
            return not check(c)[0]

    best = dict(cfg)
    lo, hi = 1, best["max_views"]
    while lo < hi:
        mid = (lo + hi) // 2
        if still_fails({**best, "max_views": mid}):
            hi = mid
        else:
            lo = mid + 1
    best["max_views"] = hi

    for i in range(len(best.get("partitions", [])) - 1, -1, -1):
        cand = {**best, "partitions": [p for j, p in enumerate(best["partitions"]) if j != i]}
        if still_fails(cand):
            best = cand

    adv = best["adversary"]
    for rid in list(adv.get("per_replica", {})):
        per = {k: v for k, v in adv["per_replica"].items() if k != rid}
        cand = {**best, "adversary": {**adv, "per_replica": per,
                                      "byzantine": [b for b in adv["byzantine"] if str(b) != rid]}}
        if still_fails(cand):
            best, adv = cand, cand["adversary"]

    if best["network"].get("drop_prob"):
        cand = {**best, "network": {**best["network"], "drop_prob": 0.0}}
        if still_fails(cand):
            best = cand

    _, _, cex = check(best)
    return {"config": best, "until_event": (cex or {}).get("ev")}


__all__ = [
    "BUNDLED_STRATEGIES",
    "CampaignSummary",
    "DEFAULT_STRATEGIES",
    "FuzzResult",
    "FuzzSpec",
    "campaign",
    "check",
    "fuzz_config",
    "liveness_config",
    "minimize",
]
