"""Desk-scale experiments: forking sweeps, latency, verification counts.

Every experiment is a thin loop over :func:`bftlab.simnet.run` followed by
trace-only metrics, so each number here can be recomputed from the exported
traces.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Any, Iterable

from ..simnet import from_dict, run
from ..simnet.trace import Trace
from .metrics import compute_metrics
from .oracles import Ancestry


def lockstep_network(delta: int = 10) -> dict[str, int]:
    """Every message takes exactly ``delta``: views advance in lockstep."""
    return {"gst": 0, "delta": delta, "delay_min": delta}


@dataclass
class SweepPoint:
    byzantine: int
    committed_blocks: int
    committed_honest_blocks: int
    committed_honest_txs: int
    end_time: int
    rate: float
    normalized: float
    # same Byzantine set, but every replica follows the protocol
    reference_rate: float

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def sweep_config(protocol: str, n: int, byzantine: int, rotations: int, seed: int,
                 strategy: str, placement: str) -> dict[str, Any]:
    return {
        "protocol": protocol,
        "n": n,
        "f": (n - 1) // 3,
        "seed": seed,
        "max_views": rotations * n,
        "network": lockstep_network(),
        "adversary": {"strategy": strategy, "count": byzantine, "placement": placement},
        "trace_level": "protocol",
    }


def forking_sweep(
    protocol: str,
    byz_counts: Iterable[int],
    n: int = 40,
    rotations: int = 2,
    seed: int = 0,
    strategy: str = "forking",
    placement: str = "worst_case",
) -> list[SweepPoint]:
    """Committed honest payload per unit time against the number of forkers.

    ``normalized`` divides by the rate with no Byzantine replica at all.
    ``reference_rate`` is the rate with the same replicas marked Byzantine
    but behaving honestly, which isolates the effect of the attack from the
    fact that Byzantine blocks do not count as honest payload.
    """
    points: list[SweepPoint] = []
    base_rate = None
    for k in byz_counts:
        m = compute_metrics(run(from_dict(sweep_config(protocol, n, k, rotations, seed, strategy, placement))))
        ref = compute_metrics(run(from_dict(sweep_config(protocol, n, k, rotations, seed, "none", placement))))
        if base_rate is None:
            base = ref if k == 0 else compute_metrics(
                run(from_dict(sweep_config(protocol, n, 0, rotations, seed, "none", placement))))
            base_rate = base.throughput
        points.append(SweepPoint(
            byzantine=k,
            committed_blocks=m.committed_blocks,
            committed_honest_blocks=m.committed_honest_blocks,
            committed_honest_txs=m.committed_honest_txs,
            end_time=m.end_time,
            rate=m.throughput,
            normalized=m.throughput / base_rate if base_rate else 0.0,
            reference_rate=ref.throughput,
        ))
    return points


def is_non_increasing(values: list[float], tol: float = 1e-12) -> bool:
    return all(b <= a + tol for a, b in zip(values, values[1:]))


@dataclass
class RotationResult:
    committed: int
    honest: int
    committed_views: list[int]
    trace: Trace


def worst_case_rotation(protocol: str = "hotstuff", n: int = 40, seed: int = 0,
                        strategy: str = "worst_case_forker") -> RotationResult:
    """Blocks proposed in the first rotation of ``n`` views that end up committed.

    Byzantine leaders sit at every third slot, so each one can orphan the two
    honest blocks before it.  The run continues for two more rotations so that
    every first-rotation block that will ever commit has done so.
    """
    f = (n - 1) // 3
    cfg = from_dict({
        "protocol": protocol, "n": n, "f": f, "seed": seed,
        "max_views": 2 * n + 3,
        "network": lockstep_network(),
        "adversary": {"strategy": strategy, "count": f, "placement": "worst_case"},
        "trace_level": "protocol",
    })
    trace = run(cfg)
    byz = trace.byzantine
    first: dict[str, dict] = {}
    for r in trace.honest_records("commit"):
        first.setdefault(r["block"], r)
    in_rotation = sorted((r["view"], r["proposer"]) for r in first.values() if 1 <= r["view"] <= n)
    return RotationResult(
        committed=len(in_rotation),
        honest=sum(1 for _, p in in_rotation if p not in byz),
        committed_views=[v for v, _ in in_rotation],
        trace=trace,
    )


def latency(protocol: str, views: int = 50, n: int = 4, seed: int = 0,
            silent_leader_view: int | None = None) -> Counter:
    """Histogram of commit latency in views over a failure-free run.

    ``silent_leader_view`` makes the last replica crash and lead exactly that
    view, which shows a single latency bump followed by recovery.
    """
    f = (n - 1) // 3
    cfg: dict[str, Any] = {
        "protocol": protocol, "n": n, "f": f, "seed": seed, "max_views": views,
        "trace_level": "protocol",
    }
    if silent_leader_view is not None:
        crashed = n - 1
        script = [v % (n - 1) for v in range(views + 2)]
        script[silent_leader_view] = crashed
        cfg["adversary"] = {"strategy": "silent", "byzantine": [crashed]}
        cfg["pacemaker"] = {"schedule": "scripted", "script": script}
    return Counter(compute_metrics(run(from_dict(cfg))).latency_views)


def aggqc_verification_counts(protocol: str, n: int, views: int = 12, seed: int = 0) -> Counter:
    """Aggregate verifications per AggQC-carrying block an honest replica processed.

    One leader is silent, so the view after it must start from an aggregated
    certificate.  The basic protocol carries one in every proposal anyway.
    """
    f = (n - 1) // 3
    cfg = from_dict({
        "protocol": protocol, "n": n, "f": f, "seed": seed, "max_views": views,
        "adversary": {"strategy": "silent", "byzantine": [2 % n]},
        "trace_level": "protocol",
    })
    trace = run(cfg)
    return Counter(r["aggv"] for r in trace.honest_records("verify") if r["path"] == "aggqc" and r["ok"])


@dataclass
class WithholdAudit:
    block: str | None
    attack_view: int | None
    # honest replicas that had committed the block by the attack view
    early_committers: list[int]
    aggqcs_checked: int
    aggqcs_extend: bool
    committers: list[int]
    heights: list[int]
    honest: list[int]
    trace: Trace

    @property
    def ok(self) -> bool:
        return (
            self.block is not None
            and len(self.early_committers) == 1
            and self.aggqcs_checked > 0
            and self.aggqcs_extend
            and sorted(self.committers) == sorted(self.honest)
            and len(set(self.heights)) == 1
        )


def withholder_audit(protocol: str, n: int = 4, seed: int = 0, views: int | None = None) -> WithholdAudit:
    """A block committed by a single honest replica stays vouched for.

    The last replica leads view ``n-1`` and hands the certificate that
    completes a commit to one honest replica only, then goes silent.  Every
    aggregated certificate formed afterwards must vouch for that block or a
    descendant, and every honest replica must end up committing it at the
    same height.
    """
    f = (n - 1) // 3
    cfg = from_dict({
        "protocol": protocol, "n": n, "f": f, "seed": seed,
        "max_views": views or 4 * n,
        "network": lockstep_network(),
        "adversary": {"strategy": "withholder", "byzantine": [n - 1], "params": {"k": 1}},
        "trace_level": "protocol",
    })
    trace = run(cfg)
    honest = sorted(trace.honest)
    attack = next((r for r in trace.records if r["k"] == "attack" and r["what"] == "withhold"), None)
    empty = WithholdAudit(None, None, [], 0, False, [], [], honest, trace)
    if attack is None:
        return empty
    w = attack["view"]
    target = attack["to"][0]
    commits = list(trace.honest_records("commit"))
    direct = [r for r in commits if r["r"] == target and r["trigger_view"] == w]
    if not direct:
        return empty
    block = max(direct, key=lambda r: r["view"])["block"]
    early = sorted({r["r"] for r in commits if r["block"] == block and r["trigger_view"] <= w})
    anc = Ancestry(trace)
    later = [r for r in trace.of_kind("aggqc") if r["view"] > w]
    extend = all(anc.extends(r["high_block"], block) for r in later)
    final = {r["r"]: r["height"] for r in commits if r["block"] == block}
    return WithholdAudit(block, w, early, len(later), extend, sorted(final), sorted(final.values()), honest, trace)


__all__ = [
    "RotationResult",
    "WithholdAudit",
    "SweepPoint",
    "aggqc_verification_counts",
    "forking_sweep",
    "is_non_increasing",
    "latency",
    "lockstep_network",
    "sweep_config",
    "withholder_audit",
    "worst_case_rotation",
]
