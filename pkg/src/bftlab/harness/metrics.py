"""Run metrics, recomputed from trace records only."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Any

from ..simnet.config import ByteModel
from ..simnet.trace import Trace

#: Per-member certificate size that puts a 100-replica aggregated certificate
#: at about 1.4% of a 1 MB block (67 members).
CALIBRATED_QC_ENTRY_BYTES = 208
AGG_SIG_BYTES = 96
MB = 1_000_000


def overhead_bytes(n: int, qc_entry_bytes: int = CALIBRATED_QC_ENTRY_BYTES,
                   agg_sig_bytes: int = AGG_SIG_BYTES) -> int:
    f = (n - 1) // 3
    return (2 * f + 1) * qc_entry_bytes + agg_sig_bytes


def overhead_model(n: int, block_bytes: int, qc_entry_bytes: int = CALIBRATED_QC_ENTRY_BYTES,
                   agg_sig_bytes: int = AGG_SIG_BYTES) -> float:
    """Aggregated-certificate size as a fraction of the block size."""
    if n <= 0 or block_bytes <= 0 or qc_entry_bytes <= 0 or agg_sig_bytes < 0:
        raise ValueError("inputs must be positive")
    return overhead_bytes(n, qc_entry_bytes, agg_sig_bytes) / block_bytes


def calibrate_qc_entry(n: int, block_bytes: int, target_fraction: float) -> float:
    """Entry size ``x`` solving ``(2f+1) * x = target_fraction * block_bytes``."""
    f = (n - 1) // 3
    return target_fraction * block_bytes / (2 * f + 1)


@dataclass
class Metrics:
    protocol: str
    n: int
    f: int
    seed: int
    byzantine: int
    end_time: int
    committed_blocks: int
    committed_honest_blocks: int
    committed_honest_txs: int
    reverted_certified_blocks: int
    throughput: float
    latency_views: dict[int, int] = field(default_factory=dict)
    latency_time_mean: float = 0.0
    commit_triggers: dict[str, int] = field(default_factory=dict)
    agg_verifications_per_block: dict[str, dict[int, int]] = field(default_factory=dict)
    justify_bytes_mean: dict[str, float] = field(default_factory=dict)
    overhead_fraction_mean: float = 0.0
    # blocks proposed in each full leader rotation that were committed
    committed_per_rotation: list[int] = field(default_factory=list)
    honest_committed_per_rotation: list[int] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def row(self) -> dict[str, Any]:
        """Flat view for tables."""
        d = self.to_dict()
        flat = {k: v for k, v in d.items() if not isinstance(v, dict)}
        for key in ("latency_views", "commit_triggers", "agg_verifications_per_block", "justify_bytes_mean"):
            flat[key] = json.dumps(d[key], sort_keys=True, separators=(",", ":"))
        return flat


def compute_metrics(trace: Trace) -> Metrics:
    cfg = trace.config
    n, f = cfg["n"], cfg["f"]
    byz = trace.byzantine
    bm = ByteModel(**cfg["byte_model"])

    blocks: dict[str, dict] = {}
    for r in trace.of_kind("block"):
        blocks.setdefault(r["block"], r)

    first_commit: dict[str, dict] = {}
    for r in trace.honest_records("commit"):
        first_commit.setdefault(r["block"], r)

    honest_blocks = [b for b, r in first_commit.items() if r["proposer"] not in byz]
    honest_txs = sum(first_commit[b]["txs"] for b in honest_blocks)
    end_time = trace.end["t"]

    top_committed_view = max((r["view"] for r in first_commit.values()), default=0)
    certified = {r["block"] for r in trace.of_kind("qc")}
    reverted = sum(
        1 for b in certified
        if b not in first_commit and b in blocks and blocks[b]["view"] < top_committed_view
    )

    lat_views: Counter = Counter()
    lat_time = []
    triggers: Counter = Counter()
    for b, r in first_commit.items():
        lat_views[r["trigger_view"] - r["view"]] += 1
        triggers[r["trigger"]] += 1
        if b in blocks:
            lat_time.append(r["t"] - blocks[b]["t"])

    rotations = cfg["max_views"] // n
    per_rotation = [0] * rotations
    honest_per_rotation = [0] * rotations
    for r in first_commit.values():
        i = (r["view"] - 1) // n
        if 0 <= i < rotations:
            per_rotation[i] += 1
            honest_per_rotation[i] += r["proposer"] not in byz

    aggv: dict[str, Counter] = {}
    for r in trace.honest_records("verify"):
        if r["ok"]:
            aggv.setdefault(r["path"], Counter())[r["aggv"]] += 1

    jbytes: dict[str, list[int]] = {}
    fractions = []
    for r in blocks.values():
        if r["justify"] == "qc":
            size = bm.qc_bytes(n)
        else:
            size = bm.aggqc_bytes(n, 2 * f + 1)
        jbytes.setdefault(r["justify"], []).append(size)
        if r["nbytes"]:
            fractions.append(size / r["nbytes"])

    return Metrics(
        protocol=cfg["protocol"],
        n=n,
        f=f,
        seed=cfg["seed"],
        byzantine=len(byz),
        end_time=end_time,
        committed_blocks=len(first_commit),
        committed_honest_blocks=len(honest_blocks),
        committed_honest_txs=honest_txs,
        reverted_certified_blocks=reverted,
        throughput=honest_txs / end_time if end_time else 0.0,
        latency_views=dict(sorted(lat_views.items())),
        latency_time_mean=sum(lat_time) / len(lat_time) if lat_time else 0.0,
        commit_triggers=dict(sorted(triggers.items())),
        agg_verifications_per_block={k: dict(sorted(v.items())) for k, v in sorted(aggv.items())},
        justify_bytes_mean={k: sum(v) / len(v) for k, v in sorted(jbytes.items())},
        overhead_fraction_mean=sum(fractions) / len(fractions) if fractions else 0.0,
        committed_per_rotation=per_rotation,
        honest_committed_per_rotation=honest_per_rotation,
    )


def to_csv(rows: list[dict[str, Any]]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def to_jsonl(rows: list[dict[str, Any]]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
