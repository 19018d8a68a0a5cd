"""Safety and liveness verdicts computed from a trace alone.

All functions here are pure over :class:`~bftlab.simnet.trace.Trace` records,
so a verdict can be recomputed from an exported trace file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ..core import GENESIS, short
from ..simnet.trace import Trace

GENESIS_ID = short(GENESIS.hash)


@dataclass
class AuditResult:
    ok: bool = True
    checked: int = 0
    evidence: dict[str, Any] | None = None

    def fail(self, **evidence: Any) -> None:
        if self.ok:
            self.ok = False
            self.evidence = evidence


@dataclass
class OracleReport:
    safety_ok: bool
    safety_counterexample: dict[str, Any] | None
    liveness_ok: bool
    stall_window: tuple[int, int] | None
    liveness_windows: int
    audits: dict[str, AuditResult] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        if not self.safety_ok:
            return 2
        if not self.liveness_ok:
            return 3
        return 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "safety_ok": self.safety_ok,
            "safety_counterexample": self.safety_counterexample,
            "liveness_ok": self.liveness_ok,
            "stall_window": list(self.stall_window) if self.stall_window else None,
            "liveness_windows": self.liveness_windows,
            "audits": {
                k: {"ok": a.ok, "checked": a.checked, "evidence": a.evidence}
                for k, a in sorted(self.audits.items())
            },
        }


class Ancestry:
    """Parent links of every block created during a run."""

    def __init__(self, trace: Trace) -> None:
        self.parent: dict[str, str] = {}
        self.view: dict[str, int] = {GENESIS_ID: 0}
        for r in trace.of_kind("block"):
            self.parent.setdefault(r["block"], r["parent"])
            self.view.setdefault(r["block"], r["view"])
        self._depth: dict[str, int] = {GENESIS_ID: 0}

    def depth(self, b: str) -> int:
        chain = []
        cur = b
        while cur not in self._depth:
            chain.append(cur)
            cur = self.parent.get(cur)
            if cur is None:
                raise KeyError(f"block {b} has no recorded ancestry")
        d = self._depth[cur]
        for blk in reversed(chain):
            d += 1
            self._depth[blk] = d
        return self._depth[b]

    def extends(self, d: str, a: str) -> bool:
        """True when ``a`` is ``d`` or one of its ancestors."""
        da, dd = self.depth(a), self.depth(d)
        while dd > da:
            d = self.parent[d]
            dd -= 1
        return d == a


def _commit_anchors(trace: Trace) -> list[tuple[int, str]]:
    """``(trigger_view, block)`` for every directly committed block, by trigger view.

    A commit record batch (same event, same replica) commits one block
    directly and the rest as its ancestors; the direct one has the highest
    view.  Certificates formed for views above the trigger view must extend
    it.  Blocks committed only as ancestors carry no such guarantee for the
    views between their own view and the later direct commit.
    """
    batches: dict[tuple[int, int], dict] = {}
    for r in trace.honest_records("commit"):
        key = (r["ev"], r["r"])
        if key not in batches or r["view"] > batches[key]["view"]:
            batches[key] = r
    return sorted({(r["trigger_view"], r["block"]) for r in batches.values()})


def _anchor_below(anchors: list[tuple[int, str]], anc: "Ancestry", view: int) -> str | None:
    """Deepest directly committed block whose trigger view is below ``view``."""
    best, depth = None, -1
    for tv, b in anchors:
        if tv >= view:
            break
        d = anc.depth(b)
        if d > depth:
            best, depth = b, d
    return best


def safety_oracle(trace: Trace) -> tuple[bool, dict[str, Any] | None, dict[str, AuditResult]]:
    """Height conflicts and per-replica chain shape, plus certificate audits."""
    audits: dict[str, AuditResult] = {}
    anc = Ancestry(trace)
    counterexample: dict[str, Any] | None = None

    heights = AuditResult()
    at_height: dict[int, dict] = {}
    for r in trace.honest_records("commit"):
        heights.checked += 1
        seen = at_height.setdefault(r["height"], r)
        if seen["block"] != r["block"]:
            heights.fail(ev=r["ev"], height=r["height"], blocks=[seen["block"], r["block"]],
                         replicas=[seen["r"], r["r"]])
    audits["height_uniqueness"] = heights

    chains = AuditResult()
    last: dict[int, dict] = {}
    for r in trace.honest_records("commit"):
        chains.checked += 1
        prev = last.get(r["r"])
        want_height = 1 if prev is None else prev["height"] + 1
        want_parent = GENESIS_ID if prev is None else prev["block"]
        if r["height"] != want_height or anc.parent.get(r["block"]) != want_parent:
            chains.fail(ev=r["ev"], replica=r["r"], height=r["height"], block=r["block"])
        last[r["r"]] = r
    audits["committed_chain"] = chains

    engine = AuditResult()
    for r in trace.honest_records("violation"):
        engine.checked += 1
        engine.fail(ev=r["ev"], replica=r["r"], what=r["what"], detail=r.get("detail"))
    audits["engine_violations"] = engine

    unique = AuditResult()
    certified: dict[tuple[str, int], dict] = {}
    for r in trace.of_kind("qc"):
        unique.checked += 1
        seen = certified.setdefault((r["type"], r["view"]), r)
        if seen["block"] != r["block"]:
            unique.fail(ev=r["ev"], type=r["type"], view=r["view"], blocks=[seen["block"], r["block"]])
    audits["unique_certification"] = unique

    anchors = _commit_anchors(trace)
    cert = AuditResult()
    for r in trace.of_kind("qc"):
        base = _anchor_below(anchors, anc, r["view"])
        if base is None:
            continue
        cert.checked += 1
        if not anc.extends(r["block"], base):
            cert.fail(ev=r["ev"], qc_view=r["view"], qc_block=r["block"], committed=base)
    audits["certified_extend_committed"] = cert

    if trace.config["protocol"] != "hotstuff":
        audits["aggqc_high_extends_committed"] = aggqc_audit(trace, anc, anchors)

    for name in ("height_uniqueness", "committed_chain", "engine_violations", "unique_certification",
                 "certified_extend_committed", "aggqc_high_extends_committed"):
        a = audits.get(name)
        if a is not None and not a.ok:
            counterexample = {"audit": name, **(a.evidence or {})}
            break
    return counterexample is None, counterexample, audits


def aggqc_audit(trace: Trace, anc: Ancestry | None = None,
                anchors: list[tuple[int, str]] | None = None) -> AuditResult:
    """Every aggregated certificate above a commit vouches for the committed block or a descendant."""
    anc = anc or Ancestry(trace)
    if anchors is None:
        anchors = _commit_anchors(trace)
    audit = AuditResult()
    for r in trace.of_kind("aggqc"):
        base = _anchor_below(anchors, anc, r["view"])
        if base is None:
            continue
        audit.checked += 1
        if not anc.extends(r["high_block"], base):
            audit.fail(ev=r["ev"], aggqc_view=r["view"], high_block=r["high_block"], committed=base)
    return audit


def liveness_oracle(trace: Trace, bound_views: int | None = None) -> tuple[bool, tuple[int, int] | None, int]:
    """Committed height must grow within every ``bound_views`` window after GST.

    ``t_V`` is the first record at which some honest replica reaches view
    ``V``.  For every ``V`` first reached at or after GST with ``V + bound``
    also reached, the highest honest committed height at ``t_{V+bound}`` must
    exceed the one at ``t_V``.  A run that stopped because views stopped
    advancing (event budget exhausted or nothing left to do) must also have
    committed something after GST; that stall is reported as ``(V, -1)``.
    Returns ``(ok, first stalled window, windows checked)``.
    """
    cfg = trace.config
    bound = 2 * cfg["n"] if bound_views is None else bound_views
    gst = cfg["network"]["gst"]
    honest = trace.honest
    height = 0
    height_at_gst = None
    top_view = 0
    at_view: dict[int, tuple[int, int]] = {}
    for r in trace.records:
        k = r["k"]
        if height_at_gst is None and r.get("t", 0) >= gst:
            height_at_gst = height
        if k == "commit" and not r.get("byz") and r["r"] in honest:
            height = max(height, r["height"])
        elif k == "view" and not r.get("byz") and r["view"] > top_view:
            for v in range(top_view + 1, r["view"] + 1):
                at_view[v] = (r["t"], height)
            top_view = r["view"]
    windows = 0
    for v in sorted(at_view):
        t, h = at_view[v]
        if t < gst or v + bound not in at_view:
            continue
        windows += 1
        if at_view[v + bound][1] <= h:
            return False, (v, v + bound), windows
    if trace.end.get("stop") in ("max_events", "queue_empty") and height_at_gst is not None:
        windows += 1
        if height <= height_at_gst:
            return False, (top_view, -1), windows
    return True, None, windows


def evaluate(trace: Trace, bound_views: int | None = None) -> OracleReport:
    safe, cex, audits = safety_oracle(trace)
    live, stall, windows = liveness_oracle(trace, bound_views)
    return OracleReport(safe, cex, live, stall, windows, audits)
