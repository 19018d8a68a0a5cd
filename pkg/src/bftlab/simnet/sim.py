"""Deterministic discrete-event simulator with partial synchrony.

Events are ``(time, seq, kind, payload)`` tuples in a heap; ``seq`` is the
insertion counter and breaks ties.  Time is an integer.  Before GST each
message is dropped with probability ``drop_prob`` and otherwise delayed
uniformly in ``[1, pre_gst_max]``; from GST on, every message arrives within
``[delay_min, delta]``.  Messages a replica sends to itself arrive with zero
delay.  Partitions drop messages crossing sides while active.

Two seeded generators are used, one for the network and one for adversary
choices, so changing an adversary does not perturb network delays of
unrelated runs more than the extra traffic does.
"""

from __future__ import annotations

import heapq
import logging
import random
from typing import Any

from ..certs import make_genesis_qc
from ..core import (
    FetchRequest,
    FetchResponse,
    Message,
    NewViewMsg,
    Phase,
    Proposal,
    QCAnnounce,
    VoteMsg,
)
from ..crypto import MockScheme
from ..engine import HONEST, EngineConfig, Replica
from ..fhs_basic import BasicFHS
from ..fhs_pipelined import PipelinedFHS
from ..hotstuff import HotStuff
from ..pacemaker import Blacklist, Pacemaker, RoundRobin, Scripted, SeededRandom
from .adversary import behaviors_for
from .config import SimConfig
from .trace import SCHEMA_VERSION, Trace

log = logging.getLogger(__name__)

ENGINES: dict[str, type[Replica]] = {
    "basic_fhs": BasicFHS,
    "pipelined_fhs": PipelinedFHS,
    "hotstuff": HotStuff,
}

_MSG, _TIMER = 0, 1


def describe(msg: Message) -> tuple[str, int | None]:
    if isinstance(msg, Proposal):
        return "proposal", msg.block.view
    if isinstance(msg, VoteMsg):
        return "vote_" + msg.vote_type.name.lower(), msg.view
    if isinstance(msg, NewViewMsg):
        return "newview", msg.view
    if isinstance(msg, QCAnnounce):
        return "qc_" + msg.qc.cert_type.name.lower(), msg.qc.view
    if isinstance(msg, FetchRequest):
        return "fetch_req", None
    if isinstance(msg, FetchResponse):
        return "fetch_resp", msg.block.view
    return type(msg).__name__, None


def make_schedule(cfg: SimConfig):
    pm = cfg.pacemaker
    if pm.schedule == "random":
        return SeededRandom(cfg.seed if pm.schedule_seed is None else pm.schedule_seed)
    if pm.schedule == "scripted":
        return Scripted(tuple(pm.script or ()))
    return RoundRobin()


class Simulation:
    def __init__(self, cfg: SimConfig, until_event: int | None = None) -> None:
        cfg.validate()
        self.cfg = cfg
        self.until_event = until_event
        n, f = cfg.n, cfg.f
        self.scheme = MockScheme(n, cfg.seed)
        self.net_rng = random.Random(f"net/{cfg.seed}")
        self.adv_rng = random.Random(f"adv/{cfg.seed}")
        self.byzantine = cfg.byzantine_ids()
        self.honest = [r for r in range(n) if r not in self.byzantine]
        self.full = cfg.trace_level == "full"
        schedule = make_schedule(cfg)
        cert_type = Phase.PREPARE if cfg.protocol == "basic_fhs" else Phase.GENERIC
        genesis_qc = make_genesis_qc(self.scheme, cert_type)
        ecfg = EngineConfig(
            n=n, f=f, txs_per_block=cfg.txs_per_block, tx_bytes=cfg.tx_bytes,
            basic_commit_guard=cfg.basic_commit_guard, prefer_qc_path=cfg.prefer_qc_path,
        )
        engine_cls = ENGINES[cfg.protocol]
        self.instances: dict[int, list[Replica]] = {}
        for rid in range(n):
            if rid in self.byzantine:
                specs = behaviors_for(cfg.strategy_of(rid), rid, self.byzantine, self.honest,
                                      cfg.adversary.params, self.adv_rng)
            else:
                specs = [(HONEST, b"")]
            self.instances[rid] = [
                engine_cls(
                    rid, ecfg, self.scheme,
                    Pacemaker(n, f, cfg.base_timeout, schedule, cfg.pacemaker.max_backoff_exp,
                              Blacklist(f, cfg.pacemaker.blacklist_threshold, cfg.pacemaker.blacklist)),
                    genesis_qc, behavior, tag,
                )
                for behavior, tag in (specs or [])
            ]
        self.queue: list[tuple[int, int, int, Any]] = []
        self.seq = 0
        self.now = 0
        self.ev = 0
        self.trace = Trace([{
            "k": "meta", "schema": SCHEMA_VERSION, "config": cfg.to_dict(),
            "byzantine": self.byzantine, "honest": self.honest,
        }])
        self._views_moved = False

    # -- helpers -------------------------------------------------------------

    def replica(self, rid: int, instance: int = 0) -> Replica:
        return self.instances[rid][instance]

    def _push(self, time: int, kind: int, payload: Any) -> None:
        heapq.heappush(self.queue, (time, self.seq, kind, payload))
        self.seq += 1

    def _record(self, rec: dict[str, Any]) -> None:
        self.trace.records.append(rec)

    def _partitioned(self, a: int, b: int) -> bool:
        for p in self.cfg.partitions:
            if p.start <= self.now < p.end:
                side_a = a in p.groups[0]
                if side_a != (b in p.groups[0]):
                    return True
        return False

    def _transmit(self, src: int, idx: int, dst: int, msg: Message) -> None:
        net = self.cfg.network
        if dst == src:
            delay = 0
        else:
            why = None
            if self._partitioned(src, dst):
                why = "partition"
            elif self.now < net.gst and net.drop_prob and self.net_rng.random() < net.drop_prob:
                why = "loss"
            if why is not None:
                if self.full:
                    name, _ = describe(msg)
                    self._record({"k": "drop", "ev": self.ev, "t": self.now, "from": src, "to": dst,
                                  "msg": name, "why": why})
                return
            if self.now < net.gst:
                delay = self.net_rng.randint(1, net.pre_gst_max)
            else:
                delay = self.net_rng.randint(net.delay_min, net.delta)
        if self.full:
            name, view = describe(msg)
            self._record({"k": "send", "ev": self.ev, "t": self.now, "from": src, "to": dst,
                          "msg": name, "view": view, "dt": delay})
        self._push(self.now + delay, _MSG, (src, idx, dst, msg))

    def _flush(self, rid: int, idx: int, inst: Replica) -> None:
        out, timers, notes = inst.drain()
        byz = rid in self.byzantine
        for note in notes:
            rec = {"ev": self.ev, "t": self.now, **note}
            if byz:
                rec["byz"] = True
                if idx:
                    rec["i"] = idx
            elif note["k"] == "view":
                self._views_moved = True
            self._record(rec)
        for view, delay in timers:
            self._push(self.now + delay, _TIMER, (rid, idx, view))
        n = self.cfg.n
        for dest, msg in out:
            for d in (range(n) if dest is None else (dest,)):
                self._transmit(rid, idx, d, msg)

    def _done(self) -> bool:
        if not self._views_moved:
            return False
        self._views_moved = False
        limit = self.cfg.max_views
        return all(self.instances[r][0].cur_view > limit for r in self.honest if self.instances[r])

    # -- main loop -----------------------------------------------------------

    def run(self) -> Trace:
        for rid in range(self.cfg.n):
            for idx, inst in enumerate(self.instances[rid]):
                inst.start()
                self._flush(rid, idx, inst)
        stop = "queue_empty"
        max_time = self.cfg.max_time
        while self.queue:
            if self.until_event is not None and self.ev >= self.until_event:
                stop = "until_event"
                break
            if self.ev >= self.cfg.max_events:
                stop = "max_events"
                break
            t, _, kind, payload = heapq.heappop(self.queue)
            if max_time is not None and t > max_time:
                stop = "max_time"
                break
            self.now = t
            self.ev += 1
            if kind == _MSG:
                src, src_idx, dst, msg = payload
                targets = self.instances[dst]
                pairs = [(src_idx, targets[src_idx])] if dst == src else list(enumerate(targets))
                if self.full and pairs:
                    name, view = describe(msg)
                    for i, _ in pairs:
                        self._record({"k": "dlv", "ev": self.ev, "t": t, "from": src, "to": dst,
                                      "msg": name, "view": view, "i": i})
                for i, inst in pairs:
                    inst.on_message(src, msg)
                    self._flush(dst, i, inst)
            else:
                rid, idx, view = payload
                inst = self.instances[rid][idx]
                inst.on_timer(view)
                self._flush(rid, idx, inst)
            if self._done():
                stop = "max_views"
                break
        self._record({
            "k": "end", "ev": self.ev, "t": self.now, "stop": stop,
            "views": {str(r): self.instances[r][0].cur_view for r in self.honest if self.instances[r]},
            "heights": {str(r): len(self.instances[r][0].tree.committed) - 1
                        for r in self.honest if self.instances[r]},
            "agg_verifications": self.scheme.agg_verifications,
            "verifications": self.scheme.verifications,
        })
        log.debug("run finished: %s after %d events", stop, self.ev)
        return self.trace


def run(cfg: SimConfig, until_event: int | None = None) -> Trace:
    return Simulation(cfg, until_event).run()
