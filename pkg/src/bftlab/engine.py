"""Shared machinery for the replica state machines.

An engine is a pure event handler: the simulator calls :meth:`Replica.start`,
:meth:`Replica.on_message` and :meth:`Replica.on_timer`, then drains three
queues the call filled in:

* ``outbox``: ``(dest, message)`` pairs, ``dest=None`` meaning every replica
  including the sender;
* ``timers``: ``(view, delay)`` requests;
* ``notes``: trace records (dicts) describing what happened.

Adversarial behaviour is injected through a :class:`Behavior`, which the
honest code consults at the few points where a Byzantine replica may deviate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

from .certs import quorum_size, verify_qc
from .core import (
    AggregateQC,
    Block,
    BlockTree,
    CommitConflict,
    FetchRequest,
    FetchResponse,
    InsertOutcome,
    Justify,
    Message,
    NewViewMsg,
    Payload,
    Phase,
    QuorumCert,
    VoteMsg,
    newview_message,
    proposal_message,
    short,
    vote_message,
)
from .crypto import MockScheme
from .pacemaker import Pacemaker


@dataclass(frozen=True)
class EngineConfig:
    n: int
    f: int
    txs_per_block: int = 100
    tx_bytes: int = 250
    horizon: int = 64
    # basic protocol only: "direct" or "literal", see fhs_basic
    basic_commit_guard: str = "direct"
    prefer_qc_path: bool = True


class Behavior:
    """Honest defaults; adversary strategies override individual hooks."""

    def choose_proposal(self, replica: "Replica", view: int, honest: tuple[bytes, Justify] | None):
        return honest

    def targets(self, replica: "Replica", dest: int | None, msg: Message) -> Sequence[int] | None:
        """Restrict a send. ``None`` keeps the original destination."""
        return None

    def silent(self, replica: "Replica") -> bool:
        return False


HONEST = Behavior()


def justify_kind(j: Justify) -> str:
    return "aggqc" if isinstance(j, AggregateQC) else "qc"


class Replica:
    protocol = "abstract"
    vote_type = Phase.GENERIC

    def __init__(
        self,
        rid: int,
        cfg: EngineConfig,
        scheme: MockScheme,
        pacemaker: Pacemaker,
        genesis_qc: QuorumCert,
        behavior: Behavior = HONEST,
        payload_tag: bytes = b"",
    ) -> None:
        self.id = rid
        self.cfg = cfg
        self.n = cfg.n
        self.f = cfg.f
        self.quorum = quorum_size(cfg.f)
        self.scheme = scheme
        self.key = scheme.keypair(rid)
        self.pm = pacemaker
        self.behavior = behavior
        self.payload_tag = payload_tag
        self.genesis_qc = genesis_qc
        self.tree = BlockTree(genesis_qc)
        self.cur_view = 0
        self.outbox: list[tuple[int | None, Message]] = []
        self.timers: list[tuple[int, int]] = []
        self.notes: list[dict[str, Any]] = []
        self.proposed_views: set[int] = set()
        # missing block -> view in which it was last requested
        self.fetching: dict[bytes, int] = {}
        self.newviews: dict[int, dict[int, NewViewMsg]] = {}
        # highest NEWVIEW view seen from each sender, and views we broadcast one for
        self.newview_high: dict[int, int] = {}
        self.newview_sent: set[int] = set()
        # no votes or proposals at or below this view once a NEWVIEW left it
        self.abandoned_view = 0
        # view in which this replica last saw a commit; timers back off from it
        self.commit_anchor = 0

    # -- plumbing -----------------------------------------------------------

    @property
    def high_qc(self) -> QuorumCert:
        return self.tree.high_qc

    def leader(self, view: int) -> int:
        return self.pm.leader(view)

    def note(self, kind: str, **fields: Any) -> None:
        fields["k"] = kind
        fields["r"] = self.id
        self.notes.append(fields)

    def send(self, dest: int | None, msg: Message) -> None:
        if self.behavior.silent(self):
            return
        restricted = self.behavior.targets(self, dest, msg)
        if restricted is None:
            self.outbox.append((dest, msg))
        else:
            for d in restricted:
                self.outbox.append((d, msg))

    def broadcast(self, msg: Message) -> None:
        self.send(None, msg)

    def set_timer(self) -> None:
        self.timers.append((self.cur_view, self.pm.current_timeout))

    def enter_view(self, view: int, reason: str) -> bool:
        if view <= self.cur_view:
            return False
        self.cur_view = view
        self.note("view", view=view, why=reason)
        self.pm.align(view, self.commit_anchor)
        self.set_timer()
        self.newviews = {k: v for k, v in self.newviews.items() if k >= view}
        self.newview_sent = {w for w in self.newview_sent if w >= view}
        # requests and responses may have been lost before GST; ask again
        for missing in [h for h in self.fetching if not self.tree.known(h)]:
            self.request(missing)
        return True

    # -- signing helpers -----------------------------------------------------

    def make_vote(self, vote_type: Phase, view: int, block: bytes) -> VoteMsg:
        sig = self.scheme.sign(self.key, vote_message(vote_type, view, block, self.id))
        return VoteMsg(vote_type, view, block, self.id, sig)

    def make_newview(self, view: int, qc: QuorumCert) -> NewViewMsg:
        sig = self.scheme.sign(self.key, newview_message(view, qc.block, self.id))
        return NewViewMsg(view, qc, self.id, sig)

    def make_block(self, view: int, parent: bytes, justify: Justify) -> Block:
        txs = self.cfg.txs_per_block
        payload = Payload(txs, txs * self.cfg.tx_bytes, self.payload_tag)
        b = Block(view, self.id, parent, justify, payload)
        b = Block(view, self.id, parent, justify, payload, sig=self.scheme.sign(self.key, proposal_message(b.hash)))
        high = justify if isinstance(justify, QuorumCert) else None
        self.note(
            "block", view=view, block=short(b.hash), parent=short(parent), proposer=self.id,
            justify=justify_kind(justify), jview=justify.view, jblock=short(high.block) if high else None,
            txs=payload.txs, nbytes=payload.nbytes,
        )
        return b

    def check_vote(self, v: VoteMsg) -> bool:
        return 0 <= v.voter < self.n and self.scheme.verify(
            self.scheme.public_keys[v.voter], v.message(), v.sig
        )

    def check_newview_sig(self, m: NewViewMsg) -> bool:
        return 0 <= m.sender < self.n and self.scheme.verify(
            self.scheme.public_keys[m.sender], m.message(), m.sig
        )

    def check_proposer(self, b: Block) -> bool:
        if b.sig is None or b.proposer != self.leader(b.view) or b.sig.signer != b.proposer:
            return False
        return self.scheme.verify(self.scheme.public_keys[b.proposer], proposal_message(b.hash), b.sig)

    def observe_qc(self, qc: QuorumCert) -> None:
        if qc.view > self.tree.high_qc.view:
            self.tree.high_qc = qc

    # -- commits -------------------------------------------------------------

    def commit(self, block_hash: bytes, trigger_view: int, trigger: str) -> list[Block]:
        try:
            done = self.tree.commit(block_hash)
        except CommitConflict as exc:
            self.note("violation", what="commit_conflict", detail=str(exc), block=short(block_hash))
            return []
        if done:
            self.commit_anchor = max(self.commit_anchor, trigger_view)
        for blk in done:
            self.note(
                "commit", height=self.tree.height(blk.hash), view=blk.view, block=short(blk.hash),
                proposer=blk.proposer, txs=blk.payload.txs, trigger_view=trigger_view, trigger=trigger,
            )
            parent = self.tree.blocks[blk.parent]
            if blk.view > 1 and parent.view < blk.view - 1:
                self.pm.charge_gap(parent.view, blk.view)
        return done

    # -- block intake --------------------------------------------------------

    def validate_block(self, b: Block) -> bool:
        raise NotImplementedError

    def on_connected(self, b: Block, source: str) -> None:
        raise NotImplementedError

    def receive_block(self, b: Block, source: str) -> None:
        if b.view <= 0 or self.tree.known(b.hash):
            return
        before = self.scheme.agg_verifications
        ok = self.validate_block(b)
        self.note(
            "verify", view=b.view, block=short(b.hash), path=justify_kind(b.justify),
            aggv=self.scheme.agg_verifications - before, ok=ok, src=source,
        )
        if not ok:
            return
        res = self.tree.insert(b)
        if res.outcome is InsertOutcome.QUARANTINED:
            assert res.missing is not None
            if self.fetching.get(res.missing, -1) < self.cur_view:
                self.request(res.missing)
            return
        for blk in res.connected:
            self.fetching.pop(blk.hash, None)
            self.on_connected(blk, source if blk is b else "fetch")

    def request(self, missing: bytes) -> None:
        self.fetching[missing] = self.cur_view
        self.note("fetch", block=short(missing))
        self.broadcast(FetchRequest(missing))

    def on_fetch(self, sender: int, msg: FetchRequest | FetchResponse) -> None:
        if isinstance(msg, FetchRequest):
            blk = self.tree.blocks.get(msg.block)
            if blk is not None and blk.view > 0 and sender != self.id:
                self.send(sender, FetchResponse(blk))
        else:
            if msg.block.hash in self.fetching or self.tree.quarantine.get(msg.block.hash):
                self.receive_block(msg.block, "fetch")

    # -- view synchronization ------------------------------------------------
    #
    # A timeout does not move a replica on by itself.  It broadcasts a NEWVIEW
    # for the next view and waits; a view is entered on a certificate, on a
    # quorum of NEWVIEWs for it, or once f+1 replicas (so at least one honest)
    # have asked for a later view.  Honest replicas therefore cannot drift
    # apart on their local clocks alone.

    def time_out(self, view: int) -> None:
        self.pm.on_view_failure()
        self.note("timeout", view=view)
        # resent on every expiry: replicas still behind may need ours to
        # complete a quorum, and earlier copies may have been lost before GST
        self.broadcast_newview(view)
        self.broadcast_newview(view + 1)
        self.set_timer()

    def broadcast_newview(self, view: int) -> None:
        self.newview_sent.add(view)
        self.abandoned_view = max(self.abandoned_view, view - 1)
        self.broadcast(self.make_newview(view, self.high_qc))

    def on_newview(self, m: NewViewMsg) -> bool:
        if m.view < self.cur_view or m.view > self.cur_view + self.cfg.horizon:
            return False
        bucket = self.newviews.setdefault(m.view, {})
        if m.sender in bucket or m.prepare_qc.view >= m.view or m.prepare_qc.cert_type != self.vote_type:
            return False
        if not self.check_newview_sig(m) or not verify_qc(self.scheme, m.prepare_qc, self.quorum):
            return False
        bucket[m.sender] = m
        self.newview_high[m.sender] = max(self.newview_high.get(m.sender, 0), m.view)
        self.synchronize()
        return True

    def synchronize(self) -> None:
        highs = sorted(self.newview_high.values(), reverse=True)
        if len(highs) > self.f:
            # f+1 replicas have given up on every view below ``ahead``
            ahead = highs[self.f]
            if ahead - 1 > self.cur_view:
                self.enter_view(ahead - 1, "sync")
            for w in (self.cur_view, self.cur_view + 1):
                if w > ahead:
                    continue
                if self.leader(w) == self.id:
                    self.newviews.setdefault(w, {}).setdefault(self.id, self.make_newview(w, self.high_qc))
                elif w not in self.newview_sent:
                    self.broadcast_newview(w)
        for w in sorted(self.newviews, reverse=True):
            if w > self.cur_view and len(self.newviews[w]) >= self.quorum:
                self.enter_view(w, "newview_quorum")
                break

    # -- entry points --------------------------------------------------------

    def start(self) -> None:
        raise NotImplementedError

    def on_message(self, sender: int, msg: Message) -> None:
        raise NotImplementedError

    def on_timer(self, view: int) -> None:
        raise NotImplementedError

    def drain(self) -> tuple[list, list, list]:
        out, timers, notes = self.outbox, self.timers, self.notes
        self.outbox, self.timers, self.notes = [], [], []
        return out, timers, notes
