"""Pipelined Fast-HotStuff replica.

One vote type per view.  A proposal carries either the QC of the previous view
or, after a failed view, an aggregated certificate built from a quorum of
NEWVIEW messages.  A block is committed once a child and grandchild exist and
the link between the block and its child spans exactly one view.
"""

from __future__ import annotations

from .certs import (
    EqualViewDivergence,
    QuorumNotMet,
    build_qc,
    create_agg_qc,
    extract_high_qc,
    verify_agg_qc,
    verify_qc,
)
from .core import (
    AggregateQC,
    Block,
    FetchRequest,
    FetchResponse,
    Message,
    NewViewMsg,
    Phase,
    Proposal,
    QuorumCert,
    VoteMsg,
    short,
)
from .engine import Replica


def pipelined_safe_block(b: Block, cur_view: int) -> bool:
    """Vote condition for a structurally valid block."""
    j = b.justify
    if isinstance(j, QuorumCert):
        return b.view >= cur_view and b.view == j.view + 1
    return b.parent == extract_high_qc(j).block


def certified_parent(b: Block) -> QuorumCert:
    """The certificate that vouches for ``b``'s parent."""
    j = b.justify
    return j if isinstance(j, QuorumCert) else extract_high_qc(j)


class VotingReplica(Replica):
    """Vote/NEWVIEW bookkeeping shared by the two pipelined engines."""

    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        self.last_voted_view = 0
        self.votes: dict[tuple[int, bytes], dict[int, VoteMsg]] = {}
        self.formed_qc_views: set[int] = set()

    def start(self) -> None:
        self.enter_view(1, "start")
        self.try_propose()

    def enter_view(self, view: int, reason: str) -> bool:
        moved = super().enter_view(view, reason)
        if moved:
            floor = view - 2
            self.votes = {k: v for k, v in self.votes.items() if k[0] >= floor}
            if self.leader(view) == self.id:
                # a leader that arrived by voting still counts toward its own
                # NEWVIEW quorum
                self.newviews.setdefault(view, {}).setdefault(self.id, self.make_newview(view, self.high_qc))
        return moved

    def on_message(self, sender: int, msg: Message) -> None:
        if isinstance(msg, Proposal):
            self.receive_block(msg.block, "proposal")
        elif isinstance(msg, VoteMsg):
            self.on_vote(msg)
        elif isinstance(msg, NewViewMsg):
            self.on_newview(msg)
        elif isinstance(msg, (FetchRequest, FetchResponse)):
            self.on_fetch(sender, msg)
        self.try_propose()

    def on_timer(self, view: int) -> None:
        if view != self.cur_view:
            return
        self.time_out(view)

    def on_vote(self, v: VoteMsg) -> None:
        if v.vote_type != self.vote_type or self.leader(v.view + 1) != self.id:
            return
        if v.view + 1 < self.cur_view or v.view > self.cur_view + self.cfg.horizon:
            return
        if v.view in self.formed_qc_views or not self.check_vote(v):
            return
        bucket = self.votes.setdefault((v.view, v.block), {})
        if v.voter in bucket:
            return
        bucket[v.voter] = v
        if len(bucket) >= self.quorum:
            qc = build_qc(self.scheme, bucket.values())
            self.formed_qc_views.add(v.view)
            self.note("qc", type=qc.cert_type.name, view=qc.view, block=short(qc.block),
                      signers=sorted(qc.signers))
            self.observe_qc(qc)
            self.enter_view(qc.view + 1, "qc")

    def on_newview(self, m: NewViewMsg) -> bool:
        if not super().on_newview(m):
            return False
        self.observe_qc(m.prepare_qc)
        return True

    def vote_for(self, b: Block) -> None:
        self.last_voted_view = b.view
        self.pm.on_view_success()
        self.note("vote", type=self.vote_type.name, view=b.view, block=short(b.hash))
        self.send(self.leader(b.view + 1), self.make_vote(self.vote_type, b.view, b.hash))
        self.enter_view(b.view + 1, "vote")

    def honest_proposal(self, view: int):
        """``(parent, justify)`` an honest leader would use, or None."""
        raise NotImplementedError

    def try_propose(self) -> None:
        v = self.cur_view
        if v in self.proposed_views or v <= self.abandoned_view or self.leader(v) != self.id:
            return
        honest = self.honest_proposal(v)
        if honest is None:
            return
        self.proposed_views.add(v)
        choice = self.behavior.choose_proposal(self, v, honest)
        if choice is None:
            return
        parent, justify = choice
        if isinstance(justify, AggregateQC):
            high = extract_high_qc(justify)
            self.note("aggqc", view=justify.view, high_view=high.view, high_block=short(high.block),
                      contributors=justify.contributors)
        self.broadcast(Proposal(self.make_block(v, parent, justify)))


class PipelinedFHS(VotingReplica):
    protocol = "pipelined_fhs"
    vote_type = Phase.GENERIC

    def honest_proposal(self, view: int):
        qc_path = None
        if self.high_qc.view == view - 1:
            qc_path = (self.high_qc.block, self.high_qc)
        if qc_path is not None and self.cfg.prefer_qc_path:
            return qc_path
        agg_path = self.agg_proposal(view)
        return agg_path if agg_path is not None else qc_path

    def agg_proposal(self, view: int):
        nvs = self.newviews.get(view, {})
        if len(nvs) < self.quorum:
            return None
        try:
            agg = create_agg_qc(self.scheme, nvs.values(), self.quorum)
            high = extract_high_qc(agg)
        except EqualViewDivergence as exc:
            self.note("violation", what="equal_view_qcs", detail=str(exc))
            return None
        except QuorumNotMet:
            return None
        return (high.block, agg)

    def validate_block(self, b: Block) -> bool:
        if not self.check_proposer(b):
            return False
        j = b.justify
        if isinstance(j, QuorumCert):
            if j.cert_type != Phase.GENERIC or j.view >= b.view or b.parent != j.block:
                return False
            return verify_qc(self.scheme, j, self.quorum)
        if j.view != b.view:
            return False
        try:
            high = extract_high_qc(j)
        except EqualViewDivergence as exc:
            self.note("violation", what="equal_view_qcs", detail=str(exc), view=j.view)
            return False
        # the parent must be the block the aggregated certificate vouches for
        if b.parent != high.block or high.cert_type != Phase.GENERIC:
            return False
        return verify_agg_qc(self.scheme, j, self.quorum)

    def on_connected(self, b: Block, source: str) -> None:
        qc = certified_parent(b)
        self.observe_qc(qc)
        self.apply_commit_rule(b)
        if (b.view >= self.cur_view and b.view > max(self.last_voted_view, self.abandoned_view)
                and pipelined_safe_block(b, self.cur_view)):
            self.vote_for(b)
        else:
            j = b.justify
            target = j.view + 1 if isinstance(j, QuorumCert) else j.view
            self.enter_view(target, "certified")

    def apply_commit_rule(self, b: Block) -> list[Block]:
        parent = self.tree.blocks[b.parent]
        if parent.view == 0:
            return []
        grand = self.tree.blocks[parent.parent]
        if parent.view == grand.view + 1:
            return self.commit(grand.hash, b.view, "two_chain")
        return []
