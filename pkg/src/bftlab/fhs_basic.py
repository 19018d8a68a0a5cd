"""Basic (non-pipelined) Fast-HotStuff replica.

Every view runs NEWVIEW -> PREPARE -> PRECOMMIT.  The leader aggregates a
quorum of NEWVIEW messages into the proposal's justification, collects
PREPARE votes into a PrepareQC, then PRECOMMIT votes into a PrecommitQC; both
certificates are broadcast.  A PrecommitQC commits its block.  A PrepareQC
additionally commits the block the proposal extends, which rescues replicas
that never saw the previous view's PrecommitQC.

That second commit path is guarded.  Under ``basic_commit_guard="direct"``
(the default) it only fires when the proposal sits exactly one view above the
certificate it extends.  ``"literal"`` fires unconditionally and is kept for
the counterexample in the test suite: a leader can hold back a certificate
and later reveal it, so that two replicas commit siblings.
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
    QCAnnounce,
    QuorumCert,
    VoteMsg,
    short,
)
from .engine import Replica

__all__ = [
    "BasicFHS",
    "basic_safe_proposal",
    "create_agg_qc",
    "extract_high_qc",
    "verify_agg_qc",
]


def basic_safe_proposal(b: Block, high_qc: QuorumCert) -> bool:
    return b.parent == high_qc.block


class BasicFHS(Replica):
    protocol = "basic_fhs"
    vote_type = Phase.PREPARE

    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        # proposal accepted for each view, with the high QC it extends
        self.proposals: dict[int, tuple[Block, QuorumCert]] = {}
        self.voted: set[tuple[int, Phase]] = set()
        self.votes: dict[tuple[int, Phase, bytes], dict[int, VoteMsg]] = {}
        self.formed: set[tuple[int, Phase]] = set()
        self.pending_qcs: dict[int, list[QuorumCert]] = {}

    @property
    def prepare_qc(self) -> QuorumCert:
        return self.tree.high_qc

    # -- view changes --------------------------------------------------------

    def start(self) -> None:
        self.enter_view(1, "start")
        self.send(self.leader(1), self.make_newview(1, self.prepare_qc))

    def enter_view(self, view: int, reason: str) -> bool:
        moved = super().enter_view(view, reason)
        if moved:
            self.votes = {k: v for k, v in self.votes.items() if k[0] >= view}
            self.proposals = {k: v for k, v in self.proposals.items() if k >= view - 1}
            ready = self.pending_qcs.pop(view, [])
            self.pending_qcs = {k: v for k, v in self.pending_qcs.items() if k > view}
            for qc in ready:
                self.on_qc(qc)
        return moved

    def on_timer(self, view: int) -> None:
        if view != self.cur_view:
            return
        self.time_out(view)

    def advance(self, view: int, reason: str) -> None:
        if self.enter_view(view, reason):
            self.send(self.leader(view), self.make_newview(view, self.prepare_qc))

    # -- dispatch ------------------------------------------------------------

    def on_message(self, sender: int, msg: Message) -> None:
        if isinstance(msg, Proposal):
            b = msg.block
            if self.cur_view <= b.view <= self.cur_view + self.cfg.horizon:
                self.receive_block(b, "proposal")
        elif isinstance(msg, VoteMsg):
            self.on_vote(msg)
        elif isinstance(msg, NewViewMsg):
            self.on_newview(msg)
        elif isinstance(msg, QCAnnounce):
            self.on_qc(msg.qc)
        elif isinstance(msg, (FetchRequest, FetchResponse)):
            self.on_fetch(sender, msg)
        self.try_propose()

    # -- leader side ---------------------------------------------------------

    def try_propose(self) -> None:
        v = self.cur_view
        if v in self.proposed_views or v <= self.abandoned_view or self.leader(v) != self.id:
            return
        nvs = self.newviews.get(v, {})
        if len(nvs) < self.quorum:
            return
        try:
            agg = create_agg_qc(self.scheme, nvs.values(), self.quorum)
            high = extract_high_qc(agg)
        except EqualViewDivergence as exc:
            self.note("violation", what="equal_view_qcs", detail=str(exc))
            return
        except QuorumNotMet:
            return
        self.proposed_views.add(v)
        choice = self.behavior.choose_proposal(self, v, (high.block, agg))
        if choice is None:
            return
        parent, justify = choice
        if isinstance(justify, AggregateQC):
            h = extract_high_qc(justify)
            self.note("aggqc", view=justify.view, high_view=h.view, high_block=short(h.block),
                      contributors=justify.contributors)
        self.broadcast(Proposal(self.make_block(v, parent, justify)))

    def on_vote(self, v: VoteMsg) -> None:
        if v.vote_type not in (Phase.PREPARE, Phase.PRECOMMIT) or self.leader(v.view) != self.id:
            return
        if v.view < self.cur_view or v.view > self.cur_view + self.cfg.horizon:
            return
        if (v.view, v.vote_type) in self.formed or not self.check_vote(v):
            return
        bucket = self.votes.setdefault((v.view, v.vote_type, v.block), {})
        if v.voter in bucket:
            return
        bucket[v.voter] = v
        if len(bucket) >= self.quorum:
            qc = build_qc(self.scheme, bucket.values())
            self.formed.add((v.view, v.vote_type))
            self.note("qc", type=qc.cert_type.name, view=qc.view, block=short(qc.block),
                      signers=sorted(qc.signers))
            self.broadcast(QCAnnounce(qc))

    # -- replica side --------------------------------------------------------

    def validate_block(self, b: Block) -> bool:
        if not self.check_proposer(b):
            return False
        j = b.justify
        if not isinstance(j, AggregateQC) or j.view != b.view:
            return False
        try:
            high = extract_high_qc(j)
        except EqualViewDivergence as exc:
            self.note("violation", what="equal_view_qcs", detail=str(exc), view=j.view)
            return False
        if high.cert_type != Phase.PREPARE or not basic_safe_proposal(b, high):
            return False
        return verify_agg_qc(self.scheme, j, self.quorum)

    def on_connected(self, b: Block, source: str) -> None:
        if b.view < self.cur_view or b.view in self.proposals:
            return
        # a valid aggregated certificate proves a quorum reached this view
        self.enter_view(b.view, "proposal")
        high = extract_high_qc(b.justify)
        self.observe_qc(high)
        self.proposals[b.view] = (b, high)
        if (b.view, Phase.PREPARE) not in self.voted and b.view > self.abandoned_view:
            self.voted.add((b.view, Phase.PREPARE))
            self.note("vote", type="PREPARE", view=b.view, block=short(b.hash))
            self.send(self.leader(b.view), self.make_vote(Phase.PREPARE, b.view, b.hash))
        for qc in self.pending_qcs.pop(b.view, []):
            self.on_qc(qc)

    def on_qc(self, qc: QuorumCert) -> None:
        if qc.view < self.cur_view or qc.view > self.cur_view + self.cfg.horizon:
            return
        if qc.cert_type not in (Phase.PREPARE, Phase.PRECOMMIT):
            return
        prop = self.proposals.get(qc.view)
        if qc.view > self.cur_view or prop is None or prop[0].hash != qc.block:
            # wait for the view or the proposal; validity is checked on use
            self.pending_qcs.setdefault(qc.view, []).append(qc)
            return
        if not verify_qc(self.scheme, qc, self.quorum):
            return
        b, high = prop
        if qc.cert_type == Phase.PREPARE:
            self.on_prepare_qc(qc, b, high)
        else:
            self.on_precommit_qc(qc, b)

    def on_prepare_qc(self, qc: QuorumCert, b: Block, high: QuorumCert) -> None:
        if (qc.view, Phase.PRECOMMIT) in self.voted:
            return
        self.observe_qc(qc)
        guard = self.cfg.basic_commit_guard
        if guard == "literal" or (guard == "direct" and b.view == high.view + 1):
            self.commit(high.block, qc.view, "prepare_qc")
        if qc.view <= self.abandoned_view:
            return
        self.voted.add((qc.view, Phase.PRECOMMIT))
        self.note("vote", type="PRECOMMIT", view=qc.view, block=short(qc.block))
        self.send(self.leader(qc.view), self.make_vote(Phase.PRECOMMIT, qc.view, qc.block))

    def on_precommit_qc(self, qc: QuorumCert, b: Block) -> None:
        self.commit(b.hash, qc.view, "precommit_qc")
        self.pm.on_view_success()
        self.advance(qc.view + 1, "precommit_qc")
