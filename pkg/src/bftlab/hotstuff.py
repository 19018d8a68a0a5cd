"""Pipelined three-chain HotStuff, the comparison baseline.

Proposals always carry a single QC.  Replicas lock on the grandparent of the
block they vote for and accept a proposal that either extends the locked block
or carries a QC newer than the lock.  That second clause is what lets a
Byzantine leader reuse an old QC and orphan uncommitted honest blocks.
"""

from __future__ import annotations

from .certs import verify_qc
from .core import GENESIS, Block, Phase, QuorumCert, short
from .fhs_pipelined import VotingReplica


class HotStuff(VotingReplica):
    protocol = "hotstuff"
    vote_type = Phase.GENERIC

    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        self.locked_block = GENESIS.hash
        self.last_locked_view = 0

    def honest_proposal(self, view: int):
        if self.high_qc.view == view - 1:
            return (self.high_qc.block, self.high_qc)
        # after a timeout the leader waits for a NEWVIEW quorum, whose QCs
        # have already been folded into high_qc
        if len(self.newviews.get(view, {})) >= self.quorum:
            return (self.high_qc.block, self.high_qc)
        return None

    def validate_block(self, b: Block) -> bool:
        if not self.check_proposer(b):
            return False
        j = b.justify
        if not isinstance(j, QuorumCert) or j.cert_type != Phase.GENERIC:
            return False
        if j.view >= b.view or b.parent != j.block:
            return False
        return verify_qc(self.scheme, j, self.quorum)

    def vote_rule(self, b: Block) -> bool:
        """Extends the locked block (descendant-or-equal) or carries a newer QC."""
        if self.tree.is_ancestor(self.locked_block, b.hash):
            return True
        return b.justify.view > self.last_locked_view

    def on_connected(self, b: Block, source: str) -> None:
        self.observe_qc(b.justify)
        self.apply_commit_rule(b)
        if b.view >= self.cur_view and b.view > max(self.last_voted_view, self.abandoned_view) and self.vote_rule(b):
            self.vote_for(b)
            self.update_lock(b)
        else:
            self.enter_view(b.justify.view + 1, "certified")

    def update_lock(self, b: Block) -> None:
        parent = self.tree.blocks[b.parent]
        if parent.view == 0:
            return
        grand = self.tree.blocks[parent.parent]
        if grand.view > self.last_locked_view:
            self.locked_block = grand.hash
            self.last_locked_view = grand.view
            self.note("lock", view=grand.view, block=short(grand.hash))

    def apply_commit_rule(self, b: Block) -> list[Block]:
        b2 = self.tree.blocks[b.parent]
        if b2.view == 0:
            return []
        b1 = self.tree.blocks[b2.parent]
        if b1.view == 0:
            return []
        b0 = self.tree.blocks[b1.parent]
        if b2.view == b1.view + 1 and b1.view == b0.view + 1:
            return self.commit(b0.hash, b.view, "three_chain")
        return []
