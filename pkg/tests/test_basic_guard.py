"""The basic protocol's PrepareQC commit path needs the one-view guard.

A hand-driven run with n=4, replica 3 Byzantine and leading views 1 and 3.
Replica 3 hides the certificate for its view-1 block P, lets view 2 certify a
sibling P', then reveals P's certificate in view 3's aggregated certificate
and shows the resulting PrepareQC to replica 1 alone.  With the literal rule
replica 1 commits P while replicas 0 and 2 go on to commit P'.
"""

from __future__ import annotations

from bftlab.certs import build_qc, create_agg_qc, make_genesis_qc
from bftlab.core import GENESIS, NewViewMsg, Phase, Proposal, QCAnnounce, VoteMsg
from bftlab.crypto import MockScheme
from bftlab.engine import EngineConfig
from bftlab.fhs_basic import BasicFHS
from bftlab.pacemaker import Pacemaker, Scripted

HONEST = (0, 1, 2)
BYZ = 3


class Net:
    """Honest engines plus a manual inbox for the Byzantine replica."""

    def __init__(self, guard: str) -> None:
        self.scheme = MockScheme(4)
        genesis_qc = make_genesis_qc(self.scheme, Phase.PREPARE)
        cfg = EngineConfig(n=4, f=1, basic_commit_guard=guard)
        # leaders: view 1 -> 3, 2 -> 0, 3 -> 3, 4 -> 0
        schedule = Scripted((0, 3, 0, 3, 0))
        self.r = {
            i: BasicFHS(i, cfg, self.scheme, Pacemaker(4, 1, 80, schedule), genesis_qc)
            for i in range(4)
        }
        self.byz_inbox: list[tuple[int, object]] = []
        self.held: list[tuple[int, int, object]] = []
        # messages between honest replicas that are held back
        self.hold = lambda src, dst, msg: False

    def collect(self, rid: int) -> list[tuple[int, int, object]]:
        out, _, _ = self.r[rid].drain()
        msgs = []
        for dest, msg in out:
            for d in (range(4) if dest is None else (dest,)):
                msgs.append((rid, d, msg))
        return msgs

    def flow(self) -> None:
        """Deliver honest traffic until quiet."""
        pending = [m for i in HONEST for m in self.collect(i)]
        while pending:
            src, dst, msg = pending.pop(0)
            if dst == BYZ:
                self.byz_inbox.append((src, msg))
            elif self.hold(src, dst, msg):
                self.held.append((src, dst, msg))
            else:
                self.r[dst].on_message(src, msg)
                pending.extend(self.collect(dst))

    def byz_send(self, msg, to) -> None:
        for d in to:
            self.r[d].on_message(BYZ, msg)
        self.flow()

    def byz_received(self, kind, view) -> list:
        return [m for _, m in self.byz_inbox if isinstance(m, kind) and m.view == view]


def committed(rep: BasicFHS) -> list[bytes]:
    return rep.tree.committed[1:]


def drive(guard: str) -> tuple[Net, bytes, bytes]:
    net = Net(guard)
    byz = net.r[BYZ]
    for i in HONEST:
        net.r[i].start()
    net.flow()

    # view 1: P from the Byzantine leader; its PrepareQC is formed and hidden
    agg1 = create_agg_qc(net.scheme, net.byz_received(NewViewMsg, 1), 3)
    p = byz.make_block(1, GENESIS.hash, agg1)
    net.byz_send(Proposal(p), HONEST)
    votes = [v for v in net.byz_received(VoteMsg, 1) if v.vote_type == Phase.PREPARE]
    assert len(votes) == 3
    qc_p = build_qc(net.scheme, votes[:2] + [byz.make_vote(Phase.PREPARE, 1, p.hash)])

    # view 2: replica 0 certifies the sibling P'; only replica 0 sees that QC
    net.hold = lambda src, dst, msg: isinstance(msg, QCAnnounce) and dst != src
    for i in HONEST:
        net.r[i].on_timer(1)
    net.flow()
    assert all(net.r[i].cur_view == 2 for i in HONEST)
    p2 = net.r[0].proposals[2][0]
    assert p2.parent == GENESIS.hash and net.r[0].prepare_qc.view == 2

    # view 3: replicas 1 and 2 give up on view 2; the Byzantine leader
    # builds on P and shows the PrepareQC to replica 1 only
    for i in (1, 2):
        net.r[i].on_timer(2)
    net.flow()
    net.byz_send(byz.make_newview(3, qc_p), HONEST)
    assert net.r[1].cur_view == 3 and net.r[2].cur_view == 3
    nv3 = [m for m in net.byz_received(NewViewMsg, 3) if m.sender in (1, 2)]
    agg3 = create_agg_qc(net.scheme, nv3 + [byz.make_newview(3, qc_p)], 3)
    b = byz.make_block(3, p.hash, agg3)
    net.byz_send(Proposal(b), (1, 2))
    votes = [v for v in net.byz_received(VoteMsg, 3) if v.vote_type == Phase.PREPARE and v.voter in (1, 2)]
    qc_b = build_qc(net.scheme, votes + [byz.make_vote(Phase.PREPARE, 3, b.hash)])
    net.byz_send(QCAnnounce(qc_b), (1,))

    # view 4: replica 0 leads with P' as the highest certificate
    net.hold = lambda src, dst, msg: dst == 1
    for i in (0, 2):
        net.r[i].on_timer(net.r[i].cur_view)
    net.flow()
    qc_p2 = net.r[0].prepare_qc
    net.byz_send(byz.make_newview(4, qc_p2), (0, 2))
    assert net.r[0].cur_view == 4
    c = net.r[0].proposals[4][0]
    assert c.parent == p2.hash
    net.byz_send(byz.make_vote(Phase.PREPARE, 4, c.hash), (0,))
    net.byz_send(byz.make_vote(Phase.PRECOMMIT, 4, c.hash), (0,))
    return net, p.hash, p2.hash


def test_literal_guard_commits_conflicting_blocks():
    net, p, p2 = drive("literal")
    assert committed(net.r[1]) == [p]
    assert committed(net.r[0])[0] == p2
    assert committed(net.r[2])[0] == p2


def test_direct_guard_keeps_replicas_consistent():
    net, p, p2 = drive("direct")
    assert committed(net.r[1]) == []
    assert committed(net.r[0])[0] == p2
    chains = [committed(net.r[i]) for i in HONEST]
    for a in chains:
        for b in chains:
            k = min(len(a), len(b))
            assert a[:k] == b[:k]
