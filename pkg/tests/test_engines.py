from bftlab.certs import build_qc, make_genesis_qc
from bftlab.core import GENESIS, FetchRequest, NewViewMsg, Phase, Proposal, VoteMsg, newview_message, vote_message
from bftlab.crypto import MockScheme, Signature
from bftlab.engine import EngineConfig
from bftlab.fhs_pipelined import PipelinedFHS
from bftlab.hotstuff import HotStuff
from bftlab.pacemaker import Pacemaker


def cluster(cls=PipelinedFHS, n=4):
    f = (n - 1) // 3
    s = MockScheme(n)
    g = make_genesis_qc(s, Phase.GENERIC)
    cfg = EngineConfig(n=n, f=f)
    return s, [cls(i, cfg, s, Pacemaker(n, f, 80), g) for i in range(n)]


def outbox(r, kind):
    out, _, notes = r.drain()
    return [m for _, m in out if isinstance(m, kind)], notes


def chain(r, views, signer=None):
    """Append blocks at ``views`` directly to the replica's tree, each
    justified by a QC over its parent."""
    s = r.scheme
    parent, blocks = GENESIS, []
    for v in views:
        votes = [VoteMsg(Phase.GENERIC, parent.view, parent.hash, i,
                         s.sign(s.keypair(i), vote_message(Phase.GENERIC, parent.view, parent.hash, i)))
                 for i in range(3)]
        qc = build_qc(s, votes) if parent.view else r.genesis_qc
        b = r.make_block(v, parent.hash, qc)
        r.tree.insert(b)
        blocks.append(b)
        parent = b
    return blocks


def test_two_chain_with_consecutive_views_commits_grandparent():
    _, (r, *_) = cluster()
    b1, b2, b3 = chain(r, [1, 2, 3])
    assert [b.hash for b in r.apply_commit_rule(b3)] == [b1.hash]


def test_gap_between_grandparent_and_parent_blocks_commit():
    _, (r, *_) = cluster()
    b1, b3, b4 = chain(r, [1, 3, 4])
    assert r.apply_commit_rule(b4) == []
    b5 = chain(r, [1, 3, 4, 5])[-1]
    assert r.tree.is_committed(b3.hash) is False
    assert r.apply_commit_rule(b5)


def test_hotstuff_needs_three_consecutive_views():
    _, (r, *_) = cluster(HotStuff)
    b1, b2, b3 = chain(r, [1, 2, 3])
    assert r.apply_commit_rule(b3) == []
    _, (r, *_) = cluster(HotStuff)
    b1, b2, b3, b4 = chain(r, [1, 2, 3, 4])
    assert [b.hash for b in r.apply_commit_rule(b4)] == [b1.hash]


def test_happy_view_one_vote_goes_to_next_leader():
    _, (r0, r1, *_) = cluster()
    r1.start()
    (prop,), _ = outbox(r1, Proposal)
    r0.start()
    r0.drain()
    r0.on_message(1, prop)
    votes, notes = outbox(r0, VoteMsg)
    assert len(votes) == 1 and votes[0].view == 1
    assert r0.cur_view == 2


def test_no_vote_after_abandoning_a_view():
    _, (r0, r1, *_) = cluster()
    r1.start()
    (prop,), _ = outbox(r1, Proposal)
    r0.start()
    r0.on_timer(1)
    nvs, notes = outbox(r0, NewViewMsg)
    assert sorted(m.view for m in nvs) == [1, 2]
    assert r0.abandoned_view == 1 and r0.cur_view == 1
    r0.on_message(1, prop)
    votes, _ = outbox(r0, VoteMsg)
    assert votes == []


def test_timeout_alone_does_not_change_view():
    _, (r0, *_) = cluster()
    r0.start()
    for _ in range(3):
        r0.on_timer(r0.cur_view)
    assert r0.cur_view == 1
    assert r0.pm.consecutive_failures == 3


def test_f_plus_one_newviews_pull_a_replica_forward():
    s, (r0, r1, r2, _) = cluster()
    r0.start()
    for r in (r1, r2):
        r0.on_message(r.id, r.make_newview(5, r.high_qc))
    assert r0.cur_view == 4
    _, notes = outbox(r0, NewViewMsg)
    assert any(n["k"] == "view" and n["why"] == "sync" for n in notes)


def test_newview_quorum_enters_the_view():
    s, rs = cluster()
    r0 = rs[0]
    r0.start()
    for r in rs[1:]:
        r0.on_message(r.id, r.make_newview(3, r.high_qc))
    assert r0.cur_view == 3


def test_bad_newviews_are_ignored():
    s, (r0, r1, *_) = cluster()
    r0.start()
    good = r1.make_newview(2, r1.high_qc)
    assert not r0.on_newview(NewViewMsg(2, good.prepare_qc, 1, Signature(1, b"\x00" * 32)))
    assert not r0.on_newview(NewViewMsg(0, good.prepare_qc, 1, good.sig))
    assert r0.on_newview(good)
    # one per sender per view
    assert not r0.on_newview(good)


def test_outstanding_fetch_is_requested_again_on_view_change():
    s, (r0, r1, *_) = cluster()
    missing = b"\x05" * 32
    r0.start()
    r0.request(missing)
    first, _ = outbox(r0, FetchRequest)
    r0.enter_view(3, "test")
    again, _ = outbox(r0, FetchRequest)
    assert first == again == [FetchRequest(missing)]
    assert r0.fetching[missing] == 3


def test_leader_signature_is_checked():
    s, (r0, r1, *_) = cluster()
    r1.start()
    (prop,), _ = outbox(r1, Proposal)
    forged = Proposal(type(prop.block)(prop.block.view, 2, prop.block.parent, prop.block.justify,
                                       prop.block.payload, sig=prop.block.sig))
    r0.start()
    r0.drain()
    r0.on_message(2, forged)
    assert outbox(r0, VoteMsg)[0] == []
    assert not r0.tree.known(forged.block.hash)


def test_commit_anchor_tracks_last_commit():
    _, (r, *_) = cluster()
    b1, b2, b3 = chain(r, [1, 2, 3])
    r.apply_commit_rule(b3)
    assert r.commit_anchor == 3
    r.enter_view(9, "test")
    assert r.pm.consecutive_failures == 5


def test_newview_message_binds_view_and_sender():
    assert newview_message(2, GENESIS.hash, 1) != newview_message(3, GENESIS.hash, 1)
    assert newview_message(2, GENESIS.hash, 1) != newview_message(2, GENESIS.hash, 2)
