import pytest
from hypothesis import given
from hypothesis import strategies as st

from bftlab.certs import (
    QuorumNotMet,
    build_qc,
    create_agg_qc,
    extract_high_qc,
    make_genesis_qc,
    quorum_size,
    verify_agg_qc,
    verify_qc,
)
from bftlab.core import GENESIS, AggregateQC, NewViewMsg, Phase, QuorumCert, VoteMsg, newview_message, vote_message
from bftlab.crypto import MockScheme


def vote(s, i, view, block, phase=Phase.GENERIC):
    return VoteMsg(phase, view, block, i, s.sign(s.keypair(i), vote_message(phase, view, block, i)))


def qc_for(s, view, block, voters, phase=Phase.GENERIC):
    return build_qc(s, [vote(s, i, view, block, phase) for i in voters])


def newview(s, i, view, qc):
    return NewViewMsg(view, qc, i, s.sign(s.keypair(i), newview_message(view, qc.block, i)))


def test_quorum_size():
    assert [quorum_size(f) for f in (0, 1, 13, 33)] == [1, 3, 27, 67]


def test_qc_roundtrip_and_threshold():
    s = MockScheme(4)
    qc = qc_for(s, 5, b"\x01" * 32, [0, 1, 3])
    assert verify_qc(s, qc, 3)
    assert not verify_qc(s, qc, 4)
    forged = QuorumCert(qc.cert_type, 6, qc.block, qc.signers, qc.agg_sig)
    assert not verify_qc(s, forged, 3)


def test_mixed_votes_rejected():
    s = MockScheme(4)
    with pytest.raises(ValueError):
        build_qc(s, [vote(s, 0, 1, b"a" * 32), vote(s, 1, 1, b"b" * 32)])


def test_genesis_qc_verifies():
    s = MockScheme(7)
    assert verify_qc(s, make_genesis_qc(s, Phase.PREPARE), 5)


@pytest.mark.parametrize("n", [4, 40, 100])
def test_aggregated_certificate_costs_two_verifications(n):
    f = (n - 1) // 3
    q = 2 * f + 1
    s = MockScheme(n)
    qcs = [qc_for(s, v, bytes([v]) * 32, range(q)) for v in (1, 2, 3)]
    msgs = [newview(s, i, 9, qcs[i % 3]) for i in range(q)]
    agg = create_agg_qc(s, msgs, q)
    before = s.agg_verifications
    assert verify_agg_qc(s, agg, q)
    assert s.agg_verifications - before == 2
    assert extract_high_qc(agg).view == 3


@given(st.lists(st.integers(0, 20), min_size=3, max_size=3))
def test_extract_high_picks_the_max_view(views):
    s = MockScheme(4)
    by_view = {v: qc_for(s, v, bytes([v]) * 32, [0, 1, 2]) for v in set(views)}
    agg = create_agg_qc(s, [newview(s, i, 21, by_view[v]) for i, v in enumerate(views)], 3)
    assert extract_high_qc(agg).view == max(views)
    assert verify_agg_qc(s, agg, 3)


def test_agg_qc_rejections():
    s = MockScheme(4)
    qc = qc_for(s, 1, GENESIS.hash, [0, 1, 2])
    with pytest.raises(QuorumNotMet):
        create_agg_qc(s, [newview(s, 0, 2, qc), newview(s, 0, 2, qc), newview(s, 1, 2, qc)], 3)
    agg = create_agg_qc(s, [newview(s, i, 2, qc) for i in range(3)], 3)
    # a member certificate from the aggregate's own view is not allowed
    same_view = qc_for(s, 2, GENESIS.hash, [0, 1, 2])
    bad = AggregateQC(2, ((0, same_view),) + agg.qc_set[1:], agg.agg_sig)
    assert not verify_agg_qc(s, bad, 3)
    # swapping a member certificate breaks the outer aggregate
    other = qc_for(s, 1, b"\x02" * 32, [0, 1, 2])
    swapped = AggregateQC(2, ((0, other),) + agg.qc_set[1:], agg.agg_sig)
    assert not verify_agg_qc(s, swapped, 3)


def test_equal_view_members_must_agree():
    s = MockScheme(4)
    a = qc_for(s, 1, b"\x01" * 32, [0, 1, 2])
    b = qc_for(s, 1, b"\x02" * 32, [0, 1, 3])
    agg = create_agg_qc(s, [newview(s, 0, 2, a), newview(s, 1, 2, b), newview(s, 2, 2, a)], 3)
    assert not verify_agg_qc(s, agg, 3)
