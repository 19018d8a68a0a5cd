import pytest
from hypothesis import given
from hypothesis import strategies as st

from bftlab.crypto import DuplicateSigner, MockScheme


def signed(scheme, ids, msg=b"m"):
    return [(i, msg + bytes([i]), scheme.sign(scheme.keypair(i), msg + bytes([i]))) for i in ids]


def test_sign_verify_roundtrip():
    s = MockScheme(4)
    sig = s.sign(s.keypair(2), b"hello")
    assert s.verify(s.public_keys[2], b"hello", sig)
    assert not s.verify(s.public_keys[2], b"hellO", sig)
    assert not s.verify(s.public_keys[1], b"hello", sig)


def test_schemes_with_same_seed_agree():
    a, b = MockScheme(4, seed=3), MockScheme(4, seed=3)
    sig = a.sign(a.keypair(0), b"x")
    assert b.verify(b.public_keys[0], b"x", sig)
    assert not MockScheme(4, seed=4).verify(MockScheme(4, seed=4).public_keys[0], b"x", sig)


@given(st.sets(st.integers(0, 9), min_size=1))
def test_aggregate_verifies_exactly_its_pairs(ids):
    s = MockScheme(10)
    pairs = signed(s, sorted(ids))
    agg = s.aggregate(pairs)
    assert s.verify_aggregate(agg, [(i, m) for i, m, _ in pairs])
    # drop one pair, or alter one message
    if len(pairs) > 1:
        assert not s.verify_aggregate(agg, [(i, m) for i, m, _ in pairs[1:]])
    i, m, _ = pairs[0]
    assert not s.verify_aggregate(agg, [(i, m + b"!")] + [(j, n) for j, n, _ in pairs[1:]])


def test_each_aggregate_check_counts_once():
    s = MockScheme(4)
    agg = s.aggregate(signed(s, [0, 1, 2]))
    before = s.agg_verifications
    s.verify_aggregate(agg, [(0, b"m\x00"), (1, b"m\x01"), (2, b"m\x02")])
    s.verify_aggregate(agg, [(0, b"bad")])
    assert s.agg_verifications - before == 2


def test_duplicate_signer_rejected():
    s = MockScheme(4)
    pairs = signed(s, [0, 1])
    with pytest.raises(DuplicateSigner):
        s.aggregate(pairs + pairs[:1])
    with pytest.raises(ValueError):
        s.aggregate([])


def test_signature_must_match_claimed_signer():
    s = MockScheme(4)
    (_, m, sig), = signed(s, [1])
    with pytest.raises(ValueError):
        s.aggregate([(2, m, sig)])
