"""Building and checking quorum certificates and aggregated certificates."""

from __future__ import annotations

from typing import Iterable

from .core import (
    GENESIS,
    AggregateQC,
    NewViewMsg,
    Phase,
    QuorumCert,
    VoteMsg,
    newview_message,
    vote_message,
)
from .crypto import MockScheme


class QuorumNotMet(ValueError):
    pass


class EqualViewDivergence(ValueError):
    """Two members of one aggregated certificate share a view but differ."""

    def __init__(self, a: QuorumCert, b: QuorumCert) -> None:
        super().__init__(f"{a!r} vs {b!r}")
        self.a = a
        self.b = b


def quorum_size(f: int) -> int:
    return 2 * f + 1


def make_genesis_qc(scheme: MockScheme, cert_type: Phase) -> QuorumCert:
    """Bootstrap certificate for the genesis block, signed by every replica.

    Having real signers keeps verification uniform: checking it costs one
    aggregate verification like any other certificate.
    """
    pairs = []
    for i in range(scheme.n):
        msg = vote_message(cert_type, 0, GENESIS.hash, i)
        pairs.append((i, msg, scheme.sign(scheme.keypair(i), msg)))
    return QuorumCert(cert_type, 0, GENESIS.hash, frozenset(range(scheme.n)), scheme.aggregate(pairs))


def build_qc(scheme: MockScheme, votes: Iterable[VoteMsg]) -> QuorumCert:
    votes = sorted(votes, key=lambda v: v.voter)
    first = votes[0]
    if any((v.vote_type, v.view, v.block) != (first.vote_type, first.view, first.block) for v in votes):
        raise ValueError("votes for different tuples cannot be combined")
    agg = scheme.aggregate([(v.voter, v.message(), v.sig) for v in votes])
    return QuorumCert(first.vote_type, first.view, first.block, frozenset(v.voter for v in votes), agg)


def verify_qc(scheme: MockScheme, qc: QuorumCert, quorum: int) -> bool:
    """One aggregate verification over the per-signer vote tuples."""
    if qc.agg_sig is None or len(qc.signers) < quorum:
        return False
    pairs = [(i, vote_message(qc.cert_type, qc.view, qc.block, i)) for i in sorted(qc.signers)]
    return scheme.verify_aggregate(qc.agg_sig, pairs)


def create_agg_qc(scheme: MockScheme, newviews: Iterable[NewViewMsg], quorum: int) -> AggregateQC:
    """Aggregate a quorum of NEWVIEW messages for one view.

    Callers are expected to have dropped messages with bad signatures already.
    Duplicate senders count once; when more than ``quorum`` senders are offered
    the lowest ids are used.
    """
    by_sender: dict[int, NewViewMsg] = {}
    for m in newviews:
        by_sender.setdefault(m.sender, m)
    if len(by_sender) < quorum:
        raise QuorumNotMet(f"{len(by_sender)} NEWVIEW messages, need {quorum}")
    views = {m.view for m in by_sender.values()}
    if len(views) != 1:
        raise ValueError(f"NEWVIEW messages span views {sorted(views)}")
    chosen = [by_sender[s] for s in sorted(by_sender)[:quorum]]
    agg = scheme.aggregate([(m.sender, m.message(), m.sig) for m in chosen])
    return AggregateQC(chosen[0].view, tuple((m.sender, m.prepare_qc) for m in chosen), agg)


def extract_high_qc(agg: AggregateQC) -> QuorumCert:
    """Member certificate with the highest view.

    Equal-view members must certify the same ``(type, block)``; two quorums
    with different signer subsets over one tuple are both valid, and the one
    from the lowest contributor id wins.
    """
    best: QuorumCert | None = None
    for _, qc in agg.qc_set:
        if best is None or qc.view > best.view:
            best = qc
        elif qc.view == best.view and (qc.cert_type, qc.block) != (best.cert_type, best.block):
            raise EqualViewDivergence(best, qc)
    if best is None:
        raise ValueError("empty aggregated certificate")
    return best


def verify_agg_qc(scheme: MockScheme, agg: AggregateQC, quorum: int) -> bool:
    """Check the NEWVIEW aggregate and the extracted high certificate.

    Exactly two aggregate verifications when the structure is sound; other
    member certificates are vouched for by their senders' NEWVIEW signatures.
    """
    ids = agg.contributors
    if len(set(ids)) != len(ids) or len(ids) < quorum:
        return False
    if any(qc.view >= agg.view for _, qc in agg.qc_set):
        return False
    pairs = [(rid, newview_message(agg.view, qc.block, rid)) for rid, qc in agg.qc_set]
    outer_ok = scheme.verify_aggregate(agg.agg_sig, pairs)
    try:
        high = extract_high_qc(agg)
    except EqualViewDivergence:
        return False
    high_ok = verify_qc(scheme, high, quorum)
    return outer_ok and high_ok
