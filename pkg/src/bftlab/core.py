"""Identifiers, blocks, certificates, messages and the per-replica block tree.

Canonical encoding (version 1), used for every digest in the package:

* integers are big-endian: views and counts 8 bytes, replica ids 2 bytes;
* a signer set is its size (2 bytes) followed by the sorted ids;
* ``QC digest = sha256("qc/v1" | type | view | block | signers | agg_sig)``;
* ``AggQC digest = sha256("aggqc/v1" | view | count | (id | QC digest)* | agg_sig)``;
* ``payload digest = sha256("payload/v1" | txs | nbytes | tag)``;
* ``block hash = sha256("block/v1" | phase | view | proposer | parent |
  payload digest | justify digest)``.

Signed messages use the same integer widths, see :func:`vote_message` and
:func:`newview_message`.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Union

from .crypto import AggregateSignature, Signature

BlockHash = bytes
ZERO_HASH: BlockHash = bytes(32)


class Phase(enum.IntEnum):
    PREPARE = 1
    PRECOMMIT = 2
    GENERIC = 3


def _u8(x: int) -> bytes:
    return x.to_bytes(8, "big")


def _u2(x: int) -> bytes:
    return x.to_bytes(2, "big")


def _signer_bytes(signers: Iterable[int]) -> bytes:
    ids = sorted(signers)
    return _u2(len(ids)) + b"".join(_u2(i) for i in ids)


def short(h: bytes) -> str:
    """16-hex prefix used in traces and reprs."""
    return h.hex()[:16]


def vote_message(vote_type: Phase, view: int, block: BlockHash, voter: int) -> bytes:
    return b"vote/v1" + bytes([vote_type]) + _u8(view) + block + _u2(voter)


def newview_message(view: int, qc_block: BlockHash, sender: int) -> bytes:
    return b"newview/v1" + _u8(view) + qc_block + _u2(sender)


def proposal_message(block_hash: BlockHash) -> bytes:
    return b"proposal/v1" + block_hash


@dataclass(frozen=True, slots=True)
class QuorumCert:
    cert_type: Phase
    view: int
    block: BlockHash
    signers: frozenset[int]
    agg_sig: AggregateSignature | None
    digest: bytes = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        sig = b"" if self.agg_sig is None else self.agg_sig.data
        d = hashlib.sha256(
            b"qc/v1" + bytes([self.cert_type]) + _u8(self.view) + self.block
            + _signer_bytes(self.signers) + sig
        ).digest()
        object.__setattr__(self, "digest", d)

    def __repr__(self) -> str:
        return f"QC({self.cert_type.name}, v={self.view}, {short(self.block)})"


#: Placeholder certificate carried by the genesis block itself.
EMPTY_QC = QuorumCert(Phase.GENERIC, 0, ZERO_HASH, frozenset(), None)


@dataclass(frozen=True, slots=True)
class AggregateQC:
    view: int
    qc_set: tuple[tuple[int, QuorumCert], ...]
    agg_sig: AggregateSignature
    digest: bytes = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        h = hashlib.sha256(b"aggqc/v1" + _u8(self.view) + _u2(len(self.qc_set)))
        for rid, qc in self.qc_set:
            h.update(_u2(rid) + qc.digest)
        h.update(self.agg_sig.data)
        object.__setattr__(self, "digest", h.digest())

    @property
    def contributors(self) -> list[int]:
        return [rid for rid, _ in self.qc_set]

    def __repr__(self) -> str:
        views = [qc.view for _, qc in self.qc_set]
        return f"AggQC(v={self.view}, member_views={views})"


Justify = Union[QuorumCert, AggregateQC]


@dataclass(frozen=True, slots=True)
class Payload:
    txs: int = 0
    nbytes: int = 0
    tag: bytes = b""

    def digest(self) -> bytes:
        return hashlib.sha256(b"payload/v1" + _u8(self.txs) + _u8(self.nbytes) + self.tag).digest()


@dataclass(frozen=True, slots=True)
class Block:
    view: int
    proposer: int
    parent: BlockHash
    justify: Justify
    payload: Payload = Payload()
    phase_type: Phase = Phase.PREPARE
    sig: Signature | None = field(default=None, compare=False)
    hash: BlockHash = field(init=False, repr=False)

    def __post_init__(self) -> None:
        h = hashlib.sha256(
            b"block/v1" + bytes([self.phase_type]) + _u8(self.view) + _u2(self.proposer & 0xFFFF)
            + self.parent + self.payload.digest() + self.justify.digest
        ).digest()
        object.__setattr__(self, "hash", h)

    @property
    def has_agg_qc(self) -> bool:
        return isinstance(self.justify, AggregateQC)

    def __repr__(self) -> str:
        kind = "AggQC" if self.has_agg_qc else "QC"
        return f"Block(v={self.view}, by={self.proposer}, {short(self.hash)}<-{short(self.parent)}, {kind})"


GENESIS = Block(view=0, proposer=-1, parent=ZERO_HASH, justify=EMPTY_QC)


# --- messages -----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Proposal:
    block: Block


@dataclass(frozen=True, slots=True)
class VoteMsg:
    vote_type: Phase
    view: int
    block: BlockHash
    voter: int
    sig: Signature

    def message(self) -> bytes:
        return vote_message(self.vote_type, self.view, self.block, self.voter)


@dataclass(frozen=True, slots=True)
class NewViewMsg:
    view: int
    prepare_qc: QuorumCert
    sender: int
    sig: Signature

    def message(self) -> bytes:
        return newview_message(self.view, self.prepare_qc.block, self.sender)


@dataclass(frozen=True, slots=True)
class QCAnnounce:
    """Leader broadcast of a freshly formed certificate (basic protocol)."""

    qc: QuorumCert


@dataclass(frozen=True, slots=True)
class FetchRequest:
    block: BlockHash


@dataclass(frozen=True, slots=True)
class FetchResponse:
    block: Block


Message = Union[Proposal, VoteMsg, NewViewMsg, QCAnnounce, FetchRequest, FetchResponse]


# --- block tree ---------------------------------------------------------------


class UnknownBlock(KeyError):
    pass


class HashModelBreach(ValueError):
    """Two different blocks arrived under one hash."""


class CommitConflict(ValueError):
    """A commit request conflicts with this replica's committed chain."""


class InsertOutcome(enum.Enum):
    INSERTED = "inserted"
    QUARANTINED = "quarantined_missing_parent"
    DUPLICATE = "duplicate"


@dataclass(slots=True)
class InsertResult:
    outcome: InsertOutcome
    connected: list[Block] = field(default_factory=list)
    missing: BlockHash | None = None


class BlockTree:
    """Fork-tolerant block store owned by one replica.

    Blocks whose parent is unknown wait in a quarantine keyed by the missing
    parent and are connected, in arrival order, once it shows up.
    """

    def __init__(self, genesis_qc: QuorumCert | None = None) -> None:
        self.genesis = GENESIS.hash
        self.blocks: dict[BlockHash, Block] = {GENESIS.hash: GENESIS}
        self.children: dict[BlockHash, list[BlockHash]] = {GENESIS.hash: []}
        self.heights: dict[BlockHash, int] = {GENESIS.hash: 0}
        self.quarantine: dict[BlockHash, list[Block]] = {}
        self._quarantined: dict[BlockHash, Block] = {}
        self.committed: list[BlockHash] = [GENESIS.hash]
        self._committed_set: set[BlockHash] = {GENESIS.hash}
        self.high_qc = genesis_qc if genesis_qc is not None else EMPTY_QC

    def __contains__(self, h: BlockHash) -> bool:
        return h in self.blocks

    def known(self, h: BlockHash) -> bool:
        """Connected or waiting in quarantine."""
        return h in self.blocks or h in self._quarantined

    def get(self, h: BlockHash) -> Block:
        try:
            return self.blocks[h]
        except KeyError:
            raise UnknownBlock(short(h)) from None

    def height(self, h: BlockHash) -> int:
        try:
            return self.heights[h]
        except KeyError:
            raise UnknownBlock(short(h)) from None

    def parent_of(self, h: BlockHash) -> Block | None:
        b = self.get(h)
        return self.blocks.get(b.parent) if h != self.genesis else None

    def insert(self, b: Block) -> InsertResult:
        known = self.blocks.get(b.hash) or self._quarantined.get(b.hash)
        if known is not None:
            if known != b:
                raise HashModelBreach(short(b.hash))
            return InsertResult(InsertOutcome.DUPLICATE)
        if b.parent not in self.blocks:
            self.quarantine.setdefault(b.parent, []).append(b)
            self._quarantined[b.hash] = b
            # the missing root may itself be quarantined further down
            missing = b.parent
            while missing in self._quarantined:
                missing = self._quarantined[missing].parent
            return InsertResult(InsertOutcome.QUARANTINED, missing=missing)
        connected: list[Block] = []
        stack = [b]
        while stack:
            cur = stack.pop(0)
            self._attach(cur)
            connected.append(cur)
            for waiting in self.quarantine.pop(cur.hash, []):
                del self._quarantined[waiting.hash]
                stack.append(waiting)
        return InsertResult(InsertOutcome.INSERTED, connected)

    def _attach(self, b: Block) -> None:
        self.blocks[b.hash] = b
        self.children.setdefault(b.hash, [])
        self.children[b.parent].append(b.hash)
        self.heights[b.hash] = self.heights[b.parent] + 1

    def is_ancestor(self, a: BlockHash, d: BlockHash) -> bool:
        ha, hd = self.height(a), self.height(d)
        while hd > ha:
            d = self.blocks[d].parent
            hd -= 1
        return d == a

    def conflicting(self, b1: BlockHash, b2: BlockHash) -> bool:
        return not (self.is_ancestor(b1, b2) or self.is_ancestor(b2, b1))

    def direct_chain(self, child: BlockHash, parent: BlockHash) -> bool:
        c, p = self.get(child), self.get(parent)
        return c.parent == parent and c.view == p.view + 1

    def is_committed(self, h: BlockHash) -> bool:
        return h in self._committed_set

    @property
    def last_committed(self) -> Block:
        return self.blocks[self.committed[-1]]

    def commit(self, h: BlockHash) -> list[Block]:
        """Commit ``h`` and its uncommitted ancestors; return them oldest first."""
        if h in self._committed_set:
            return []
        tip = self.committed[-1]
        if not self.is_ancestor(tip, h):
            raise CommitConflict(f"{short(h)} does not extend committed tip {short(tip)}")
        path = []
        cur = h
        while cur != tip:
            path.append(self.blocks[cur])
            cur = self.blocks[cur].parent
        path.reverse()
        for blk in path:
            self.committed.append(blk.hash)
            self._committed_set.add(blk.hash)
        return path
