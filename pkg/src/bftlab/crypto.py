"""Signature scheme interface and the deterministic keyed-digest mock.

The mock stands in for a pairing-based multi-message aggregate scheme.  Each
signer's signature is an HMAC over the message under its secret; an aggregate
is a digest over the sorted ``(signer, mac)`` pairs together with the signer
set.  Nobody outside the scheme object sees a secret, so the only way to obtain
a verifying aggregate for ``(i, m)`` is to hold a signature produced by
``sign`` with replica ``i``'s key pair.

Every call to :meth:`MockScheme.verify_aggregate` bumps
``MockScheme.agg_verifications`` by exactly one, cached or not.  Engines sample
the counter around proposal processing to prove how many aggregates were
checked.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

__all__ = [
    "AggregateSignature",
    "DuplicateSigner",
    "KeyPair",
    "MockScheme",
    "Signature",
]


class DuplicateSigner(ValueError):
    """Raised when one replica appears twice in an aggregation request."""


@dataclass(frozen=True, slots=True)
class KeyPair:
    replica: int
    secret: bytes = field(repr=False)
    public: bytes


@dataclass(frozen=True, slots=True)
class Signature:
    signer: int
    data: bytes


@dataclass(frozen=True, slots=True)
class AggregateSignature:
    signers: frozenset[int]
    data: bytes

    def encode(self) -> bytes:
        ids = sorted(self.signers)
        return len(ids).to_bytes(2, "big") + b"".join(i.to_bytes(2, "big") for i in ids) + self.data


def _aggregate_digest(macs: Iterable[tuple[int, bytes]]) -> bytes:
    h = hashlib.sha256(b"agg/v1")
    for signer, mac in sorted(macs):
        h.update(signer.to_bytes(2, "big"))
        h.update(mac)
    return h.digest()


class MockScheme:
    """Deterministic stand-in for an aggregate signature scheme.

    ``seed`` derives the per-replica secrets, so two schemes built with the
    same ``(n, seed)`` are interchangeable.
    """

    name = "mock-hmac-sha256"

    def __init__(self, n: int, seed: int = 0) -> None:
        self.n = n
        self._keys: list[KeyPair] = []
        self._secret_of: dict[bytes, bytes] = {}
        for i in range(n):
            secret = hashlib.sha256(b"key/v1|%d|%d" % (seed, i)).digest()
            public = hashlib.sha256(b"pub/v1|" + secret).digest()
            self._keys.append(KeyPair(i, secret, public))
            self._secret_of[public] = secret
        self.public_keys: dict[int, bytes] = {k.replica: k.public for k in self._keys}
        self.agg_verifications = 0
        self.verifications = 0

    def keypair(self, replica: int) -> KeyPair:
        return self._keys[replica]

    def _mac(self, public: bytes, msg: bytes) -> bytes | None:
        secret = self._secret_of.get(public)
        if secret is None:
            return None
        return hmac.digest(secret, msg, "sha256")

    def sign(self, key: KeyPair, msg: bytes) -> Signature:
        return Signature(key.replica, hmac.digest(key.secret, msg, "sha256"))

    def verify(self, public: bytes, msg: bytes, sig: Signature) -> bool:
        self.verifications += 1
        expected = self._mac(public, msg)
        return expected is not None and hmac.compare_digest(expected, sig.data)

    def aggregate(self, pairs: Sequence[tuple[int, bytes, Signature]]) -> AggregateSignature:
        if not pairs:
            raise ValueError("cannot aggregate an empty signature set")
        seen: set[int] = set()
        for rid, _msg, sig in pairs:
            if rid in seen:
                raise DuplicateSigner(rid)
            if sig.signer != rid:
                raise ValueError(f"signature by {sig.signer} offered for replica {rid}")
            seen.add(rid)
        return AggregateSignature(
            frozenset(seen), _aggregate_digest((rid, sig.data) for rid, _m, sig in pairs)
        )

    def verify_aggregate(
        self,
        agg: AggregateSignature,
        pairs: Sequence[tuple[int, bytes]],
        keys: Mapping[int, bytes] | None = None,
    ) -> bool:
        self.agg_verifications += 1
        keys = self.public_keys if keys is None else keys
        ids = [rid for rid, _ in pairs]
        if len(set(ids)) != len(ids) or set(ids) != agg.signers:
            return False
        macs = []
        for rid, msg in pairs:
            public = keys.get(rid)
            mac = None if public is None else self._mac(public, msg)
            if mac is None:
                return False
            macs.append((rid, mac))
        return hmac.compare_digest(_aggregate_digest(macs), agg.data)
