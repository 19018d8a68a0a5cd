"""Byzantine strategies.

A Byzantine replica runs one or two ordinary engines whose :class:`Behavior`
deviates at proposal time or at send time.  Strategies sign only with their
own key, so they can never fabricate messages from honest replicas.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

from ..certs import create_agg_qc, extract_high_qc
from ..core import AggregateQC, Message, Phase, Proposal, QCAnnounce
from ..engine import Behavior, Replica
from ..fhs_pipelined import certified_parent


@dataclass
class ForkingBehavior(Behavior):
    """Reuse an older QC to orphan up to ``max_override`` honest tip blocks.

    The attacker only forks when its own (honestly maintained) state says the
    fork would collect honest votes; otherwise it proposes like an honest
    leader.  ``stubborn`` drops that check and always sends the fork.
    """

    byzantine: frozenset[int]
    max_override: int = 2
    stubborn: bool = False

    def choose_proposal(self, replica: Replica, view: int, honest):
        parent, justify = honest
        if isinstance(justify, AggregateQC):
            return self._agg_fork(replica, view, honest)
        for k in range(self.max_override, 0, -1):
            cand = self._qc_fork(replica, parent, k)
            if cand is None:
                continue
            if self.stubborn or self._accepted(replica, view, cand):
                replica.note("attack", what="fork", view=view, overridden=k)
                return cand
        return honest

    def _qc_fork(self, replica: Replica, tip: bytes, k: int):
        """Fork that extends the k-th ancestor of ``tip``, skipping k honest blocks."""
        tree = replica.tree
        cur = tree.blocks.get(tip)
        for _ in range(k):
            if cur is None or cur.view == 0 or cur.proposer in self.byzantine:
                return None
            qc = certified_parent(cur)
            cur = tree.blocks.get(cur.parent)
        if cur is None:
            return None
        return (cur.hash, qc)

    def _accepted(self, replica: Replica, view: int, cand) -> bool:
        _, qc = cand
        if replica.protocol == "hotstuff":
            locked_ok = replica.tree.is_ancestor(replica.locked_block, qc.block)
            return locked_ok or qc.view > replica.last_locked_view
        # the Fast-HotStuff vote rule requires the QC of the immediately preceding view
        return view == qc.view + 1

    def _agg_fork(self, replica: Replica, view: int, honest):
        """Choose the NEWVIEW subset with the oldest high QC; stubborn also breaks the parent link."""
        nvs = list(replica.newviews.get(view, {}).values())
        best = honest
        if len(nvs) > replica.quorum:
            ordered = sorted(nvs, key=lambda m: (m.prepare_qc.view, m.sender))
            agg = create_agg_qc(replica.scheme, ordered[: replica.quorum], replica.quorum)
            best = (extract_high_qc(agg).block, agg)
        if self.stubborn:
            anc = replica.tree.blocks.get(best[0])
            if anc is not None and anc.view > 0:
                replica.note("attack", what="fork", view=view, overridden=1)
                return (anc.parent, best[1])
        return best


class TimeoutAbuser(Behavior):
    """Participates as a voter but never proposes."""

    def choose_proposal(self, replica: Replica, view: int, honest):
        replica.note("attack", what="withhold_proposal", view=view)
        return None


@dataclass
class Withholder(Behavior):
    """As leader, deliver the decisive certificate to ``k`` honest replicas, then go quiet.

    Pipelined engines: the proposal (it carries the previous view's QC).
    Basic engine: the PrecommitQC announcement.
    """

    honest: Sequence[int]
    k: int = 1
    repeat: bool = False
    targets_override: Sequence[int] | None = None
    halted: bool = False
    acted_views: set[int] = field(default_factory=set)

    def silent(self, replica: Replica) -> bool:
        return self.halted

    def _recipients(self, replica: Replica) -> list[int]:
        if self.targets_override is not None:
            chosen = list(self.targets_override)
        else:
            # honest replicas right after the attacker in id order
            ring = sorted(self.honest, key=lambda r: (r - replica.id) % replica.n)
            chosen = ring[: self.k]
        return [replica.id, *chosen]

    def targets(self, replica: Replica, dest: int | None, msg: Message):
        decisive = (isinstance(msg, Proposal) and replica.protocol != "basic_fhs") or (
            isinstance(msg, QCAnnounce) and msg.qc.cert_type == Phase.PRECOMMIT
        )
        if not decisive or dest is not None:
            return None
        view = msg.block.view if isinstance(msg, Proposal) else msg.qc.view
        if view in self.acted_views:
            return None
        self.acted_views.add(view)
        replica.note("attack", what="withhold", view=view, to=self._recipients(replica)[1:])
        recipients = self._recipients(replica)
        if not self.repeat:
            self.halted = True
        return recipients


@dataclass
class TwinRouting(Behavior):
    """One copy of an equivocating identity; it only talks to its own side."""

    group: frozenset[int]

    def targets(self, replica: Replica, dest: int | None, msg: Message):
        if dest is None:
            return sorted(self.group | {replica.id})
        return [dest] if dest in self.group or dest == replica.id else []


def twin_groups(honest: Sequence[int], rng: random.Random) -> tuple[frozenset[int], frozenset[int]]:
    pool = list(honest)
    rng.shuffle(pool)
    half = (len(pool) + 1) // 2
    return frozenset(pool[:half]), frozenset(pool[half:])


def behaviors_for(
    strategy: str,
    rid: int,
    byzantine: Sequence[int],
    honest: Sequence[int],
    params: dict,
    rng: random.Random,
) -> list[tuple[Behavior, bytes]] | None:
    """Engine instances for one replica: ``[(behavior, payload_tag), ...]``.

    ``None`` means the replica is crashed and runs no engine at all.
    """
    byz = frozenset(byzantine)
    if strategy == "none":
        return [(Behavior(), b"")]
    if strategy == "silent":
        return None
    if strategy == "timeout_abuser":
        return [(TimeoutAbuser(), b"")]
    if strategy in ("forking", "worst_case_forker"):
        return [(ForkingBehavior(byz, int(params.get("max_override", 2)), bool(params.get("stubborn", False))), b"")]
    if strategy == "withholder":
        targets = params.get("targets")
        return [(Withholder(list(honest), int(params.get("k", 1)), bool(params.get("repeat", False)),
                            targets), b"")]
    if strategy == "equivocator":
        groups = params.get("groups")
        if groups:
            a, b = frozenset(groups[0]), frozenset(groups[1])
        else:
            a, b = twin_groups(honest, rng)
        return [(TwinRouting(a), b"twin-a"), (TwinRouting(b), b"twin-b")]
    raise ValueError(f"unknown strategy {strategy!r}")


__all__ = [
    "ForkingBehavior",
    "TimeoutAbuser",
    "TwinRouting",
    "Withholder",
    "behaviors_for",
    "twin_groups",
]
