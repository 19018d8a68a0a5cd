"""Leader schedules, view timeouts with exponential backoff, and blacklisting."""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence


@dataclass(frozen=True)
class RoundRobin:
    def pick(self, view: int, eligible: Sequence[int]) -> int:
        return eligible[view % len(eligible)]


@dataclass(frozen=True)
class SeededRandom:
    seed: int = 0

    def pick(self, view: int, eligible: Sequence[int]) -> int:
        d = hashlib.sha256(b"leader/v1|%d|%d" % (self.seed, view)).digest()
        return eligible[int.from_bytes(d[:8], "big") % len(eligible)]


@dataclass(frozen=True)
class Scripted:
    script: tuple[int, ...]

    def pick(self, view: int, eligible: Sequence[int]) -> int:
        want = self.script[view % len(self.script)]
        # a scripted leader that is blacklisted falls back to round-robin
        return want if want in eligible else eligible[view % len(eligible)]


Schedule = RoundRobin | SeededRandom | Scripted


def leader(view: int, schedule: Schedule, n: int, blacklist: Sequence[int] = ()) -> int:
    banned = set(blacklist)
    eligible = [i for i in range(n) if i not in banned]
    return schedule.pick(view, eligible)


@dataclass
class Blacklist:
    """Queue of at most ``capacity`` replicas, oldest evicted first."""

    capacity: int
    threshold: int = 3
    enabled: bool = False
    queue: list[int] = field(default_factory=list)
    offenses: Counter = field(default_factory=Counter)

    def record_offense(self, offender: int) -> bool:
        """Count one leader timeout; returns True when the queue changed."""
        if not self.enabled or self.capacity == 0:
            return False
        self.offenses[offender] += 1
        if self.offenses[offender] < self.threshold or offender in self.queue:
            return False
        self.queue.append(offender)
        if len(self.queue) > self.capacity:
            self.queue.pop(0)
        return True


@dataclass
class Pacemaker:
    """Per-replica view timer policy plus the leader schedule it serves."""

    n: int
    f: int
    base_timeout: int
    schedule: Schedule = field(default_factory=RoundRobin)
    max_backoff_exp: int = 20
    blacklist: Blacklist | None = None
    consecutive_failures: int = 0

    def __post_init__(self) -> None:
        if self.blacklist is None:
            self.blacklist = Blacklist(capacity=self.f)

    @property
    def current_timeout(self) -> int:
        return self.base_timeout << min(self.consecutive_failures, self.max_backoff_exp)

    def on_view_success(self) -> None:
        self.consecutive_failures = 0

    def on_view_failure(self) -> None:
        if self.consecutive_failures < self.max_backoff_exp:
            self.consecutive_failures += 1

    def align(self, view: int, anchor_view: int) -> None:
        """Count the views since ``anchor_view`` (the last commit) as failures.

        The timeout then grows with the view number, so a replica that got
        ahead waits longer than the ones catching up with it.
        """
        self.consecutive_failures = min(max(view - anchor_view - 1, 0), self.max_backoff_exp)

    def leader(self, view: int) -> int:
        return leader(view, self.schedule, self.n, self.blacklist.queue)

    def charge_gap(self, parent_view: int, child_view: int) -> None:
        """Charge the leaders of views skipped between a committed block and its parent."""
        for v in range(parent_view + 1, child_view):
            self.blacklist.record_offense(self.leader(v))
