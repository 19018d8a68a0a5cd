"""Trace records and their newline-delimited JSON export.

Schema version 1.  Every record is a flat JSON object with a kind ``k``; all
but ``meta`` also carry ``ev`` (index of the simulator event being processed)
and ``t`` (simulated time).  Block hashes appear as 16-hex prefixes.

=========  ===============================================================
kind       fields
=========  ===============================================================
meta       schema, config (full scenario), byzantine, honest
send       from, to, msg, view, dt (full traces only)
dlv        from, to, msg, view, i (instance; full traces only)
drop       from, to, msg, why (full traces only)
view       r, view, why
timeout    r, view
block      r, view, block, parent, proposer, justify, jview, jblock, txs, nbytes
verify     r, view, block, path, aggv, ok, src
vote       r, type, view, block
qc         r, type, view, block, signers
aggqc      r, view, high_view, high_block, contributors
lock       r, view, block (baseline only)
commit     r, height, view, block, proposer, txs, trigger_view, trigger
fetch      r, block
attack     r, what, view, ...
violation  r, what, detail
end        stop, views, heights, agg_verifications, verifications
=========  ===============================================================

Records produced by a Byzantine replica's engine carry ``byz: true`` and, for
the second copy of an equivocating identity, ``i: 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

SCHEMA_VERSION = 1


def dumps(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


@dataclass
class Trace:
    records: list[dict[str, Any]] = field(default_factory=list)

    def __iter__(self) -> Iterator[dict[str, Any]]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def meta(self) -> dict[str, Any]:
        return self.records[0]

    @property
    def config(self) -> dict[str, Any]:
        return self.meta["config"]

    @property
    def honest(self) -> set[int]:
        return set(self.meta["honest"])

    @property
    def byzantine(self) -> set[int]:
        return set(self.meta["byzantine"])

    @property
    def end(self) -> dict[str, Any]:
        return self.records[-1]

    def of_kind(self, *kinds: str) -> Iterator[dict[str, Any]]:
        return (r for r in self.records if r["k"] in kinds)

    def honest_records(self, *kinds: str) -> Iterator[dict[str, Any]]:
        return (r for r in self.records if r["k"] in kinds and not r.get("byz"))

    def to_jsonl(self) -> str:
        return "".join(dumps(r) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Trace":
        return cls([json.loads(line) for line in lines if line.strip()])

    @classmethod
    def read(cls, path: str | Path) -> "Trace":
        with open(path) as fh:
            return cls.from_lines(fh)
