"""Simulation configuration: dataclasses, dict round-tripping and validation."""

from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass, field
from typing import Any

PROTOCOLS = ("basic_fhs", "pipelined_fhs", "hotstuff")
STRATEGIES = (
    "none",
    "silent",
    "timeout_abuser",
    "forking",
    "worst_case_forker",
    "equivocator",
    "withholder",
)
SCHEDULES = ("round_robin", "random", "scripted")
PLACEMENTS = ("first", "last", "worst_case", "random")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the dotted key that caused it."""

    def __init__(self, message: str, path: str = "") -> None:
        super().__init__(f"{path}: {message}" if path else message)
        self.message = message
        self.path = path


@dataclass
class NetworkConfig:
    gst: int = 0
    delta: int = 10
    delay_min: int = 1
    pre_gst_max: int = 50
    drop_prob: float = 0.0


@dataclass
class Partition:
    start: int
    end: int
    groups: list[list[int]]


@dataclass
class AdversarySpec:
    strategy: str = "none"
    byzantine: list[int] | None = None
    # used when ``byzantine`` is omitted
    count: int = 0
    placement: str = "last"
    per_replica: dict[int, str] = field(default_factory=dict)
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class PacemakerConfig:
    schedule: str = "round_robin"
    script: list[int] | None = None
    schedule_seed: int | None = None
    # defaults to 8 * delta
    base_timeout: int | None = None
    max_backoff_exp: int = 20
    blacklist: bool = False
    blacklist_threshold: int = 3


@dataclass
class ByteModel:
    view_bytes: int = 8
    hash_bytes: int = 32
    agg_sig_bytes: int = 96

    def qc_bytes(self, n: int) -> int:
        return (n + 7) // 8 + self.view_bytes + self.hash_bytes + self.agg_sig_bytes

    def aggqc_bytes(self, n: int, members: int) -> int:
        return members * self.qc_bytes(n) + (n + 7) // 8 + self.agg_sig_bytes


@dataclass
class SimConfig:
    protocol: str = "pipelined_fhs"
    n: int = 4
    f: int = 1
    seed: int = 0
    max_views: int = 30
    max_time: int | None = None
    max_events: int = 5_000_000
    network: NetworkConfig = field(default_factory=NetworkConfig)
    partitions: list[Partition] = field(default_factory=list)
    adversary: AdversarySpec = field(default_factory=AdversarySpec)
    pacemaker: PacemakerConfig = field(default_factory=PacemakerConfig)
    txs_per_block: int = 100
    tx_bytes: int = 250
    byte_model: ByteModel = field(default_factory=ByteModel)
    basic_commit_guard: str = "direct"
    prefer_qc_path: bool = True
    trace_level: str = "full"

    # -- derived -------------------------------------------------------------

    @property
    def base_timeout(self) -> int:
        bt = self.pacemaker.base_timeout
        return 8 * self.network.delta if bt is None else bt

    def byzantine_ids(self) -> list[int]:
        adv = self.adversary
        if adv.byzantine is not None:
            return sorted(set(adv.byzantine) | set(adv.per_replica))
        ids = placement(adv.placement, self.n, self.f, adv.count, self.seed)
        return sorted(set(ids) | set(adv.per_replica))

    def strategy_of(self, rid: int) -> str:
        return self.adversary.per_replica.get(rid, self.adversary.strategy)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["adversary"]["per_replica"] = {str(k): v for k, v in self.adversary.per_replica.items()}
        return d

    def replace(self, **changes: Any) -> "SimConfig":
        return from_dict({**self.to_dict(), **changes})

    def validate(self) -> "SimConfig":
        def need(cond: bool, msg: str, path: str) -> None:
            if not cond:
                raise ConfigError(msg, path)

        need(self.protocol in PROTOCOLS, f"unknown protocol {self.protocol!r}, expected one of {PROTOCOLS}", "protocol")
        need(self.f >= 0, "must be non-negative", "f")
        need(self.n == 3 * self.f + 1, f"n must equal 3f+1 (n={self.n}, f={self.f})", "n")
        need(self.max_views >= 1, "must be at least 1", "max_views")
        net = self.network
        need(net.delta > 0, "must be positive", "network.delta")
        need(1 <= net.delay_min <= net.delta, "must lie in [1, delta]", "network.delay_min")
        need(net.gst >= 0, "must be non-negative", "network.gst")
        need(net.pre_gst_max >= 1, "must be at least 1", "network.pre_gst_max")
        need(0.0 <= net.drop_prob < 1.0, "must lie in [0, 1)", "network.drop_prob")
        for i, p in enumerate(self.partitions):
            path = f"partitions[{i}]"
            need(0 <= p.start < p.end, "need 0 <= start < end", path)
            need(p.end <= net.gst, "partitions must heal by GST", f"{path}.end")
            members = [r for g in p.groups for r in g]
            need(len(p.groups) == 2, "a partition has exactly two sides", f"{path}.groups")
            need(sorted(members) == list(range(self.n)), "sides must cover every replica exactly once",
                 f"{path}.groups")
        adv = self.adversary
        need(adv.strategy in STRATEGIES, f"unknown strategy {adv.strategy!r}, expected one of {STRATEGIES}",
             "adversary.strategy")
        need(adv.placement in PLACEMENTS, f"unknown placement {adv.placement!r}", "adversary.placement")
        for rid, strat in adv.per_replica.items():
            need(strat in STRATEGIES, f"unknown strategy {strat!r}", f"adversary.per_replica.{rid}")
        if adv.byzantine is not None:
            need(len(set(adv.byzantine)) == len(adv.byzantine), "duplicate replica id", "adversary.byzantine")
        else:
            need(0 <= adv.count <= self.f, f"must lie in [0, f={self.f}]", "adversary.count")
        byz = self.byzantine_ids()
        need(all(0 <= r < self.n for r in byz), "replica id out of range", "adversary.byzantine")
        need(len(byz) <= self.f, f"at most f={self.f} Byzantine replicas", "adversary.byzantine")
        pm = self.pacemaker
        need(pm.schedule in SCHEDULES, f"unknown schedule {pm.schedule!r}", "pacemaker.schedule")
        if pm.schedule == "scripted":
            need(bool(pm.script), "scripted schedule needs a non-empty script", "pacemaker.script")
            need(all(0 <= r < self.n for r in pm.script or []), "replica id out of range", "pacemaker.script")
        need(self.base_timeout > 0, "must be positive", "pacemaker.base_timeout")
        need(0 <= pm.max_backoff_exp <= 62, "must lie in [0, 62]", "pacemaker.max_backoff_exp")
        need(pm.blacklist_threshold >= 1, "must be at least 1", "pacemaker.blacklist_threshold")
        need(self.txs_per_block >= 0 and self.tx_bytes >= 0, "must be non-negative", "txs_per_block")
        need(self.basic_commit_guard in ("direct", "literal"), "expected 'direct' or 'literal'",
             "basic_commit_guard")
        need(self.trace_level in ("full", "protocol"), "expected 'full' or 'protocol'", "trace_level")
        return self


def placement(kind: str, n: int, f: int, count: int, seed: int = 0) -> list[int]:
    """Byzantine replica ids for a placement policy."""
    if count == 0:
        return []
    if kind == "first":
        return list(range(count))
    if kind == "last":
        return list(range(n - count, n))
    if kind == "worst_case":
        # one Byzantine leader after every two honest ones in a round-robin rotation
        return [3 * k + 2 for k in range(count)]
    return sorted(random.Random(f"placement/{seed}").sample(range(n), count))


_NESTED = {
    "network": NetworkConfig,
    "adversary": AdversarySpec,
    "pacemaker": PacemakerConfig,
    "byte_model": ByteModel,
}


def _build(cls: type, data: Any, path: str) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping, got {type(data).__name__}", path)
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else str(key)
        if key not in names:
            raise ConfigError(f"unknown key {key!r}", sub)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc), path) from None


def from_dict(data: dict[str, Any]) -> SimConfig:
    """Build and validate a :class:`SimConfig` from plain data."""
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a mapping")
    data = dict(data)
    for key, cls in _NESTED.items():
        if key in data:
            data[key] = _build(cls, data[key], key)
    if "partitions" in data:
        parts = data["partitions"] or []
        if not isinstance(parts, list):
            raise ConfigError("expected a list", "partitions")
        data["partitions"] = [_build(Partition, p, f"partitions[{i}]") for i, p in enumerate(parts)]
    cfg = _build(SimConfig, data, "")
    if isinstance(cfg.adversary.per_replica, dict):
        try:
            cfg.adversary.per_replica = {int(k): v for k, v in cfg.adversary.per_replica.items()}
        except ValueError:
            raise ConfigError("keys must be replica ids", "adversary.per_replica") from None
    _check_types(cfg)
    return cfg.validate()


def _check_types(cfg: SimConfig) -> None:
    ints = {
        "n": cfg.n, "f": cfg.f, "seed": cfg.seed, "max_views": cfg.max_views,
        "network.gst": cfg.network.gst, "network.delta": cfg.network.delta,
        "network.delay_min": cfg.network.delay_min, "network.pre_gst_max": cfg.network.pre_gst_max,
        "txs_per_block": cfg.txs_per_block, "tx_bytes": cfg.tx_bytes,
    }
    for path, value in ints.items():
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"expected an integer, got {value!r}", path)
    if not isinstance(cfg.network.drop_prob, (int, float)):
        raise ConfigError(f"expected a number, got {cfg.network.drop_prob!r}", "network.drop_prob")
