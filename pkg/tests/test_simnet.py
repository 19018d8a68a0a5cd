import pytest

from bftlab.simnet import ConfigError, Simulation, from_dict, run
from bftlab.simnet.config import placement
from bftlab.simnet.trace import SCHEMA_VERSION, Trace


def cfg(**kw):
    base = {"protocol": "pipelined_fhs", "n": 4, "f": 1, "max_views": 15, "trace_level": "full"}
    base.update(kw)
    return from_dict(base)


def test_same_seed_same_trace():
    c = cfg(network={"gst": 100, "drop_prob": 0.2}, adversary={"strategy": "forking", "count": 1})
    assert run(c).to_jsonl() == run(c).to_jsonl()


def test_different_seed_different_trace():
    c = {"network": {"gst": 100, "drop_prob": 0.2}}
    assert run(cfg(seed=1, **c)).to_jsonl() != run(cfg(seed=2, **c)).to_jsonl()


def test_trace_roundtrip(tmp_path):
    t = run(cfg())
    p = tmp_path / "t.jsonl"
    t.write(p)
    back = Trace.read(p)
    assert back.records == t.records
    assert back.meta["schema"] == SCHEMA_VERSION
    assert back.end["k"] == "end"


def test_until_event_is_a_prefix():
    c = cfg()
    full = run(c)
    part = run(c, until_event=120)
    assert part.end["stop"] == "until_event"
    want = [r for r in full if r["k"] != "end" and r.get("ev", 0) <= 120]
    assert [r for r in part if r["k"] != "end"] == want


def test_stops_after_max_views():
    t = run(cfg(max_views=10))
    assert t.end["stop"] == "max_views"
    assert all(v > 10 for v in t.end["views"].values())


def test_partition_drops_cross_traffic():
    t = run(cfg(network={"gst": 300}, partitions=[{"start": 0, "end": 300, "groups": [[0, 1], [2, 3]]}]))
    drops = [r for r in t.of_kind("drop") if r["why"] == "partition"]
    assert drops and all(r["t"] < 300 for r in drops)
    assert all({r["from"], r["to"]} not in ({0, 2}, {0, 3}, {1, 2}, {1, 3}) or r["t"] >= 300
               for r in t.of_kind("dlv"))


def test_post_gst_delays_are_bounded():
    t = run(cfg(network={"gst": 50, "delta": 10}))
    assert all(r["dt"] <= 10 for r in t.of_kind("send") if r["t"] >= 50)


def test_equivocator_runs_two_instances():
    sim = Simulation(cfg(adversary={"strategy": "equivocator", "byzantine": [3]}))
    assert len(sim.instances[3]) == 2


@pytest.mark.parametrize("bad, path", [
    ({"n": 5}, "n"),
    ({"protocol": "pbft"}, "protocol"),
    ({"network": {"gst": 10}, "partitions": [{"start": 0, "end": 20, "groups": [[0, 1], [2, 3]]}]},
     "partitions[0].end"),
    ({"partitions": [{"start": 0, "end": 0, "groups": [[0], [1, 2, 3]]}]}, "partitions[0]"),
    ({"adversary": {"byzantine": [0, 1]}}, "adversary.byzantine"),
    ({"adversary": {"strategy": "chaos"}}, "adversary.strategy"),
    ({"network": {"drop_prob": 1.0}}, "network.drop_prob"),
    ({"pacemaker": {"schedule": "scripted"}}, "pacemaker.script"),
])
def test_validation_errors_name_the_key(bad, path):
    with pytest.raises(ConfigError) as exc:
        cfg(**bad)
    assert exc.value.path == path


def test_worst_case_placement_every_third_slot():
    ids = placement("worst_case", 40, 13, 13)
    assert len(ids) == 13
    assert all(i % 3 == 2 for i in ids)


def test_config_roundtrip():
    c = cfg(adversary={"byzantine": [1], "per_replica": {"1": "silent"}})
    assert from_dict(c.to_dict()) == c
