from hypothesis import given, settings
from hypothesis import strategies as st

from bftlab.harness.campaign import (
    BUNDLED_STRATEGIES,
    FuzzSpec,
    campaign,
    fuzz_config,
    liveness_config,
    minimize,
)
from bftlab.simnet import from_dict


@given(st.integers(0, 10_000))
def test_fuzz_configs_are_valid_and_reproducible(seed):
    spec = FuzzSpec(protocols=("pipelined_fhs", "basic_fhs"))
    cfg = fuzz_config({}, spec, seed)
    assert cfg == fuzz_config({}, spec, seed)
    sim = from_dict(cfg)
    assert 1 <= len(sim.byzantine_ids()) <= sim.f
    for p in sim.partitions:
        assert p.end <= sim.network.gst


@given(st.sampled_from(["pipelined_fhs", "basic_fhs"]), st.sampled_from([4, 7, 10]), st.integers(0, 1000))
def test_liveness_configs_cover_every_strategy(protocol, n, seed):
    cfg = liveness_config(protocol, n, seed)
    sim = from_dict(cfg)
    assert cfg["adversary"]["strategy"] == BUNDLED_STRATEGIES[seed % len(BUNDLED_STRATEGIES)]
    assert 1 <= len(sim.byzantine_ids()) <= (n - 1) // 3
    assert sim.max_views == 8 * n


def test_bundled_strategies():
    assert set(BUNDLED_STRATEGIES) == {"silent", "timeout_abuser", "forking", "worst_case_forker",
                                       "equivocator", "withholder"}


def test_summary_sorted_and_independent_of_order():
    spec = FuzzSpec(max_views=10)
    a = campaign({}, spec, [5, 1, 3]).to_dict()
    b = campaign({}, spec, [3, 5, 1]).to_dict()
    assert a == b and a["runs"] == 3 and a["exit_code"] == 0


def test_minimize_shrinks_while_failure_persists():
    cfg = fuzz_config({}, FuzzSpec(max_views=40), 11)
    cfg["network"]["drop_prob"] = 0.2
    # a synthetic failure: needs at least 7 views and message loss
    fails = lambda c: c["max_views"] >= 7 and c["network"]["drop_prob"] > 0
    out = minimize(cfg, fails)["config"]
    assert out["max_views"] == 7
    assert out["network"]["drop_prob"] == 0.2
    assert out["partitions"] == []
    assert out["adversary"]["per_replica"] == {}


@settings(max_examples=5)
@given(st.integers(0, 10_000))
def test_exit_code_reflects_failures(seed):
    summary = campaign({}, FuzzSpec(max_views=8), [seed])
    assert summary.exit_code == (2 if summary.safety_failures else 0)
