import pytest

from bftlab.harness.experiments import (
    aggqc_verification_counts,
    forking_sweep,
    is_non_increasing,
    latency,
    withholder_audit,
    worst_case_rotation,
)


def expected_rotation(n):
    """Committed first-rotation views under the every-third-slot forker.

    Each Byzantine slot ``v`` (v % 3 == 2) builds on the block three views
    back, orphaning the two honest blocks before it, so only Byzantine
    blocks gather three consecutive views, plus the honest block of the
    last view, which the next rotation's leaders extend.
    """
    return [v for v in range(1, n + 1) if v % 3 == 2 and v < n - 1] + [n - 1]


@pytest.mark.parametrize("n", [7, 10, 13])
def test_rotation_matches_closed_form(n):
    r = worst_case_rotation(n=n)
    assert r.committed_views == expected_rotation(n)
    assert r.committed == (n - 1) // 3 + 1
    assert r.honest == 1


def test_fhs_commits_every_honest_block_under_the_forker():
    r = worst_case_rotation(protocol="pipelined_fhs", n=10)
    assert r.committed == 10
    assert r.honest == 10 - 3


def test_small_forking_sweep():
    hs = forking_sweep("hotstuff", range(0, 4), n=10)
    assert is_non_increasing([p.normalized for p in hs])
    assert hs[-1].normalized < hs[0].normalized
    fhs = forking_sweep("pipelined_fhs", range(0, 4), n=10)
    assert all(p.rate == p.reference_rate for p in fhs)


def test_latency_histograms():
    assert latency("pipelined_fhs", views=20) == {2: 18}
    assert latency("hotstuff", views=20) == {3: 17}


def test_single_silent_leader_bumps_latency_once():
    lat = latency("pipelined_fhs", views=30, silent_leader_view=12)
    assert lat[2] >= 25
    assert sum(v for k, v in lat.items() if k != 2) == 1


@pytest.mark.parametrize("protocol", ["pipelined_fhs", "basic_fhs"])
def test_two_aggregate_verifications_per_block(protocol):
    assert set(aggqc_verification_counts(protocol, 4)) == {2}


@pytest.mark.parametrize("protocol", ["pipelined_fhs", "basic_fhs"])
def test_withholder_audit(protocol):
    audit = withholder_audit(protocol)
    assert audit.ok, audit
    assert audit.early_committers != audit.honest


def test_is_non_increasing():
    assert is_non_increasing([3, 3, 2, 0])
    assert not is_non_increasing([3, 4])
