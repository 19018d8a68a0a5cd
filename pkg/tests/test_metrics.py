import pytest

from bftlab.harness.metrics import (
    CALIBRATED_QC_ENTRY_BYTES,
    MB,
    calibrate_qc_entry,
    compute_metrics,
    overhead_bytes,
    overhead_model,
    to_csv,
    to_jsonl,
)
from bftlab.simnet import from_dict, run


def test_calibration_solves_for_the_entry_size():
    # 67 members must fill 1.4% of 1 MB: 14000 / 67
    assert calibrate_qc_entry(100, MB, 0.014) == pytest.approx(14000 / 67)
    assert CALIBRATED_QC_ENTRY_BYTES == round(14000 / 67) - 1


def test_overhead_at_one_and_two_megabytes():
    one = overhead_model(100, MB)
    two = overhead_model(100, 2 * MB)
    assert one == pytest.approx((67 * 208 + 96) / 1e6)
    assert 0.012 <= one <= 0.016
    assert two == pytest.approx(one / 2)


def test_overhead_scales_with_quorum():
    assert overhead_bytes(4, 100, 0) == 300
    assert overhead_bytes(7, 100, 0) == 500


def test_overhead_rejects_bad_inputs():
    with pytest.raises(ValueError):
        overhead_model(100, 0)


def test_metrics_recomputed_from_trace_only():
    t = run(from_dict({"n": 4, "f": 1, "max_views": 20, "trace_level": "protocol"}))
    m = compute_metrics(t)
    first = {}
    for r in t.honest_records("commit"):
        first.setdefault(r["block"], r)
    assert m.committed_blocks == len(first)
    assert m.committed_honest_txs == 100 * len(first)
    assert m.throughput == m.committed_honest_txs / t.end["t"]
    assert m.latency_views == {2: len(first)}
    # the last two blocks of view 20's rotation would commit in views 21-22
    assert m.committed_per_rotation == [4, 4, 4, 4, 2]


def test_row_exports():
    t = run(from_dict({"n": 4, "f": 1, "max_views": 8, "trace_level": "protocol"}))
    row = compute_metrics(t).row()
    csv = to_csv([row])
    assert csv.splitlines()[0].split(",")[0] == "protocol"
    assert to_jsonl([row]).count("\n") == 1
    assert to_csv([]) == ""
