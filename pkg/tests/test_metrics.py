"""Delivery accounting and summary statistics tests."""

import math

from swarmlink.metrics import DeliveryAudit, latency_summary, percentile, render_csv


def test_percentile_nearest_rank():
    vals = [1.0, 2.0, 3.0, 4.0]
    # nearest-rank: index ceil(f * n) - 1 into the sorted list
    assert percentile(vals, 0.50) == 2.0
    assert percentile(vals, 0.95) == 4.0
    assert percentile(vals, 0.25) == 1.0
    assert percentile([7.0], 0.5) == 7.0
    assert percentile([], 0.5) is None


def test_audit_pair_stats():
    a = DeliveryAudit()
    a.record_send(uid=100, source=2, t=1.0)
    a.record_send(uid=101, source=2, t=2.0)
    a.record_delivery(uid=100, node=3, t=1.2)
    a.record_delivery(uid=101, node=3, t=2.4)
    a.record_delivery(uid=100, node=1, t=1.3)
    stats = a.pair_stats((1, 2, 3))
    assert stats["2->3"] == {"sent": 2, "delivered": 2, "ratio": 1.0}
    assert stats["2->1"] == {"sent": 2, "delivered": 1, "ratio": 0.5}
    assert "3->1" not in stats  # only sources that actually sent get rows


def test_audit_counts_duplicates_without_double_latency():
    a = DeliveryAudit()
    a.record_send(uid=5, source=2, t=0.0)
    a.record_delivery(uid=5, node=3, t=0.5)
    a.record_delivery(uid=5, node=3, t=0.9)  # same pair again
    assert a.duplicate_deliveries == 1
    assert a.latencies() == [0.5]


def test_latencies_between_filters_pairs():
    a = DeliveryAudit()
    a.record_send(uid=1, source=1, t=0.0)
    a.record_send(uid=2, source=2, t=0.0)
    a.record_delivery(uid=1, node=2, t=0.3)
    a.record_delivery(uid=2, node=3, t=0.7)
    assert a.latencies_between((2,), (3,)) == [0.7]
    assert a.latencies_between((1, 2), (2, 3)) == [0.3, 0.7]


def test_latency_summary_shape():
    s = latency_summary([0.1, 0.2, 0.3])
    assert s["count"] == 3
    assert math.isclose(s["mean_s"], 0.2)
    assert s["p50_s"] == 0.2
    assert s["max_s"] == 0.3
    empty = latency_summary([])
    assert empty["count"] == 0 and empty["mean_s"] is None


def test_render_csv_rows():
    report = {
        "scenario": "unit",
        "seed": 1,
        "mode": "mesh",
        "delivery": {
            "pairs": {
                "2->3": {"sent": 4, "delivered": 3, "ratio": 0.75},
            }
        },
    }
    out = render_csv(report)
    lines = out.strip().splitlines()
    assert lines[0].startswith("scenario,")
    assert lines[1] == "unit,1,mesh,2,3,4,3,0.750000"
