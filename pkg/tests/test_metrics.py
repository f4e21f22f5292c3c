import math

import pytest

from gossipsim.metrics import (FlowAudit, FlowCounters, MetricsRow, ReconcileError, avg_delay,
                               csv_header, mean_ci95, pdr, reconcile, throughput)
from gossipsim.radio import EnergyLedger, RadioMode, accrue


def test_pdr_basic_and_empty():
    assert pdr(FlowCounters(sent=400, received=360)) == pytest.approx(0.9)
    assert pdr(FlowCounters()) == 0.0


def test_average_delay():
    c = FlowCounters(sent=3)
    for d in (0.1, 0.2, 0.6):
        c.record_delivery(d, 512)
    assert avg_delay(c) == pytest.approx(0.3)
    assert avg_delay(FlowCounters(sent=5)) == 0.0


def test_throughput_examples():
    c = FlowCounters(sent=400, received=360, bytes_received=360 * 512)
    assert throughput(c, 100.0) == pytest.approx(14745.6)
    full = FlowCounters(sent=400, received=400, bytes_received=400 * 512)
    assert throughput(full, 100.0) == pytest.approx(16384.0)


def test_throughput_needs_positive_duration():
    with pytest.raises(ValueError):
        throughput(FlowCounters(), 0.0)


def test_row_rejects_bad_values():
    with pytest.raises(ValueError):
        MetricsRow("gsp", "cbr", 50, 100, 1, 1.5, 0, 0, 0)
    with pytest.raises(ValueError):
        MetricsRow("gsp", "cbr", 50, 100, 1, 0.5, math.nan, 0, 0)


def test_csv_line_matches_header():
    row = MetricsRow("aeerg", "tcp", 50, 100, 7, 0.5, 12.5, 1000.0, 3.25,
                     {"ttl": 1, "buffer": 2, "retry": 3})
    assert len(row.csv_line().split(",")) == len(csv_header().split(","))
    assert row.csv_line().endswith(",1,2,3")
    assert len(row.csv_line(True).split(",")) == len(csv_header(True).split(","))


def ledger(seconds):
    led = EnergyLedger()
    accrue(led, RadioMode.IDLE, seconds / 2)
    accrue(led, RadioMode.DOZE, seconds / 2)
    return led


def test_reconcile_balanced():
    flows = [FlowAudit(0, sent=10, received=6, inflight=1, drops={"ttl": 2, "buffer": 1})]
    report = reconcile(flows, [ledger(100.0)], 100.0)
    assert report.nodes_checked == 1


def test_reconcile_reports_leaked_packet():
    flows = [FlowAudit(0, sent=10, received=6, inflight=1, drops={"ttl": 2})]
    with pytest.raises(ReconcileError, match="flow 0"):
        reconcile(flows, [], 100.0)


def test_reconcile_reports_missing_time():
    with pytest.raises(ReconcileError, match="mode seconds"):
        reconcile([], [ledger(99.0)], 100.0)


def test_mean_ci_hand_computation():
    # values 1, 2, 3: mean 2, s = 1, t(0.975, 2) = 4.302653
    m, h = mean_ci95([1.0, 2.0, 3.0])
    assert m == 2.0
    assert h == pytest.approx(4.302653 / math.sqrt(3), rel=1e-6)


def test_mean_ci_single_value():
    assert mean_ci95([5.0]) == (5.0, 0.0)
