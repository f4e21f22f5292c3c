import random

import pytest

from gossipsim.traffic import (CbrFlow, TcpLiteFlow, TcpLiteReceiver, cbr_emit, tcp_on_ack,
                               tcp_on_timeout, tcp_send_window)

S = 1_000_000


def drain(flow, t):
    times = []
    while t is not None:
        times.append(t)
        _, t = cbr_emit(flow, t)
    return times


def test_cbr_fixed_interval():
    flow = CbrFlow(0, 1, interval=250_000, start=7, stop=S)
    times = drain(flow, 7)
    assert times[:3] == [7, 250_007, 500_007]
    assert all(b - a == 250_000 for a, b in zip(times, times[1:]))


def test_cbr_hundred_seconds_at_four_pps():
    flow = CbrFlow(0, 1, interval=250_000, start=0, stop=100 * S)
    assert len(drain(flow, 0)) == 400
    assert flow.expected_count() == 400


@pytest.mark.parametrize("start, stop, interval", [(0, 10, 3), (5, 6, 10), (13, 10_000, 7)])
def test_cbr_count_matches_oracle(start, stop, interval):
    flow = CbrFlow(0, 1, interval=interval, start=start, stop=stop)
    n = len(drain(flow, start))
    assert n == len(range(start, stop, interval)) == flow.expected_count()


def test_cbr_emission_outside_window_rejected():
    flow = CbrFlow(0, 1, start=10, stop=20)
    with pytest.raises(ValueError):
        cbr_emit(flow, 20)


def test_window_fills_then_blocks():
    flow = TcpLiteFlow(0, 1, window=8)
    assert tcp_send_window(flow, 0) == list(range(8))
    assert tcp_send_window(flow, 1) == []


def test_ack_advance_releases_exactly_that_many():
    flow = TcpLiteFlow(0, 1, window=8)
    tcp_send_window(flow, 0)
    assert tcp_on_ack(flow, 3, 100_000) == [8, 9, 10]


def test_duplicate_ack_changes_nothing():
    flow = TcpLiteFlow(0, 1, window=8)
    tcp_send_window(flow, 0)
    tcp_on_ack(flow, 2, 10)
    before = (flow.cum_ack, dict(flow.inflight), flow.srtt, flow.rto)
    assert tcp_on_ack(flow, 2, 50) == []
    assert (flow.cum_ack, dict(flow.inflight), flow.srtt, flow.rto) == before


def test_ack_plus_five_clears_five():
    flow = TcpLiteFlow(0, 1, window=8, backlog=8)
    tcp_send_window(flow, 0)
    tcp_on_ack(flow, 5, 10)
    assert sorted(flow.inflight) == [5, 6, 7]


def test_rtt_smoothing_recurrence():
    flow = TcpLiteFlow(0, 1, window=1, rto_min=200_000)
    samples = [300_000, 100_000, 500_000, 40_000]
    srtt = None
    t = 0
    for seq, rtt in enumerate(samples):
        assert tcp_send_window(flow, t) == [seq] or seq > 0
        t += rtt
        tcp_on_ack(flow, seq + 1, t)
        srtt = rtt if srtt is None else 7 / 8 * srtt + rtt / 8
        assert flow.srtt == pytest.approx(srtt)
        assert flow.rto == max(200_000, int(2 * srtt))


def test_rto_doubles_per_retransmission():
    flow = TcpLiteFlow(0, 1, rto_init=1 * S)
    tcp_send_window(flow, 0)
    seen = [flow.timeout_for(0)]
    for k in range(2):
        assert tcp_on_timeout(flow, 0, (k + 1) * S)
        seen.append(flow.timeout_for(0))
    assert seen == [1 * S, 2 * S, 4 * S]


def test_rto_capped():
    flow = TcpLiteFlow(0, 1, rto_init=S, rto_max=5 * S, max_retx=20)
    tcp_send_window(flow, 0)
    for _ in range(10):
        tcp_on_timeout(flow, 0, 0)
    assert flow.timeout_for(0) == 5 * S


def test_retransmitted_sample_not_used_for_rtt():
    flow = TcpLiteFlow(0, 1, window=1)
    tcp_send_window(flow, 0)
    tcp_on_timeout(flow, 0, S)
    tcp_on_ack(flow, 1, 3 * S)
    assert flow.srtt is None


def test_abort_after_max_retx():
    flow = TcpLiteFlow(0, 1, max_retx=8)
    tcp_send_window(flow, 0)
    fires = [tcp_on_timeout(flow, 0, k) for k in range(9)]
    assert fires == [True] * 8 + [False]
    assert flow.aborted and not flow.inflight
    assert tcp_send_window(flow, 99) == []


def test_backlog_limits_emissions():
    flow = TcpLiteFlow(0, 1, window=8, backlog=3)
    assert tcp_send_window(flow, 0) == [0, 1, 2]
    assert flow.backlog == 0


def test_receiver_dedups_one_loss_then_success():
    rx = TcpLiteReceiver()
    assert rx.on_data(0) == [(0, None)]
    assert rx.on_data(0) == []
    assert rx.delivered == [0]


def test_receiver_releases_in_order():
    rx = TcpLiteReceiver()
    assert rx.on_data(2, "c") == []
    assert rx.on_data(1, "b") == []
    assert rx.on_data(0, "a") == [(0, "a"), (1, "b"), (2, "c")]


def test_exactly_once_under_random_loss():
    """Lossy hop simulated against the sender and receiver state machines."""
    rng = random.Random(3)
    flow = TcpLiteFlow(0, 1, window=8, backlog=500, max_retx=50)
    rx = TcpLiteReceiver()
    t = 0
    pending = list(tcp_send_window(flow, t))
    while pending:
        t += 1
        seq = pending.pop(0)
        if rng.random() >= 0.3:
            rx.on_data(seq)
            if rng.random() >= 0.3:
                pending += tcp_on_ack(flow, rx.expected, t)
        if not pending and flow.inflight:
            for s in sorted(flow.inflight):
                if tcp_on_timeout(flow, s, t):
                    pending.append(s)
    assert not flow.aborted
    assert rx.delivered == list(range(500))
