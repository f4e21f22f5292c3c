import pytest

from gossipsim.radio import (EnergyLedger, PowerTable, RadioMode, accrue, in_range, tx_duration,
                             tx_power_for_distance)


def test_range_boundary_is_inclusive():
    assert in_range((0.0, 0.0), (250.0, 0.0), 250.0)
    assert not in_range((0.0, 0.0), (250.1, 0.0), 250.0)
    assert in_range((3.0, 4.0), (3.0, 4.0), 250.0)


@pytest.mark.parametrize("nbytes, rate, expected", [
    (512, 2_000_000, 2048),
    (0, 2_000_000, 0),
    (1, 2_000_000, 4),
    (40, 2_000_000, 160),
])
def test_tx_duration(nbytes, rate, expected):
    assert tx_duration(nbytes, rate) == expected


def test_tx_duration_rounds_up():
    assert tx_duration(1, 3_000_000) == 3   # 2.67 us


def test_power_for_distance_examples():
    table = PowerTable()
    assert tx_power_for_distance(250.0, 250.0, table) == pytest.approx(1.4)
    assert tx_power_for_distance(125.0, 250.0, table) == pytest.approx(0.35)
    assert tx_power_for_distance(0.0, 250.0, table) == pytest.approx(0.14)


def test_power_monotone_and_capped():
    table = PowerTable()
    prev = 0.0
    for d in range(0, 251, 5):
        p = tx_power_for_distance(float(d), 250.0, table)
        assert prev <= p <= table.p_tx
        prev = p


def test_power_rejects_out_of_range():
    with pytest.raises(ValueError):
        tx_power_for_distance(251.0, 250.0, PowerTable())


def test_power_table_ordering_enforced():
    with pytest.raises(ValueError):
        PowerTable(p_tx=1.0, p_rx=1.4)
    assert PowerTable().p_idle == PowerTable().p_tx / 2


def test_zero_dt_leaves_ledger_unchanged():
    led = EnergyLedger()
    accrue(led, RadioMode.IDLE, 0.0)
    assert led.consumed == 0.0 and led.elapsed == 0.0


def test_idle_ten_seconds_costs_seven_joules():
    led = EnergyLedger()
    accrue(led, RadioMode.IDLE, 10.0)
    assert led.consumed == pytest.approx(7.0)
    assert led.mode_joules[RadioMode.IDLE] == pytest.approx(7.0)


def test_depletion_clamps_and_records_death():
    led = EnergyLedger(initial=5.0)
    accrue(led, RadioMode.TRANSMIT, 10.0)
    assert led.residual == 0.0
    assert led.dead
    assert led.died_at == pytest.approx(5.0 / 1.4)
    assert led.elapsed == pytest.approx(10.0)
    # a dead radio books further time at zero cost
    accrue(led, RadioMode.IDLE, 2.0)
    assert led.consumed == 5.0
    assert led.elapsed == pytest.approx(12.0)


def test_power_override_for_scaled_transmit():
    led = EnergyLedger()
    accrue(led, RadioMode.TRANSMIT, 2.0, power_override=0.35)
    assert led.consumed == pytest.approx(0.7)
    assert led.recomputed() == pytest.approx(led.consumed)
