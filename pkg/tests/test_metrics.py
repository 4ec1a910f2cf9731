"""Convergence time, energy ledger, throughput, delay, and the trace audit."""

import math

import pytest

from rrrt.controller import IntervalRow
from rrrt.errors import InvariantViolation, NoDeliveries
from rrrt.kernel import SimulationTrace
from rrrt.metrics import (EnergyLedger, aggregate_throughput, audit_trace,
                          average_packet_delay, convergence_time, total_energy)


def row(i, condition, end_time=None, dr_o=100, dr_d=100, cn=False):
    return IntervalRow(i, dr_o, dr_d, dr_o / dr_d, math.inf, cn, condition,
                       1.0, 1.0, 1, float(i) if end_time is None else end_time)


ADE = "AdequateRelNoCong"
LOW = "LowRelNoCong"


def test_convergence_first_sustained_index():
    rows = [row(1, LOW), row(2, LOW)] + [row(i, ADE) for i in range(3, 12)]
    assert convergence_time(rows, 0.05) == 3.0


def test_convergence_all_adequate_from_start():
    rows = [row(i, ADE) for i in range(1, 5)]
    assert convergence_time(rows, 0.05) == 1.0


def test_convergence_never_sustained():
    rows = [row(i, ADE if i % 2 else LOW) for i in range(1, 21)]  # ends on Low
    assert convergence_time(rows, 0.05) is None
    assert convergence_time([], 0.05) is None


def test_convergence_is_the_trailing_adequate_run():
    rows = [row(1, ADE), row(2, LOW), row(3, ADE), row(4, ADE)]
    assert convergence_time(rows, 0.05) == 3.0  # the early touch does not count


def test_convergence_rederives_condition_when_missing():
    rows = [row(1, "", dr_o=50), row(2, "", dr_o=100), row(3, "", dr_o=100)]
    assert convergence_time(rows, 0.05) == 2.0


def test_total_energy_linear_combination():
    trace = SimulationTrace()
    for i in range(1000):
        trace.log(float(i), "a", "send", i, i)
        trace.log(float(i) + 0.5, "b", "receive", i, i)
    ledger = EnergyLedger(e_tx=50e-6, e_rx=25e-6)
    assert total_energy(trace, ledger) == pytest.approx(0.075)
    assert ledger.per_node() == {"a": pytest.approx(0.05), "b": pytest.approx(0.025)}


def test_total_energy_empty_trace():
    assert total_energy(SimulationTrace(), EnergyLedger()) == 0.0


def test_energy_additivity_over_disjoint_node_sets():
    t1, t2 = SimulationTrace(), SimulationTrace()
    for i in range(10):
        t1.log(float(i), "a", "send", i, i)
        t2.log(float(i), "b", "send", 100 + i, 100 + i)
        t2.log(float(i), "c", "receive", 100 + i, 100 + i)
    merged = SimulationTrace(sorted(t1.records + t2.records))
    ledger = EnergyLedger()
    assert total_energy(merged, ledger) == pytest.approx(
        total_energy(t1, EnergyLedger()) + total_energy(t2, EnergyLedger()))


def test_throughput_counts_unique_flow_deliveries():
    trace = SimulationTrace()
    for i in range(5):
        trace.log(float(i), "sink", "deliver", i, -1, "", 0.0, "data")
    trace.log(9.0, "sink", "deliver", 50, -1, "", 0.0, "cross")
    assert aggregate_throughput(trace, "data") == 5
    assert aggregate_throughput(trace, "cross") == 1


def test_average_packet_delay_mean_and_guard():
    trace = SimulationTrace()
    trace.log(1.1, "sink", "deliver", 1, -1, "", 1.0, "data")  # 0.1 s
    trace.log(2.3, "sink", "deliver", 2, -1, "", 2.0, "data")  # 0.3 s
    assert average_packet_delay(trace, "data") == pytest.approx(0.2)

    single = SimulationTrace()
    single.log(0.5, "sink", "deliver", 1, -1, "", 0.0, "data")
    assert average_packet_delay(single, "data") == pytest.approx(0.5)

    with pytest.raises(NoDeliveries):
        average_packet_delay(SimulationTrace(), "data")


def ok_trace():
    trace = SimulationTrace()
    trace.log(0.0, "a", "generate", 1)
    trace.log(0.0, "a", "send", 1, 1, "", 0.5)
    trace.log(0.5, "b", "receive", 1, 1)
    trace.log(0.5, "b", "deliver", 1, -1, "", 0.0, "data")
    return trace


def test_audit_accepts_conserved_trace():
    counts = audit_trace(ok_trace())
    assert counts["generated"] == counts["delivered"] == 1
    assert counts["dropped"] == counts["pending"] == 0


def test_audit_rejects_time_regression():
    trace = ok_trace()
    trace.log(0.1, "a", "generate", 2)
    with pytest.raises(InvariantViolation):
        audit_trace(trace)


def test_audit_rejects_vanished_copy():
    trace = SimulationTrace()
    trace.log(0.0, "a", "generate", 1)
    trace.log(0.0, "a", "send", 1, 1, "", 0.5)
    trace.log(0.5, "b", "deliver", 1, -1, "", 0.0, "data")  # no receive, no drop
    with pytest.raises(InvariantViolation):
        audit_trace(trace)


def test_audit_rejects_unaccounted_pid():
    trace = SimulationTrace()
    trace.log(0.0, "a", "generate", 1)
    with pytest.raises(InvariantViolation):
        audit_trace(trace)


def test_audit_rejects_duplicate_delivery():
    trace = ok_trace()
    trace.log(0.6, "b", "deliver", 1, -1, "", 0.0, "data")
    with pytest.raises(InvariantViolation):
        audit_trace(trace)


def test_audit_rejects_wrong_hop_delay():
    trace = SimulationTrace()
    trace.log(0.0, "a", "generate", 1)
    trace.log(0.0, "a", "send", 1, 1, "", 0.5)
    trace.log(0.4, "b", "receive", 1, 1)  # breakdown said 0.5
    trace.log(0.4, "b", "deliver", 1, -1, "", 0.0, "data")
    with pytest.raises(InvariantViolation):
        audit_trace(trace)


def test_audit_accounts_pending_and_drops():
    trace = SimulationTrace()
    trace.log(0.0, "a", "generate", 1)
    trace.log(0.0, "a", "send", 1, 1, "", 0.5)
    trace.log(0.5, "b", "receive", 1, 1)
    trace.log(0.5, "b", "drop", 1, -1, "overflow")
    trace.log(1.0, "a", "generate", 2)
    trace.log(1.0, "a", "send", 2, 2, "", 0.5)
    trace.log(2.0, "a", "pending", 2, 2, "in_flight")
    counts = audit_trace(trace)
    assert counts == {"generated": 2, "delivered": 0, "dropped": 1, "pending": 1,
                      "copies_sent": 2, "copies_received": 1, "copies_dropped": 0,
                      "copies_pending": 1}
