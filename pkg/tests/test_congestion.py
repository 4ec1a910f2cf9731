"""Buffer admission, the predictive congestion rule, CN marking."""

import random

import pytest

from rrrt.congestion import DROPPED, ENQUEUED, NodeBuffer, congestion_flag, mark_packet
from rrrt.errors import InvariantViolation
from rrrt.kernel import SimEvent
from rrrt.packet import KIND_DATA, Packet
from util import chain_network, data_packet


def make_packet(cn=False):
    return Packet(pid=1, kind=KIND_DATA, flow="data", src="a", dst="b", gen_time=0.0, cn=cn)


def test_enqueue_boundary_fill():
    buf = NodeBuffer(capacity=100)
    buf.occupancy = 99
    assert buf.try_enqueue(0.01) == ENQUEUED
    assert buf.occupancy == 100


def test_enqueue_overflow_counts_drop():
    buf = NodeBuffer(capacity=100)
    buf.occupancy = 100
    assert buf.try_enqueue(0.01) == DROPPED
    assert buf.drops == 1
    assert buf.occupancy == 100


def test_zero_capacity_drops_everything():
    buf = NodeBuffer(capacity=0)
    for i in range(5):
        assert buf.try_enqueue(0.01 * i) == DROPPED
    assert buf.drops == 5


@pytest.mark.parametrize("capacity,b_k,b_prev,expected", [
    (100, 60, 40, False),   # 60 + 20 = 80 <= 100
    (100, 80, 50, True),    # 80 + 30 = 110 > 100
    (100, 80, 90, False),   # draining: 80 - 10 = 70 <= 100
])
def test_congestion_flag_rule(capacity, b_k, b_prev, expected):
    buf = NodeBuffer(capacity=capacity)
    buf.occupancy = b_k
    buf.prev_occupancy = b_prev
    assert congestion_flag(buf) is expected


def test_mark_packet_is_monotone_or():
    assert mark_packet(make_packet(cn=False), True).cn is True
    assert mark_packet(make_packet(cn=True), False).cn is True
    assert mark_packet(make_packet(cn=False), False).cn is False


def test_epoch_sampling_raises_flag_during_growth():
    buf = NodeBuffer(capacity=100, epoch_len=0.1)
    for i in range(60):  # fill 60 packets inside the first epoch
        buf.try_enqueue(0.001 * i)
    assert buf.flag(0.05) is False  # no boundary crossed yet
    # boundary at 0.1: growth 0 -> 60 predicts 120 > 100
    assert buf.flag(0.11) is True
    # next boundary with no change: growth 0, 60 <= 100
    assert buf.flag(0.21) is False


def test_epoch_sampling_quiet_gap_shortcut():
    buf = NodeBuffer(capacity=10, epoch_len=0.1)
    for i in range(8):
        buf.try_enqueue(0.001 * i)
    assert buf.flag(0.15) is True    # 8 + 8 > 10
    assert buf.flag(5.0) is False    # long quiet gap: growth gone
    assert buf.prev_occupancy == 8


def test_release_below_zero_is_invariant_violation():
    buf = NodeBuffer(capacity=10)
    with pytest.raises(InvariantViolation):
        buf.release(0.0)


def test_occupancy_never_exceeds_capacity_random_walk():
    rng = random.Random(7)
    buf = NodeBuffer(capacity=13, epoch_len=0.1)
    now = 0.0
    drops = 0
    for _ in range(5000):
        now += rng.random() * 0.01
        if rng.random() < 0.55:
            if buf.try_enqueue(now) == DROPPED:
                drops += 1
        elif buf.occupancy > 0:
            buf.release(now)
        assert 0 <= buf.occupancy <= 13
    assert drops == buf.drops > 0


def test_no_drops_or_flags_below_service_rate():
    """Offered load under every link's rate, fixed CA: clean run, CN never set."""
    sim, runtime, names, catcher = chain_network(services=(100.0, 100.0), capacity=50)
    src = names[0]

    def generator(s, event):
        pkt = data_packet(s, src, names[-1])
        s.trace.log(s.now, src, "generate", pkt.pid)
        runtime.forward_data(src, pkt)
        s.schedule(SimEvent(s.now + 0.05, src, "gen"))  # 20 packets/s vs 100/s links

    sim._handlers[src] = lambda s, ev: generator(s, ev) if ev.kind == "gen" else runtime._dispatch(s, ev)
    sim.schedule(SimEvent(0.0, src, "gen"))
    sim.run_until(30.0)

    assert not [r for r in sim.trace.records if r[2] == "drop"]
    assert all(buf.drops == 0 for buf in runtime.buffers.values())
    assert all(cn is False for _, _, cn in catcher.got)
    assert len(catcher.got) == 600  # one per 0.05 s; the t=30 packet is still in flight


def test_cn_bit_reaches_sink_under_overload():
    """Offered load far above the middle link: flag fires and marks are delivered."""
    sim, runtime, names, catcher = chain_network(services=(2000.0, 40.0), capacity=20)
    src = names[0]

    def generator(s, event):
        pkt = data_packet(s, src, names[-1])
        s.trace.log(s.now, src, "generate", pkt.pid)
        runtime.forward_data(src, pkt)
        if s.now < 4.0:
            s.schedule(SimEvent(s.now + 0.005, src, "gen"))  # 200/s into a 40/s link

    sim._handlers[src] = lambda s, ev: generator(s, ev) if ev.kind == "gen" else runtime._dispatch(s, ev)
    sim.schedule(SimEvent(0.0, src, "gen"))
    sim.run_until(10.0)

    assert any(r[2] == "drop" and r[5] == "overflow" for r in sim.trace.records)
    assert any(cn for _, _, cn in catcher.got)
