"""Forwarding-buffer model with overflow accounting and CN-bit marking.

Congestion is detected with a predictive buffer-growth rule sampled once per
epoch: the node reports congestion for the coming epoch when the occupancy
plus its last-epoch growth would exceed the buffer capacity. Forwarded
packets pick the flag up as a monotone OR, and only the sub-sink aggregates
the marks into a per-interval verdict.
"""

from __future__ import annotations

from .errors import InvariantViolation
from .packet import Packet

ENQUEUED = "enqueued"
DROPPED = "dropped"


def congestion_flag(buf: "NodeBuffer") -> bool:
    """Predictive rule: occupancy plus last-epoch growth exceeds capacity."""
    delta = buf.occupancy - buf.prev_occupancy
    return buf.occupancy + delta > buf.capacity


def mark_packet(pkt: Packet, local_cn: bool) -> Packet:
    pkt.cn = pkt.cn or local_cn
    return pkt


class NodeBuffer:
    """Egress FIFO of one node: bounded occupancy, drop counting, epoch sampling.

    Epoch boundaries are rolled lazily: occupancy only changes on events at
    this node, so the occupancy at any passed boundary is whatever it has
    been since the last event. Results are identical to a periodic sampler.
    """

    __slots__ = ("capacity", "occupancy", "prev_occupancy", "drops", "epoch_len", "_epoch", "_flag")

    def __init__(self, capacity: int, epoch_len: float = 0.1):
        self.capacity = capacity
        self.occupancy = 0
        self.prev_occupancy = 0
        self.drops = 0
        self.epoch_len = epoch_len
        self._epoch = 0
        self._flag = False

    def _roll(self, now: float) -> None:
        target = int(now / self.epoch_len)
        if target <= self._epoch:
            return
        # First pending boundary sees the growth since the previous sample.
        self._flag = congestion_flag(self)
        self.prev_occupancy = self.occupancy
        self._epoch += 1
        if target > self._epoch:
            # No events in between: occupancy was flat, growth is zero.
            self._flag = self.occupancy + 0 > self.capacity
            self._epoch = target

    def try_enqueue(self, now: float) -> str:
        """ENQUEUED with occupancy+1, or DROPPED (overflow) on a full buffer."""
        self._roll(now)
        if self.occupancy < self.capacity:
            self.occupancy += 1
            if self.occupancy > self.capacity:
                raise InvariantViolation("buffer occupancy exceeded capacity")
            return ENQUEUED
        self.drops += 1
        return DROPPED

    def release(self, now: float) -> None:
        self._roll(now)
        self.occupancy -= 1
        if self.occupancy < 0:
            raise InvariantViolation("buffer occupancy went negative")

    def flag(self, now: float) -> bool:
        """Congestion flag in force during the epoch containing `now`."""
        self._roll(now)
        return self._flag
