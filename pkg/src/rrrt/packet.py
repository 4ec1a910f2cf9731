"""Simulated datagram shared by every protocol layer.

One mutable object travels hop to hop inside a run; the trace records the
copies (one per link traversal). Control packets (probes, rate feedback,
frequency broadcasts) reuse the same type with a different `kind`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

KIND_DATA = "data"
KIND_PROBE = "probe"
KIND_FEEDBACK = "feedback"
KIND_FREQ = "freq"


@dataclass(slots=True)
class Packet:
    pid: int
    kind: str
    flow: str
    src: str
    dst: str
    gen_time: float
    cn: bool = False
    seq: Optional[int] = None
    # Path measurement carried by transport packets (probe and data alike):
    # running maximum of per-node service delay, and hops traversed.
    bottleneck_delay: Optional[float] = None
    hop_count: int = 0
    # Accumulated per-hop delay components, for delay-budget accounting.
    b_sum: float = 0.0
    ca_sum: float = 0.0
    t_sum: float = 0.0
    p_sum: float = 0.0
    payload: Any = None
