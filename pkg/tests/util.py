"""Shared mini-network builders for tests."""

from __future__ import annotations

from rrrt.kernel import Simulator
from rrrt.nodes import NetworkRuntime
from rrrt.packet import KIND_DATA, Packet
from rrrt.topology import CaModel, Link, NodeSpec, Topology, bit_rate_for_service

FIXED_CA = CaModel(kind="fixed", value=0.0002, cap=0.0002)


class Catcher:
    """Terminal app that records delivered packets."""

    def __init__(self, runtime, node):
        self.runtime = runtime
        self.node = node
        self.got = []

    def on_packet(self, pkt, now):
        self.got.append((pkt.pid, now, pkt.cn))
        self.runtime.sim.trace.log(now, self.node, "deliver", pkt.pid, -1, "",
                                   pkt.gen_time, pkt.flow)

    def on_control(self, pkt, now):
        self.got.append((pkt.pid, now, pkt.kind))

    def on_event(self, sim, event):
        pass


def chain_network(seed=1, services=(100.0, 100.0), capacity=50, ca=FIXED_CA,
                  loss=None, alternates=False):
    """Linear chain n0 -> n1 -> ... -> nk with one service rate per link.

    Returns (sim, runtime, node names, catcher at the last node). With
    `alternates`, an extra node `alt` bypasses n1 for traffic from n0.
    """
    count = len(services) + 1
    names = [f"n{i}" for i in range(count)]
    nodes = [NodeSpec(name, "sensor", (10.0 * i, 0.0)) for i, name in enumerate(names)]
    links = []
    for i, service in enumerate(services):
        lr = loss[i] if loss else 0.0
        rate = bit_rate_for_service(service, ca.value, 1000.0)
        links.append(Link(names[i], names[i + 1], 10.0, rate, service, loss=lr))
        links.append(Link(names[i + 1], names[i], 10.0, rate, service))
    if alternates:
        rate = bit_rate_for_service(services[0], ca.value, 1000.0)
        nodes.append(NodeSpec("alt", "sensor", (10.0, 10.0)))
        links.append(Link(names[0], "alt", 14.0, rate, services[0]))
        links.append(Link("alt", names[2], 14.0, rate, services[0]))
    topo = Topology(nodes, links, ca)
    topo.build_routes()
    sim = Simulator(seed)
    runtime = NetworkRuntime(sim, topo, packet_len=1000.0, ctl_len=200.0,
                             buffer_capacity=capacity, epoch_len=0.1)
    catcher = Catcher(runtime, names[-1])
    runtime.attach_app(names[-1], catcher)
    return sim, runtime, names, catcher


def data_packet(sim, src, dst, flow="data", gen_time=None):
    return Packet(pid=sim.new_pid(), kind=KIND_DATA, flow=flow, src=src, dst=dst,
                  gen_time=sim.now if gen_time is None else gen_time)
