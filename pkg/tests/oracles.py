"""Independent reference implementations used only by the tests.

These are deliberately written as straight-line transcriptions or brute-force
procedures, structured differently from the library code they check.
"""

from __future__ import annotations

import math


def update_law_transcription(f_i, dr_o, dr_d, t_i, t_sa, cn, beta, x, f_min, f_cap,
                             eq4_alt=False, eq6_alt=False):
    """Nested-branch rendition of the five frequency-update rules.

    Mirrors the published decision structure directly: congestion first, then
    the reliability indicator against 1 (strict band tests without
    congestion), with the same tie and degenerate-case choices as the
    library: indicator exactly 1 under congestion takes the early branch,
    zero on-time packets without congestion jump to f_cap, and the congested
    exponential decrease never raises the frequency.
    """
    delta = dr_o / dr_d
    if cn:
        if delta < 1:
            if eq6_alt:
                f_next = f_i * dr_o / (dr_d * x)
            else:
                f_next = min(f_i, f_i ** (dr_o / (dr_d * x)))
            x_next = x + 1
        else:
            if eq4_alt:
                f_next = min(f_i * (t_i / t_sa), f_i * (dr_d / dr_o))
            else:
                f_next = min(f_i * (t_i / t_sa), f_i * (t_i / t_sa))
            x_next = 1
    else:
        if delta < 1 - beta:
            if dr_o < 1:
                f_next = f_cap
            else:
                f_next = f_i * (dr_d / dr_o)
        elif delta > 1 + beta:
            f_next = f_i * (t_i / t_sa)
        else:
            f_next = f_i
        x_next = 1
    if f_next < f_min:
        f_next = f_min
    if f_next > f_cap:
        f_next = f_cap
    return f_next, x_next


def condition_table(alpha, cn, beta):
    """Independently coded classification table (strings, decision-table style)."""
    rows = [
        (lambda: cn and alpha < 1.0, "LowRelCong"),
        (lambda: cn and alpha >= 1.0, "EarlyRelCong"),
        (lambda: not cn and alpha < 1.0 - beta, "LowRelNoCong"),
        (lambda: not cn and alpha > 1.0 + beta, "EarlyRelNoCong"),
        (lambda: not cn and 1.0 - beta <= alpha <= 1.0 + beta, "AdequateRelNoCong"),
    ]
    matches = [name for pred, name in rows if pred()]
    assert len(matches) == 1, f"classification not total/unique at {(alpha, cn, beta)}"
    return matches[0]


def linear_field_step(f, n_sources, dr_d, t_sa, beta, f_min, f_cap,
                      service_rate=None, cross_rate=0.0, x=1):
    """One decision interval of a brute-force fluid model of the sensor field.

    On-time deliveries scale linearly with the reporting frequency until the
    shared relay saturates; under overload the relay serves at its rate and
    flags congestion. Returns (f_next, x_next, condition).
    """
    offered = n_sources * f + cross_rate
    if service_rate is None or offered <= service_rate:
        congested = False
        delivered = n_sources * f * t_sa
    else:
        congested = True
        delivered = service_rate * t_sa * (n_sources * f) / offered
    dr_o = math.floor(delivered)
    alpha = dr_o / dr_d
    cond = condition_table(alpha, congested, beta)
    arrival_rate = delivered / t_sa
    t_i = dr_d / arrival_rate if dr_o >= dr_d else math.inf
    f_next, x_next = update_law_transcription(
        f, dr_o, dr_d, t_i, t_sa, congested, beta, x, f_min, f_cap)
    return f_next, x_next, cond


def intervals_to_adequate(f_init, n_sources, dr_d, t_sa=1.0, beta=0.05,
                          f_min=0.1, f_cap=50.0, service_rate=None,
                          cross_rate=0.0, cross_intervals=0, max_intervals=60):
    """Brute-force convergence count: intervals until the fluid model stays adequate."""
    f, x = f_init, 1
    for i in range(1, max_intervals + 1):
        cross = cross_rate if i <= cross_intervals else 0.0
        f_next, x, cond = linear_field_step(
            f, n_sources, dr_d, t_sa, beta, f_min, f_cap, service_rate, cross, x)
        if cond == "AdequateRelNoCong" and cross == 0.0:
            return i
        f = f_next
    return None


def sack_holes_oracle(received: set[int]) -> list[int]:
    """Holes below the highest received sequence, by exhaustive scan."""
    if not received:
        return []
    top = max(received)
    return [seq for seq in range(1, top + 1) if seq not in received]
