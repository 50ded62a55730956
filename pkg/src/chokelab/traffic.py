"""Packet sources: a scheduled constant-bit-rate UDP flow and AIMD TCP flows."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

_EPS = 1e-9


@dataclass(frozen=True)
class UdpSchedule:
    """Piecewise-constant UDP rate.

    ``segments`` holds ``(start_time, rate)`` pairs with rates in multiples of
    the link capacity ``C``.  Each segment runs until the next one starts.
    Arrivals inside a segment are strictly periodic and the first one falls
    exactly on the segment start.
    """

    segments: tuple = ((0.0, 0.0),)

    def __post_init__(self):
        segs = tuple((float(s), float(r)) for s, r in self.segments)
        if not segs:
            raise ValueError("schedule needs at least one segment")
        if any(b[0] <= a[0] for a, b in zip(segs, segs[1:])):
            raise ValueError("segment start times must be strictly increasing")
        if any(r < 0 or not math.isfinite(r) for _, r in segs):
            raise ValueError("segment rates must be finite and >= 0")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, rate: float) -> "UdpSchedule":
        return cls(((0.0, rate),))

    def rate_at(self, t: float) -> float:
        rate = 0.0
        for s, r in self.segments:
            if s <= t:
                rate = r
            else:
                break
        return rate

    def changes(self) -> list[tuple[float, float, float]]:
        """``(time, old_rate, new_rate)`` for every boundary where the rate changes."""
        out = []
        for (_, r0), (s1, r1) in zip(self.segments, self.segments[1:]):
            if r1 != r0:
                out.append((s1, r0, r1))
        return out

    def expected_count(self, t0: float, t1: float, C: float) -> float:
        """Integral of the schedule rate over ``[t0, t1)`` in packets."""
        total = 0.0
        bounds = [s for s, _ in self.segments[1:]] + [math.inf]
        for (s, r), e in zip(self.segments, bounds):
            lo, hi = max(s, t0), min(e, t1)
            if hi > lo:
                total += r * C * (hi - lo)
        return total


def udp_next_arrival(sched: UdpSchedule, now: float, C: float) -> float | None:
    """Time of the first UDP arrival strictly after ``now`` (None if there is none).

    Pass ``now = -inf`` for the first arrival of a run.
    """
    segs = sched.segments
    n = len(segs)
    for i in range(n):
        start, rate = segs[i]
        end = segs[i + 1][0] if i + 1 < n else math.inf
        if end <= now + _EPS * 1e-3 or rate == 0.0:
            continue
        if now < start:
            return start
        gap = 1.0 / (rate * C)
        k = math.floor((now - start) / gap + _EPS) + 1
        t = start + k * gap
        if t < end - 1e-12:
            return t
    return None


def iter_udp_arrivals(sched: UdpSchedule, C: float, until: float = math.inf):
    """Yield every UDP arrival time before ``until``, in order.

    Produces the same sequence as repeated :func:`udp_next_arrival` calls.
    """
    segs = sched.segments
    n = len(segs)
    for i in range(n):
        start, rate = segs[i]
        end = min(segs[i + 1][0] if i + 1 < n else math.inf, until)
        if rate == 0.0 or start >= end:
            continue
        gap = 1.0 / (rate * C)
        k = 0
        t = start
        while t < end - 1e-12:
            yield t
            k += 1
            t = start + k * gap


class TcpPhase(enum.IntEnum):
    SLOW_START = 0
    CONGESTION_AVOIDANCE = 1
    RECOVERY = 2


@dataclass(slots=True)
class TcpFlowState:
    """Sender-side AIMD state.  ``in_flight`` counts unacknowledged packets."""

    rtt_base: float
    cwnd: float = 1.0
    ssthresh: float = 64.0
    in_flight: int = 0
    phase: TcpPhase = TcpPhase.SLOW_START
    next_seq: int = 0
    recover_seq: int = 0
    stale_below: int = 0
    srtt: float = 0.0
    rttvar: float = 0.0
    rto: float = 1.0
    min_rto: float = 0.2
    last_progress: float = 0.0
    timeouts: int = 0
    losses: int = field(default=0)


def tcp_send_quota(st: TcpFlowState) -> int:
    """Packets the window allows right now (``in_flight`` may reach ``ceil(cwnd)``)."""
    if st.in_flight >= st.cwnd:
        return 0
    return math.ceil(st.cwnd) - st.in_flight


def tcp_take_seq(st: TcpFlowState, now: float) -> int:
    """Register one packet as sent and return its sequence number."""
    seq = st.next_seq
    st.next_seq = seq + 1
    if st.in_flight == 0:
        st.last_progress = now
    st.in_flight += 1
    return seq


def tcp_on_ack(st: TcpFlowState, seq: int, now: float, send_time: float | None = None) -> int:
    """Process the ACK for ``seq``; returns the new send quota."""
    if seq < st.stale_below:
        return tcp_send_quota(st)
    st.in_flight -= 1
    st.last_progress = now
    if send_time is not None:
        sample = now - send_time
        if st.srtt == 0.0:
            st.srtt = sample
            st.rttvar = sample / 2
        else:
            st.rttvar += 0.25 * (abs(st.srtt - sample) - st.rttvar)
            st.srtt += 0.125 * (sample - st.srtt)
        st.rto = max(st.min_rto, st.srtt + 4 * st.rttvar)
    if st.phase is TcpPhase.RECOVERY:
        if seq >= st.recover_seq:
            st.phase = TcpPhase.CONGESTION_AVOIDANCE
    elif st.phase is TcpPhase.SLOW_START:
        st.cwnd += 1.0
        if st.cwnd >= st.ssthresh:
            st.phase = TcpPhase.CONGESTION_AVOIDANCE
    else:
        st.cwnd += 1.0 / st.cwnd
    return tcp_send_quota(st)


def tcp_on_loss(st: TcpFlowState, seq: int, now: float) -> int:
    """Process a loss notification for ``seq``; halves the window once per episode."""
    if seq < st.stale_below:
        return tcp_send_quota(st)
    st.in_flight -= 1
    st.losses += 1
    if seq >= st.recover_seq:
        st.ssthresh = max(st.cwnd / 2.0, 2.0)
        st.cwnd = max(st.cwnd / 2.0, 1.0)
        st.recover_seq = st.next_seq
        st.phase = TcpPhase.RECOVERY
    return tcp_send_quota(st)


def tcp_on_timeout(st: TcpFlowState, now: float) -> int:
    """Retransmission timeout: everything outstanding is written off."""
    st.ssthresh = max(st.cwnd / 2.0, 2.0)
    st.cwnd = 1.0
    st.phase = TcpPhase.SLOW_START
    st.in_flight = 0
    st.stale_below = st.next_seq
    st.recover_seq = st.next_seq
    st.rto = min(2 * st.rto, 60.0)
    st.last_progress = now
    st.timeouts += 1
    return tcp_send_quota(st)
