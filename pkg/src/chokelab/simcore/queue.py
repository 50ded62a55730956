"""FIFO buffer with CHOKe flow matching and RED early drop."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass

import numpy as np

UDP_FLOW = 0


class Outcome(enum.IntEnum):
    ADMITTED = 0
    CHOKE_MATCHED = 1
    RED_DROPPED = 2
    OVERFLOW_DROPPED = 3


class DropOrder(str, enum.Enum):
    CHOKE_THEN_RED = "choke_then_red"
    RED_THEN_CHOKE = "red_then_choke"


class Packet:
    __slots__ = ("flow_id", "seq", "size", "send_time", "enqueue_time", "admit_index")

    def __init__(self, flow_id: int, seq: int, send_time: float = 0.0, size: int = 1000):
        self.flow_id = flow_id
        self.seq = seq
        self.size = size
        self.send_time = send_time
        self.enqueue_time = send_time
        self.admit_index = -1

    def __repr__(self):
        return f"Packet(flow={self.flow_id}, seq={self.seq})"


@dataclass(frozen=True)
class RedParams:
    min_th: float = 20.0
    max_th: float = 1000.0
    max_p: float = 0.1
    wq: float = 0.002
    gentle: bool = False

    def __post_init__(self):
        if not 0 < self.min_th < self.max_th:
            raise ValueError("RED thresholds must satisfy 0 < min_th < max_th")
        if not 0 < self.max_p <= 1:
            raise ValueError("max_p must lie in (0, 1]")
        if not 0 < self.wq < 1:
            raise ValueError("wq must lie in (0, 1)")


def red_drop_probability(avg_q: float, red: RedParams) -> float:
    """Classic RED ramp, optionally with the gentle extension above ``max_th``."""
    if avg_q < red.min_th:
        return 0.0
    if avg_q < red.max_th:
        return red.max_p * (avg_q - red.min_th) / (red.max_th - red.min_th)
    if red.gentle and avg_q < 2 * red.max_th:
        return red.max_p + (1.0 - red.max_p) * (avg_q - red.max_th) / red.max_th
    return 1.0


@dataclass
class FlowCounters:
    """Per-flow tallies, each a list indexed by flow id."""

    arrivals: list
    admitted: list
    red_drops: list
    overflow_drops: list
    choke_self_drops: list
    choke_victim_drops: list
    transmitted: list

    @classmethod
    def zeros(cls, n_flows: int) -> "FlowCounters":
        return cls(*([0] * n_flows for _ in range(7)))

    def as_dict(self) -> dict:
        return {k: list(v) for k, v in self.__dict__.items()}


class ChokeQueue:
    """Tail-drop-limited FIFO with CHOKe matching and RED.

    Matched victims are removed from the middle of the buffer by
    tombstoning; the backing list is compacted lazily.  The packet currently
    being transmitted has already left the buffer and cannot be drawn.
    """

    def __init__(self, capacity: int, red: RedParams, n_flows: int,
                 drop_order: DropOrder | str = DropOrder.CHOKE_THEN_RED,
                 rng: random.Random | None = None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.red = red
        self.drop_order = DropOrder(drop_order)
        self.rng = rng if rng is not None else random.Random(0)
        self.avg_q = 0.0
        self.counters = FlowCounters.zeros(n_flows)
        self._buf: list = []
        self._head = 0
        self._dead = 0
        self._len = 0
        self._len0 = 0
        self._admit_seq = 0

    def __len__(self):
        return self._len

    @property
    def udp_backlog(self) -> int:
        return self._len0

    def _draw(self):
        buf, head, rand = self._buf, self._head, self.rng.random
        span = len(buf) - head
        while True:
            i = head + int(rand() * span)
            p = buf[i]
            if p is not None:
                return i, p

    def _red_drop(self) -> bool:
        p = red_drop_probability(self.avg_q, self.red)
        return p > 0.0 and (p >= 1.0 or self.rng.random() < p)

    def enqueue(self, p: Packet, now: float) -> tuple[Outcome, Packet | None]:
        """Offer an arriving packet; returns the outcome and any matched victim."""
        c = self.counters
        f = p.flow_id
        c.arrivals[f] += 1
        wq = self.red.wq
        self.avg_q = (1.0 - wq) * self.avg_q + wq * self._len

        if self.drop_order is DropOrder.RED_THEN_CHOKE and self._red_drop():
            c.red_drops[f] += 1
            return Outcome.RED_DROPPED, None
        if self._len:
            i, victim = self._draw()
            if victim.flow_id == f:
                self._buf[i] = None
                self._dead += 1
                self._len -= 1
                if f == UDP_FLOW:
                    self._len0 -= 1
                c.choke_self_drops[f] += 1
                c.choke_victim_drops[f] += 1
                self._maybe_compact()
                return Outcome.CHOKE_MATCHED, victim
        if self.drop_order is DropOrder.CHOKE_THEN_RED and self._red_drop():
            c.red_drops[f] += 1
            return Outcome.RED_DROPPED, None
        if self._len >= self.capacity:
            c.overflow_drops[f] += 1
            return Outcome.OVERFLOW_DROPPED, None

        p.enqueue_time = now
        p.admit_index = self._admit_seq
        self._admit_seq += 1
        self._buf.append(p)
        self._len += 1
        if f == UDP_FLOW:
            self._len0 += 1
        c.admitted[f] += 1
        return Outcome.ADMITTED, None

    def pop_head(self) -> Packet | None:
        """Remove and return the oldest live packet."""
        if not self._len:
            return None
        buf = self._buf
        head = self._head
        p = buf[head]
        while p is None:
            head += 1
            self._dead -= 1
            p = buf[head]
        buf[head] = None
        self._head = head + 1
        self._len -= 1
        if p.flow_id == UDP_FLOW:
            self._len0 -= 1
        self._maybe_compact()
        return p

    def _maybe_compact(self):
        buf = self._buf
        if self._head > 1024 and self._head * 2 > len(buf):
            del buf[:self._head]
            self._head = 0
        if self._dead > 64 and self._dead > self._len:
            self._buf = [p for p in buf[self._head:] if p is not None]
            self._head = 0
            self._dead = 0

    def live_packets(self) -> list[Packet]:
        """Buffered packets from head (oldest) to tail (newest)."""
        return [p for p in self._buf[self._head:] if p is not None]

    def snapshot(self) -> "QueueSnapshot":
        pkts = self.live_packets()
        b = len(pkts)
        b0 = self._len0
        # slot 0 is the tail
        hist = np.fromiter((p.flow_id == UDP_FLOW for p in reversed(pkts)), dtype=np.int8, count=b)
        return QueueSnapshot(b, b0, b0 / b if b else 0.0, hist)


@dataclass(frozen=True, eq=False)
class QueueSnapshot:
    b: int
    b0: int
    h0: float
    udp_by_slot: np.ndarray


def enqueue(q: ChokeQueue, p: Packet, now: float):
    return q.enqueue(p, now)


def dequeue_service(q: ChokeQueue, C: float, now: float) -> tuple[Packet, float] | None:
    """Start transmitting the head packet; returns it with its completion time.

    ``C`` is in packets per second of the packet's size class, so service
    lasts ``1/C``.  The transmitted counter is bumped here; the caller owns
    the completion event.
    """
    p = q.pop_head()
    if p is None:
        return None
    q.counters.transmitted[p.flow_id] += 1
    return p, now + 1.0 / C


def snapshot(q: ChokeQueue) -> QueueSnapshot:
    return q.snapshot()
