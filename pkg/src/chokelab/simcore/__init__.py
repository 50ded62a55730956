"""Discrete-event core: event loop and the CHOKe/RED bottleneck queue."""

from .events import EventLoop
from .queue import (
    UDP_FLOW,
    ChokeQueue,
    DropOrder,
    FlowCounters,
    Outcome,
    Packet,
    QueueSnapshot,
    RedParams,
    dequeue_service,
    enqueue,
    red_drop_probability,
    snapshot,
)

__all__ = [
    "UDP_FLOW",
    "ChokeQueue",
    "DropOrder",
    "EventLoop",
    "FlowCounters",
    "Outcome",
    "Packet",
    "QueueSnapshot",
    "RedParams",
    "dequeue_service",
    "enqueue",
    "red_drop_probability",
    "snapshot",
]
