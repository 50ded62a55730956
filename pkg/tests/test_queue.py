import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chokelab.simcore import (
    UDP_FLOW,
    ChokeQueue,
    DropOrder,
    EventLoop,
    Outcome,
    Packet,
    RedParams,
    dequeue_service,
    enqueue,
    red_drop_probability,
    snapshot,
)

RED = RedParams()
NO_RED = RedParams(min_th=1e8, max_th=2e8)


def make_queue(n_flows=3, capacity=1000, red=NO_RED, seed=0, order=DropOrder.CHOKE_THEN_RED):
    return ChokeQueue(capacity, red, n_flows, order, random.Random(seed))


def fill(q, flows, now=0.0):
    seqs = {}
    for f in flows:
        s = seqs.get(f, 0)
        seqs[f] = s + 1
        q._buf.append(Packet(f, s, now))
        q._buf[-1].admit_index = q._admit_seq
        q._admit_seq += 1
        q._len += 1
        q._len0 += f == UDP_FLOW


# --- RED ---------------------------------------------------------------------

def test_red_below_threshold():
    assert red_drop_probability(10, RED) == 0.0


def test_red_midpoint():
    assert red_drop_probability((RED.min_th + RED.max_th) / 2, RED) == pytest.approx(RED.max_p / 2)


def test_red_saturates():
    assert red_drop_probability(RED.max_th, RED) == 1.0
    gentle = RedParams(gentle=True)
    assert red_drop_probability(1.5 * gentle.max_th, gentle) == pytest.approx(gentle.max_p + (1 - gentle.max_p) / 2)
    assert red_drop_probability(2 * gentle.max_th, gentle) == 1.0


@pytest.mark.parametrize("gentle", [False, True])
def test_red_monotone_piecewise_linear(gentle):
    red = RedParams(gentle=gentle)
    grid = np.linspace(0, 2500, 25001)
    p = np.array([red_drop_probability(x, red) for x in grid])
    assert np.all(np.diff(p) >= 0)
    assert p.min() == 0 and p.max() == 1
    # linear inside the ramp: constant slope
    inside = (grid > red.min_th + 1) & (grid < red.max_th - 1)
    slope = np.diff(p)[inside[:-1]]
    assert np.allclose(slope, slope[0])


@pytest.mark.parametrize("kw", [dict(min_th=0), dict(min_th=50, max_th=20), dict(max_p=0),
                                dict(max_p=1.5), dict(wq=0), dict(wq=1)])
def test_red_params_validated(kw):
    with pytest.raises(ValueError):
        RedParams(**kw)


# --- enqueue -------------------------------------------------------------------

def test_empty_buffer_admits():
    q = make_queue(red=RED)
    assert enqueue(q, Packet(1, 0), 0.0) == (Outcome.ADMITTED, None)


def test_all_udp_buffer_always_matches():
    q = make_queue()
    fill(q, [UDP_FLOW] * 50)
    for i in range(40):
        outcome, victim = enqueue(q, Packet(UDP_FLOW, 100 + i), 0.0)
        assert outcome is Outcome.CHOKE_MATCHED and victim.flow_id == UDP_FLOW
    assert len(q) == 10


def test_match_removes_two_packets_of_same_flow():
    q = make_queue()
    fill(q, [1, 2] * 50)
    for seq in range(100, 200):
        before = len(q)
        outcome, victim = enqueue(q, Packet(1, seq), 0.0)
        if outcome is Outcome.CHOKE_MATCHED:
            break
    assert victim.flow_id == 1
    assert len(q) == before - 1
    c = q.counters
    assert c.choke_self_drops[1] == 1 and c.choke_victim_drops[1] == 1


@pytest.mark.parametrize("b0,b", [(1, 10), (3, 10), (40, 100), (250, 1000)])
def test_match_probability_is_buffer_share(b0, b):
    # frozen buffer: restore it after every trial so the share stays b0/b
    trials = 100_000
    rng = random.Random(7)
    q = make_queue(seed=11)
    fill(q, [UDP_FLOW] * b0 + [1] * (b - b0))
    rng.shuffle(q._buf)
    hits = 0
    draw = q._draw
    for _ in range(trials):
        _, p = draw()
        hits += p.flow_id == UDP_FLOW
    share = b0 / b
    se = (share * (1 - share) / trials) ** 0.5
    assert abs(hits / trials - share) < 5 * se


def test_match_probability_through_enqueue():
    # the arriving UDP packet matches at rate b0/b; reset the queue each trial
    trials = 100_000
    q = make_queue(seed=3)
    layout = [UDP_FLOW] * 30 + [1] * 70
    random.Random(1).shuffle(layout)
    fill(q, layout)
    saved = (list(q._buf), q._len, q._len0, q._dead, q._head)
    matched = 0
    for i in range(trials):
        outcome, _ = q.enqueue(Packet(UDP_FLOW, 1000 + i), 0.0)
        if outcome is Outcome.CHOKE_MATCHED:
            matched += 1
        q._buf, q._len, q._len0, q._dead, q._head = list(saved[0]), *saved[1:]
    assert abs(matched / trials - 0.3) < 5 * (0.3 * 0.7 / trials) ** 0.5


def test_red_then_choke_order_skips_match_on_red_drop():
    always = RedParams(min_th=1, max_th=2, max_p=1.0)
    q = make_queue(red=always, order=DropOrder.RED_THEN_CHOKE)
    fill(q, [UDP_FLOW] * 10)
    q.avg_q = 100.0
    outcome, _ = q.enqueue(Packet(UDP_FLOW, 50), 0.0)
    assert outcome is Outcome.RED_DROPPED
    assert len(q) == 10


def test_choke_then_red_order_matches_first():
    always = RedParams(min_th=1, max_th=2, max_p=1.0)
    q = make_queue(red=always)
    fill(q, [UDP_FLOW] * 10)
    q.avg_q = 100.0
    outcome, _ = q.enqueue(Packet(UDP_FLOW, 50), 0.0)
    assert outcome is Outcome.CHOKE_MATCHED


def test_overflow_at_capacity():
    q = make_queue(capacity=5)
    fill(q, [1] * 5)
    outcome, _ = q.enqueue(Packet(2, 0), 0.0)
    assert outcome is Outcome.OVERFLOW_DROPPED
    assert len(q) == 5


def test_avg_q_updates_on_every_arrival():
    q = make_queue(red=RED)
    fill(q, [1] * 100)
    q.enqueue(Packet(2, 0), 0.0)
    assert q.avg_q == pytest.approx(RED.wq * 100)
    q.enqueue(Packet(2, 1), 0.0)
    assert q.avg_q > RED.wq * 100


# --- service and snapshots -------------------------------------------------------

def test_single_packet_service_time():
    q = make_queue()
    enqueue(q, Packet(1, 0), 0.0)
    p, done = dequeue_service(q, 2500.0, 0.0)
    assert done == pytest.approx(0.0004)
    assert q.counters.transmitted[1] == 1


def test_fifo_order_same_flow():
    q = make_queue()
    fill(q, [1, 1])
    a, _ = dequeue_service(q, 2500.0, 0.0)
    b, _ = dequeue_service(q, 2500.0, 0.0)
    assert (a.seq, b.seq) == (0, 1)


def test_dequeue_empty():
    assert dequeue_service(make_queue(), 2500.0, 0.0) is None


def test_backlogged_departure_rate():
    # back-to-back service over 10 simulated seconds
    C = 2500.0
    q = make_queue(capacity=10**6)
    fill(q, [1] * 30000)
    t, n = 0.0, 0
    while t < 10.0:
        _, t = dequeue_service(q, C, t)
        n += 1
    assert n / 10.0 == pytest.approx(C, rel=1e-3)


def test_snapshot_empty():
    s = snapshot(make_queue())
    assert (s.b, s.b0, s.h0, len(s.udp_by_slot)) == (0, 0, 0.0, 0)


def test_snapshot_all_udp():
    q = make_queue()
    fill(q, [UDP_FLOW] * 10)
    s = snapshot(q)
    assert (s.b, s.b0, s.h0) == (10, 10, 1.0)
    assert s.udp_by_slot.tolist() == [1] * 10


def test_snapshot_indexed_from_tail():
    q = make_queue()
    fill(q, [1, 1, UDP_FLOW])
    assert snapshot(q).udp_by_slot.tolist() == [1, 0, 0]


def test_tombstones_skipped_and_compacted():
    q = make_queue(seed=5)
    fill(q, [UDP_FLOW, 1] * 200)
    for i in range(300):
        q.enqueue(Packet(UDP_FLOW, 1000 + i), 0.0)
    live = q.live_packets()
    assert len(live) == len(q)
    assert sum(p.flow_id == UDP_FLOW for p in live) == q.udp_backlog
    order = [p.admit_index for p in live]
    assert order == sorted(order)
    out = []
    while len(q):
        out.append(q.pop_head().admit_index)
    assert out == order


# --- event loop ---------------------------------------------------------------

def test_event_loop_orders_ties_by_insertion():
    loop = EventLoop()
    for i, t in enumerate([2.0, 1.0, 1.0, 3.0, 1.0]):
        loop.schedule(t, 0, i)
    fired = [loop.pop() for _ in range(len(loop))]
    assert [f[0] for f in fired] == [1.0, 1.0, 1.0, 2.0, 3.0]
    assert [f[2] for f in fired[:3]] == [1, 2, 4]
    assert not loop


def test_event_loop_rejects_past():
    loop = EventLoop()
    loop.schedule(1.0, 0)
    loop.pop()
    with pytest.raises(ValueError):
        loop.schedule(0.5, 0)


# --- property: counters conserve under random operation sequences ----------------------

@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), ops=st.lists(st.integers(0, 4), min_size=1, max_size=400),
       capacity=st.integers(1, 50), order=st.sampled_from(list(DropOrder)),
       red_low=st.booleans())
def test_random_ops_conserve(seed, ops, capacity, order, red_low):
    red = RedParams(min_th=1, max_th=10, max_p=0.5) if red_low else NO_RED
    q = ChokeQueue(capacity, red, 4, order, random.Random(seed))
    seqs = [0] * 4
    admitted_order = []
    removed = set()
    served = []
    for op in ops:
        if op == 4:
            r = dequeue_service(q, 1.0, 0.0)
            if r:
                served.append(r[0].admit_index)
            continue
        p = Packet(op, seqs[op])
        seqs[op] += 1
        outcome, victim = q.enqueue(p, 0.0)
        if outcome is Outcome.ADMITTED:
            admitted_order.append(p.admit_index)
        if victim is not None:
            assert victim.flow_id == p.flow_id
            removed.add(victim.admit_index)
        assert len(q) <= capacity
    c = q.counters
    resid = [0] * 4
    for p in q.live_packets():
        resid[p.flow_id] += 1
    for f in range(4):
        assert c.arrivals[f] == (c.red_drops[f] + c.overflow_drops[f] + c.choke_self_drops[f]
                                 + c.choke_victim_drops[f] + c.transmitted[f] + resid[f])
        assert c.admitted[f] == resid[f] + c.transmitted[f] + c.choke_victim_drops[f]
    assert served == sorted(served)
    assert served == [i for i in admitted_order if i not in removed][:len(served)]
