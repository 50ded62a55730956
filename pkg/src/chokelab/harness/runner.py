"""Single simulation runs and replicated, window-aggregated traces."""

from __future__ import annotations

import heapq
import json
import math
import random
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..simcore import UDP_FLOW, ChokeQueue, Outcome, Packet
from ..traffic import (
    TcpFlowState,
    iter_udp_arrivals,
    tcp_on_ack,
    tcp_on_loss,
    tcp_on_timeout,
    tcp_take_seq,
)
from .scenario import Scenario

# heap event kinds
_ARRIVE, _ACK, _RTO, _START = 0, 1, 2, 3

# raw per-window count series kept by a run
COUNT_SERIES = (
    "dep_udp", "dep_tcp", "arr_udp", "arr_tcp",
    "red_udp", "red_tcp", "choke_udp", "choke_tcp",
    "overflow_udp", "overflow_tcp", "victim_udp", "admit_udp",
    "sojourn_n",
)


class RunError(RuntimeError):
    def __init__(self, index: int, seed: int, cause: BaseException):
        super().__init__(f"replication {index} (seed {seed}) failed: {cause!r}")
        self.index = index
        self.seed = seed


@dataclass(eq=False)
class RunResult:
    """Everything recorded by one run.

    Count series are per measurement window; ``b_end``/``b0_end`` are the
    backlog sampled at each window's right edge.
    """

    scenario: Scenario
    seed: int
    counts: dict
    b_end: np.ndarray
    b0_end: np.ndarray
    sojourn_sum: np.ndarray
    counters: dict
    residual: list
    fifo_violations: int
    max_backlog: int
    snapshots: dict = field(default_factory=dict)
    hist_udp: np.ndarray | None = None
    hist_total: np.ndarray | None = None
    hist_samples: int = 0
    tcp_timeouts: int = 0
    tcp_losses: int = 0
    window_overshoots: int = 0

    def trace(self, window: float | None = None) -> "Trace":
        return Trace.from_runs([self], window)

    def conservation_errors(self) -> list[int]:
        """Per-flow arrivals minus all accounted fates; all zeros when consistent."""
        c = self.counters
        return [
            c["arrivals"][f] - (c["red_drops"][f] + c["overflow_drops"][f]
                                + c["choke_self_drops"][f] + c["choke_victim_drops"][f]
                                + c["transmitted"][f] + self.residual[f])
            for f in range(len(self.residual))
        ]


def _spawn_rngs(seed: int, n: int) -> list[random.Random]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [random.Random(int(c.generate_state(1, np.uint64)[0])) for c in children]


def run_single(s: Scenario, seed: int, snapshot_times=(), hist_times=(), hist_bins: int = 50,
               log=None) -> RunResult:
    """Simulate one replication of ``s``.

    ``snapshot_times`` request exact queue snapshots (taken before any event
    at that instant).  ``hist_times`` accumulate the UDP occupancy of the
    buffer by relative position, ``hist_bins`` bins from tail (0) to head.
    ``log`` may be a text stream receiving one JSON record per queue event.
    """
    rng_queue, rng_traffic = _spawn_rngs(seed, 2)
    C = float(s.C)
    dt = s.window
    nw = s.n_windows
    T = nw * dt
    N = s.N
    n_flows = N + 1
    q = ChokeQueue(s.capacity, s.red, n_flows, s.drop_order, rng_queue)
    cnt = q.counters
    service = 1.0 / C

    tp = s.tcp
    flows = [None]
    half_rtt = [0.0]
    heap: list = []
    hseq = 0
    for f in range(1, n_flows):
        rtt = tp.base_rtt * rng_traffic.uniform(1.0 - tp.rtt_spread, 1.0 + tp.rtt_spread)
        start = rng_traffic.uniform(0.0, tp.start_spread)
        flows.append(TcpFlowState(rtt_base=rtt, ssthresh=tp.initial_ssthresh, min_rto=tp.min_rto))
        half_rtt.append(rtt / 2.0)
        heap.append((start, hseq, _START, f, None))
        hseq += 1
    heapq.heapify(heap)
    pending_loss = [[] for _ in range(n_flows)]
    rto_armed = [False] * n_flows

    series = {k: [0] * nw for k in COUNT_SERIES}
    dep_udp, dep_tcp = series["dep_udp"], series["dep_tcp"]
    arr_udp, arr_tcp = series["arr_udp"], series["arr_tcp"]
    red_udp, red_tcp = series["red_udp"], series["red_tcp"]
    ch_udp, ch_tcp = series["choke_udp"], series["choke_tcp"]
    ov_udp, ov_tcp = series["overflow_udp"], series["overflow_tcp"]
    vic_udp, adm_udp = series["victim_udp"], series["admit_udp"]
    soj_n = series["sojourn_n"]
    soj_sum = [0.0] * nw
    b_end = [0] * nw
    b0_end = [0] * nw

    obs = sorted([(t, 0) for t in snapshot_times] + [(t, 1) for t in hist_times])
    obs_i = 0
    next_obs = obs[0][0] if obs else math.inf
    snapshots = {}
    hist_udp = np.zeros(hist_bins)
    hist_total = np.zeros(hist_bins)
    hist_samples = 0

    udp_iter = iter_udp_arrivals(s.udp, C, T)
    next_udp = next(udp_iter, math.inf)
    udp_seq = 0
    in_service = None
    next_dep = math.inf
    last_admit = -1
    fifo_viol = 0
    max_backlog = 0
    inflight_excess = 0
    widx = 0
    next_edge = dt
    inf = math.inf
    heappush, heappop = heapq.heappush, heapq.heappop
    enqueue = q.enqueue
    pop_head = q.pop_head
    transmitted = cnt.transmitted
    ADMITTED, MATCHED, RED = Outcome.ADMITTED, Outcome.CHOKE_MATCHED, Outcome.RED_DROPPED

    def emit(t, event, flow, outcome):
        log.write(json.dumps({"time": t, "event": event, "flow": flow, "outcome": outcome}) + "\n")

    def arm(f, st):
        nonlocal hseq
        if st.in_flight > 0 and not rto_armed[f]:
            rto_armed[f] = True
            heappush(heap, (st.last_progress + st.rto, hseq, _RTO, f, None))
            hseq += 1

    def send(f, st, quota, now):
        nonlocal hseq, inflight_excess
        arrive = now + half_rtt[f]
        for _ in range(quota):
            seq = tcp_take_seq(st, now)
            heappush(heap, (arrive, hseq, _ARRIVE, Packet(f, seq, now), None))
            hseq += 1
        if quota > 0 and st.in_flight > math.ceil(st.cwnd):
            inflight_excess += 1
        arm(f, st)

    while True:
        th = heap[0][0] if heap else inf
        if next_dep <= th and next_dep <= next_udp:
            t, kind = next_dep, -1
        elif th <= next_udp:
            t, kind = th, -2
        else:
            t, kind = next_udp, -3
        if t >= T:
            t = T
        while t >= next_obs:
            if obs[obs_i][1] == 0:
                snapshots[next_obs] = q.snapshot()
            else:
                flags = q.snapshot().udp_by_slot
                b = len(flags)
                if b:
                    idx = (np.arange(b) * hist_bins) // b
                    hist_udp += np.bincount(idx, weights=flags, minlength=hist_bins)
                    hist_total += np.bincount(idx, minlength=hist_bins)
                hist_samples += 1
            obs_i += 1
            next_obs = obs[obs_i][0] if obs_i < len(obs) else inf
        while t >= next_edge and widx < nw:
            b_end[widx] = q._len
            b0_end[widx] = q._len0
            widx += 1
            next_edge = (widx + 1) * dt
        if t >= T:
            break
        w = widx

        if kind == -1:
            # service completion
            p = in_service
            f = p.flow_id
            if f == UDP_FLOW:
                dep_udp[w] += 1
            else:
                dep_tcp[w] += 1
                soj_n[w] += 1
                soj_sum[w] += t - p.enqueue_time
                pl = pending_loss[f]
                if pl:
                    lost = [x for x in pl if x < p.seq]
                    if lost:
                        pending_loss[f] = [x for x in pl if x >= p.seq]
                else:
                    lost = None
                heappush(heap, (t + half_rtt[f], hseq, _ACK, f, (p.seq, p.send_time, lost)))
                hseq += 1
            if q._len:
                p = pop_head()
                transmitted[p.flow_id] += 1
                if p.admit_index <= last_admit:
                    fifo_viol += 1
                last_admit = p.admit_index
                in_service = p
                next_dep = t + service
            else:
                in_service = None
                next_dep = inf
            continue

        if kind == -3:
            p = Packet(UDP_FLOW, udp_seq, t)
            udp_seq += 1
            next_udp = next(udp_iter, inf)
            arr_udp[w] += 1
        else:
            _, _, ek, f, payload = heappop(heap)
            if ek == _ARRIVE:
                p = f
                arr_tcp[w] += 1
            elif ek == _ACK:
                st = flows[f]
                seq, sent, lost = payload
                if lost:
                    for x in lost:
                        tcp_on_loss(st, x, t)
                quota = tcp_on_ack(st, seq, t, sent)
                if quota > 0:
                    send(f, st, quota, t)
                continue
            elif ek == _RTO:
                rto_armed[f] = False
                st = flows[f]
                if st.in_flight > 0:
                    deadline = st.last_progress + st.rto
                    if t >= deadline - 1e-12:
                        pending_loss[f] = []
                        quota = tcp_on_timeout(st, t)
                        send(f, st, quota, t)
                    else:
                        rto_armed[f] = True
                        heappush(heap, (deadline, hseq, _RTO, f, None))
                        hseq += 1
                continue
            else:
                st = flows[f]
                st.last_progress = t
                send(f, st, 1, t)
                continue

        # queue arrival of p
        f = p.flow_id
        outcome, victim = enqueue(p, t)
        if outcome is ADMITTED:
            if f == UDP_FLOW:
                adm_udp[w] += 1
            if in_service is None:
                p = pop_head()
                transmitted[p.flow_id] += 1
                if p.admit_index <= last_admit:
                    fifo_viol += 1
                last_admit = p.admit_index
                in_service = p
                next_dep = t + service
            elif q._len > max_backlog:
                max_backlog = q._len
        elif outcome is MATCHED:
            if f == UDP_FLOW:
                ch_udp[w] += 2
                vic_udp[w] += 1
            else:
                ch_tcp[w] += 2
                pending_loss[f].append(victim.seq)
                pending_loss[f].append(p.seq)
        elif outcome is RED:
            if f == UDP_FLOW:
                red_udp[w] += 1
            else:
                red_tcp[w] += 1
                pending_loss[f].append(p.seq)
        else:
            if f == UDP_FLOW:
                ov_udp[w] += 1
            else:
                ov_tcp[w] += 1
                pending_loss[f].append(p.seq)
        if log is not None:
            emit(t, "arrival", f, outcome.name.lower())

    residual = [0] * n_flows
    for p in q.live_packets():
        residual[p.flow_id] += 1
    return RunResult(
        scenario=s,
        seed=seed,
        counts={k: np.asarray(v, dtype=np.int32) for k, v in series.items()},
        b_end=np.asarray(b_end, dtype=np.int32),
        b0_end=np.asarray(b0_end, dtype=np.int32),
        sojourn_sum=np.asarray(soj_sum),
        counters=cnt.as_dict(),
        residual=residual,
        fifo_violations=fifo_viol,
        max_backlog=max_backlog,
        snapshots=snapshots,
        hist_udp=hist_udp,
        hist_total=hist_total,
        hist_samples=hist_samples,
        tcp_timeouts=sum(st.timeouts for st in flows[1:]),
        tcp_losses=sum(st.losses for st in flows[1:]),
        window_overshoots=inflight_excess,
    )


def _coarsen_sum(a: np.ndarray, k: int) -> np.ndarray:
    n = len(a) // k
    return a[: n * k].reshape(n, k).sum(axis=1)


def _coarsen_last(a: np.ndarray, k: int) -> np.ndarray:
    n = len(a) // k
    return a[: n * k].reshape(n, k)[:, -1]


@dataclass(eq=False)
class Trace:
    """Per-window series, averaged over replications.

    ``t`` holds window right edges.  ``mean`` and ``stderr`` map series
    names to arrays: utilizations ``mu0``/``mu_tcp`` (fractions of C),
    backlog ``b``/``b0``/``h0`` at window edges, rates in packets per second
    (``x0``, ``udp_admit``, ``udp_victim``, ``udp_red``, ``udp_choke``),
    and ``tcp_sojourn`` (mean seconds, NaN where no TCP packet left).
    """

    window: float
    t: np.ndarray
    mean: dict
    stderr: dict
    replications: int

    @classmethod
    def from_runs(cls, runs: list[RunResult], window: float | None = None) -> "Trace":
        if not runs:
            raise ValueError("need at least one run")
        base = runs[0].scenario.window
        k = 1 if window is None else int(round(window / base))
        if k < 1 or abs(k * base - (window or base)) > 1e-9 * k:
            raise ValueError("window must be a positive multiple of the scenario window")
        w = k * base
        C = runs[0].scenario.C
        per_run = [_series(r, k, w, C) for r in runs]
        names = per_run[0].keys()
        n = len(runs)
        mean, err = {}, {}
        for name in names:
            stack = np.vstack([pr[name] for pr in per_run])
            if name == "tcp_sojourn":
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    m = np.nanmean(stack, axis=0) if n > 1 else stack[0]
            else:
                m = stack.mean(axis=0)
            mean[name] = m
            err[name] = (stack.std(axis=0, ddof=1) / math.sqrt(n)) if n > 1 else np.zeros_like(m)
        t = (np.arange(len(mean["mu0"])) + 1) * w
        return cls(w, t, mean, err, n)

    def index_at(self, time: float) -> int:
        """Index of the window containing ``time``."""
        return int(math.floor(time / self.window + 1e-9))

    def derivative(self, name: str) -> np.ndarray:
        """Central-difference time derivative of an edge-sampled series."""
        return np.gradient(self.mean[name].astype(float), self.window)

    def rows(self, names=None):
        names = list(names or self.mean.keys())
        header = ["t"] + names + [f"{n}_stderr" for n in names]
        rows = []
        for i in range(len(self.t)):
            rows.append([self.t[i]] + [_finite(self.mean[n][i]) for n in names]
                        + [_finite(self.stderr[n][i]) for n in names])
        return header, rows


def _finite(v) -> float:
    v = float(v)
    return v if math.isfinite(v) else 0.0


def _series(r: RunResult, k: int, w: float, C: float) -> dict:
    c = {name: _coarsen_sum(v, k) for name, v in r.counts.items()}
    b = _coarsen_last(r.b_end, k).astype(float)
    b0 = _coarsen_last(r.b0_end, k).astype(float)
    soj = _coarsen_sum(r.sojourn_sum, k)
    with np.errstate(invalid="ignore", divide="ignore"):
        h0 = np.where(b > 0, b0 / np.maximum(b, 1), 0.0)
        sojourn = np.where(c["sojourn_n"] > 0, soj / np.maximum(c["sojourn_n"], 1), np.nan)
    return {
        "mu0": c["dep_udp"] / (C * w),
        "mu_tcp": c["dep_tcp"] / (C * w),
        "b": b,
        "b0": b0,
        "h0": h0,
        "x0": c["arr_udp"] / w,
        "udp_admit": c["admit_udp"] / w,
        "udp_victim": c["victim_udp"] / w,
        "udp_red": c["red_udp"] / w,
        "udp_choke": c["choke_udp"] / w,
        "tcp_red": c["red_tcp"] / w,
        "tcp_arrivals": c["arr_tcp"] / w,
        "tcp_sojourn": sojourn,
    }


def replication_seeds(s: Scenario, replications: int | None = None) -> list[int]:
    n = s.replications if replications is None else replications
    return [s.base_seed + i for i in range(n)]


def run_replications(s: Scenario, replications: int | None = None, jobs: int = 1,
                     window: float | None = None, keep_runs: bool = False, **run_kw):
    """Run every replication of ``s`` and average them on the window grid.

    Returns the aggregated :class:`Trace`, or ``(trace, runs)`` when
    ``keep_runs`` is set.  Extra keyword arguments go to :func:`run_single`.
    """
    seeds = replication_seeds(s, replications)

    def one(i, seed):
        try:
            return run_single(s, seed, **run_kw)
        except Exception as exc:  # re-raised with the run identity attached
            raise RunError(i, seed, exc) from exc

    if jobs == 1 or len(seeds) == 1:
        runs = [one(i, seed) for i, seed in enumerate(seeds)]
    else:
        from joblib import Parallel, delayed

        runs = Parallel(n_jobs=jobs)(delayed(one)(i, seed) for i, seed in enumerate(seeds))
    trace = Trace.from_runs(runs, window)
    return (trace, runs) if keep_runs else trace
