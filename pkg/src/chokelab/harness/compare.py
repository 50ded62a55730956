"""Model-versus-simulation comparisons built on replicated runs."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..analytic import (
    build_profile,
    derive_coefficients,
    extreme_utilization,
    rho0_of_tau,
    solve_steady_state,
    transient_utilization,
)
from ..errors import ScenarioError
from .runner import RunResult, Trace, run_replications
from .scenario import Scenario


@dataclass(eq=False)
class ResidualSeries:
    """Rate-conservation check for the UDP backlog, one value per window edge.

    ``residual = db0/dt - (x0 (1 - r_hat) (1 - 2 h0) - mu0 C)`` in packets
    per second.  ``steady`` marks edges at least ``settle`` seconds past
    the warm-up and past the last rate change.
    """

    t: np.ndarray
    x0: np.ndarray
    db0: np.ndarray
    db: np.ndarray
    db1: np.ndarray
    model_rate: np.ndarray
    residual: np.ndarray
    steady: np.ndarray

    def steady_stretches(self) -> list[slice]:
        """Contiguous runs of steady edges."""
        out, start = [], None
        for i, flag in enumerate(self.steady):
            if flag and start is None:
                start = i
            elif not flag and start is not None:
                out.append(slice(start, i))
                start = None
        if start is not None:
            out.append(slice(start, len(self.steady)))
        return out


def rate_conservation_residual(trace: Trace, s: Scenario, settle: float = 0.5,
                               window: float | None = None,
                               runs: list[RunResult] | None = None) -> ResidualSeries:
    """Per-window residual of the UDP backlog rate balance.

    Derivatives are central differences of the edge-sampled backlog.  The
    model rate uses window averages of the arrival rate and edge averages of
    ``h0``, then is averaged over the two windows the difference spans.  The
    RED drop fraction ``r_hat`` is counted per window.  Pass ``runs`` with a
    ``window`` to re-aggregate at a coarser derivative resolution.
    """
    if runs is not None and window is not None:
        trace = Trace.from_runs(runs, window)
    if len(trace.t) < 2:
        raise ValueError("need at least two windows")
    w = trace.window
    m = trace.mean
    db0 = np.gradient(m["b0"], w)
    db = np.gradient(m["b"], w)
    x0 = m["x0"]
    with np.errstate(invalid="ignore", divide="ignore"):
        r_hat = np.where(x0 > 0, m["udp_red"] / np.where(x0 > 0, x0, 1.0), 0.0)
    h0 = m["h0"]
    h0_mid = np.concatenate([h0[:1], (h0[1:] + h0[:-1]) / 2])
    rate = x0 * (1 - r_hat) * (1 - 2 * h0_mid) - m["mu0"] * s.C
    centred = np.concatenate([(rate[:-1] + rate[1:]) / 2, rate[-1:]])
    residual = db0 - centred

    t = trace.t
    last_change = np.full(len(t), 0.0)
    for when, _, _ in s.udp.changes():
        last_change[t >= when] = when
    steady = (t >= s.warmup + settle) & (t - last_change >= settle) & (t <= t[-1] - w)
    return ResidualSeries(t, x0, db0, db, db - db0, centred, residual, steady)


@dataclass(eq=False)
class ComparisonReport:
    """Transient utilization after a UDP rate change, model against simulation.

    The model curve covers ``[0, tau_b]``.  The simulated extreme is searched
    up to ``flush_horizon = b/C``, the latest time a packet queued before the
    change can still be in the buffer.
    """

    scenario: str
    change_times: list
    x0_old: float
    x0_new: float
    alpha: float
    b_snapshot: float
    tau_b: float
    flush_horizon: float
    window: float
    dT: np.ndarray
    model: np.ndarray
    sim_mean: np.ndarray
    sim_stderr: np.ndarray
    max_abs_error: float
    mean_abs_error: float
    model_extreme: float
    sim_extreme: float
    rho0_at_zero: float
    n_transients: int
    meta: dict = field(default_factory=dict)

    def summary(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if not isinstance(v, np.ndarray)}
        return d

    def to_json(self) -> str:
        d = self.summary()
        d["curve"] = {
            "dT": self.dT.tolist(),
            "model": self.model.tolist(),
            "sim_mean": self.sim_mean.tolist(),
            "sim_stderr": self.sim_stderr.tolist(),
        }
        return json.dumps(d, indent=2, sort_keys=True)

    def rows(self):
        """CSV rows; past ``tau_b`` the model column holds its extreme value."""
        header = ["dT", "model_mu0", "sim_mu0", "sim_stderr"]
        n = len(self.dT)
        model = np.concatenate([self.model, np.full(n - len(self.model), self.model_extreme)])
        return header, [[self.dT[i], model[i], self.sim_mean[i], self.sim_stderr[i]] for i in range(n)]


def _rates_at(s: Scenario, when: float) -> tuple[float, float]:
    for t, old, new in s.udp.changes():
        if abs(t - when) < 1e-9:
            return old, new
    raise ScenarioError(f"no UDP rate change at t={when}")


def transient_comparison(s: Scenario, change_time, runs: list[RunResult] | None = None,
                         replications: int | None = None, jobs: int = 1) -> ComparisonReport:
    """Compare the simulated utilization after ``change_time`` with the model.

    ``change_time`` may be a single time or several times sharing the same
    old and new rates; the latter pools every transient into one ensemble
    aligned on the change instant.  Runs are simulated when not supplied and
    must carry snapshots at each change time.
    """
    times = [float(change_time)] if np.isscalar(change_time) else [float(t) for t in change_time]
    if not times:
        raise ScenarioError("need at least one change time")
    old, new = _rates_at(s, times[0])
    for t in times:
        if not 0 < t < s.duration:
            raise ScenarioError(f"change time {t} outside the run [0, {s.duration})")
        if _rates_at(s, t) != (old, new):
            raise ScenarioError("pooled change times must share the same old and new rates")
    if old <= 0:
        raise ScenarioError("transient model needs a positive rate before the change")
    if runs is None:
        _, runs = run_replications(s, replications=replications, jobs=jobs, keep_runs=True,
                                   snapshot_times=times)

    C = s.C
    w = s.window
    b_snap = []
    for r in runs:
        for t in times:
            if t not in r.snapshots:
                raise ScenarioError(f"run with seed {r.seed} has no snapshot at t={t}")
            b_snap.append(r.snapshots[t].b)
    b = float(np.mean(b_snap))
    alpha = new / old
    ss = solve_steady_state(old)
    coeff = derive_coefficients(ss, max(b, 2.0), C)
    horizon = max(b, 2.0) / C

    n_model = int(math.floor(coeff.tau_b / w))
    n_sim = max(int(math.ceil(horizon / w)), n_model + 1)
    segments = []
    for r in runs:
        dep = r.counts["dep_udp"]
        for t in times:
            i0 = int(round(t / w))
            seg = dep[i0:i0 + n_sim]
            if len(seg) < n_sim:
                raise ScenarioError(f"run ends before the transient after t={t} completes")
            segments.append(seg / (C * w))
    stack = np.vstack(segments)
    n = len(stack)
    sim_mean = stack.mean(axis=0)
    sim_err = stack.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(n_sim)
    dT = (np.arange(n_sim) + 0.5) * w
    model = np.array([transient_utilization(coeff, new * C, d) for d in dT[:n_model]])
    if n_model:
        err = np.abs(sim_mean[:n_model] - model)
        max_err, mean_err = float(err.max()), float(err.mean())
    else:
        max_err = mean_err = 0.0
    if alpha < 1:
        sim_ext = float(sim_mean.max())
    elif alpha > 1:
        sim_ext = float(sim_mean.min())
    else:
        sim_ext = float(sim_mean.mean())
    return ComparisonReport(
        scenario=s.name,
        change_times=times,
        x0_old=old,
        x0_new=new,
        alpha=alpha,
        b_snapshot=b,
        tau_b=coeff.tau_b,
        flush_horizon=horizon,
        window=w,
        dT=dT,
        model=model,
        sim_mean=sim_mean,
        sim_stderr=sim_err,
        max_abs_error=max_err,
        mean_abs_error=mean_err,
        model_extreme=extreme_utilization(ss, coeff, alpha),
        sim_extreme=sim_ext,
        rho0_at_zero=rho0_of_tau(coeff, 0.0),
        n_transients=n,
        meta={"replications": len(runs), "seeds": [r.seed for r in runs]},
    )


@dataclass(eq=False)
class SpatialReport:
    """Time-averaged UDP occupancy by relative queue position (0 = tail)."""

    x0: float
    b_mean: float
    position: np.ndarray
    sim_rho: np.ndarray
    model_rho: np.ndarray
    l1: float
    samples: int

    def rows(self):
        return ["position", "sim_rho0", "model_rho0"], [
            [self.position[i], self.sim_rho[i], self.model_rho[i]] for i in range(len(self.position))
        ]


def spatial_comparison(s: Scenario, sample_times, runs: list[RunResult] | None = None,
                       replications: int | None = None, bins: int = 20,
                       jobs: int = 1) -> SpatialReport:
    """Compare the binned positional UDP histogram with the analytic profile.

    ``l1`` is the mean absolute difference per bin.
    """
    rates = {s.udp.rate_at(t) for t in sample_times}
    if len(rates) != 1:
        raise ScenarioError("spatial comparison needs a constant UDP rate over the sample times")
    x0 = rates.pop()
    if runs is None:
        _, runs = run_replications(s, replications=replications, jobs=jobs, keep_runs=True,
                                   hist_times=list(sample_times), hist_bins=bins)
    udp = sum(r.hist_udp for r in runs)
    total = sum(r.hist_total for r in runs)
    samples = sum(r.hist_samples for r in runs)
    if len(udp) != bins:
        raise ScenarioError(f"runs were recorded with {len(udp)} bins, not {bins}")
    sim = np.where(total > 0, udp / np.maximum(total, 1), 0.0)
    b_mean = float(total.sum() / samples) if samples else 0.0
    position = (np.arange(bins) + 0.5) / bins
    if x0 == 0 or b_mean < 2:
        model = np.zeros(bins)
    else:
        prof = build_profile(solve_steady_state(x0), b_mean, s.C, n_samples=401)
        model = np.array([prof.rho0_at(p * b_mean) for p in position])
    return SpatialReport(x0, b_mean, position, sim, model, float(np.mean(np.abs(sim - model))), samples)


def steady_summary(trace: Trace, start: float, end: float, C: float) -> dict:
    """Means over ``[start, end)`` plus the Little's-law TCP delay prediction."""
    i0, i1 = trace.index_at(start), trace.index_at(end)
    m = trace.mean
    mu0 = float(m["mu0"][i0:i1].mean())
    h0 = float(m["h0"][i0:i1].mean())
    b = float(m["b"][i0:i1].mean())
    soj = m["tcp_sojourn"][i0:i1]
    soj = float(np.nanmean(soj)) if np.isfinite(soj).any() else float("nan")
    little = b * (1 - h0) / (C * (1 - mu0)) if mu0 < 1 else float("nan")
    return {"mu0": mu0, "h0": h0, "b": b, "mu_tcp": float(m["mu_tcp"][i0:i1].mean()),
            "tcp_sojourn": soj, "little_delay": little}
