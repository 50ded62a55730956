"""Steady-state equilibrium of a CHOKe queue shared by one UDP flow and many TCP flows.

The overall loss model ties UDP link utilization ``mu0`` and UDP buffer share
``h0`` to the normalized UDP arrival rate ``x0/C``::

    mu0 = ln z / (z + ln z),        z = (1 - h0) / (1 - 2 h0)
    x0 (1 - r) / C = mu0 / (1 - 2 h0)

Both unknowns are functions of ``u = ln z`` alone, which is how the solver
parameterizes the problem.  Solving in ``u`` rather than ``h0`` keeps
``1 - 2 h0 = e^-u / (2 - e^-u)`` representable when ``h0`` is within 1e-20
of one half (``x0`` of a few tens of ``C`` and beyond).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import SolverError

DEFAULT_TOL = 1e-10
MAX_ITER = 200

#: Upper bound on steady-state UDP utilization, 1/(e+1).
MU0_LIMIT = 1.0 / (math.e + 1.0)


@dataclass(frozen=True)
class SteadyInput:
    x0_norm: float
    r: float = 0.0

    def __post_init__(self):
        if not (self.x0_norm >= 0 and math.isfinite(self.x0_norm)):
            raise ValueError(f"x0_norm must be finite and >= 0, got {self.x0_norm}")
        if not 0 <= self.r < 1:
            raise ValueError(f"r must lie in [0, 1), got {self.r}")


@dataclass(frozen=True)
class SteadyStatePoint:
    """Solved equilibrium.

    ``log_ratio`` is ``ln((1-h0)/(1-2h0))``; it equals ``1/a`` and is also the
    total log-thinning a UDP packet accumulates between tail and head.
    """

    x0_norm: float
    r: float
    mu0: float
    h0: float
    log_ratio: float = 0.0

    @property
    def one_minus_2h0(self) -> float:
        if self.log_ratio > 0:
            e = math.exp(-self.log_ratio)
            return e / (2.0 - e)
        return 1.0 - 2.0 * self.h0


def _from_log_ratio(u: float) -> tuple[float, float]:
    e = math.exp(-u)
    mu0 = u * e / (1.0 + u * e)
    h0 = (1.0 - e) / (2.0 - e)
    return mu0, h0


def _rate_of_log_ratio(u: float) -> float:
    # x0 (1 - r) / C as a function of u; increasing from 0 at u=0
    e = math.exp(-u)
    return u * (2.0 - e) / (1.0 + u * e)


def mu0_of_h0(h0: float) -> float:
    """UDP utilization implied by a buffer share, from the utilization balance."""
    if h0 <= 0:
        return 0.0
    z = (1.0 - h0) / (1.0 - 2.0 * h0)
    lz = math.log(z)
    return lz / (z + lz)


def solve_steady_state(inp: SteadyInput | float, tol: float = DEFAULT_TOL, r: float = 0.0) -> SteadyStatePoint:
    """Solve the utilization and buffer-share balances for ``(mu0, h0)`` by bisection.

    ``inp`` may be a :class:`SteadyInput` or a bare normalized rate, in which
    case ``r`` is taken from the keyword.
    """
    if not isinstance(inp, SteadyInput):
        inp = SteadyInput(float(inp), r)
    if tol <= 0:
        raise ValueError("tol must be positive")
    target = inp.x0_norm * (1.0 - inp.r)
    if target == 0.0:
        return SteadyStatePoint(inp.x0_norm, inp.r, 0.0, 0.0, 0.0)

    # f(u) = rate(u) - target is increasing; rate(target) > target for target > 0
    lo, hi = 0.0, max(target, 1e-300)
    while _rate_of_log_ratio(hi) < target:
        hi *= 2.0
    u = hi
    for _ in range(MAX_ITER):
        u = 0.5 * (lo + hi)
        f = _rate_of_log_ratio(u) - target
        if f == 0.0 or hi - lo <= 4 * np.finfo(float).eps * u:
            break
        if f < 0:
            lo = u
        else:
            hi = u
    mu0, h0 = _from_log_ratio(u)
    point = SteadyStatePoint(inp.x0_norm, inp.r, mu0, h0, u)
    res = steady_consistency_residual(point)
    if not res < tol:
        raise SolverError(f"steady-state solve for x0/C={inp.x0_norm} did not converge", res)
    return point


def steady_consistency_residual(ss: SteadyStatePoint) -> float:
    """|x0/C (1-r)(1-2h0) - mu0|, zero at an exact equilibrium."""
    return abs(ss.x0_norm * (1.0 - ss.r) * ss.one_minus_2h0 - ss.mu0)


def loss_model_residual(ss: SteadyStatePoint) -> float:
    """Residual of the utilization/buffer-share relation ``mu0 = ln z/(z + ln z)``."""
    if ss.log_ratio > 0:
        return abs(ss.mu0 - _from_log_ratio(ss.log_ratio)[0])
    return abs(ss.mu0 - mu0_of_h0(ss.h0))


def sweep(x0_norms, r: float = 0.0, tol: float = DEFAULT_TOL) -> list[SteadyStatePoint]:
    return [solve_steady_state(SteadyInput(float(x), r), tol) for x in x0_norms]


def log_grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), n)
