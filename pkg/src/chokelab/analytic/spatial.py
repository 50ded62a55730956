"""Spatial distribution of UDP packets along a CHOKe queue at equilibrium.

Positions ``y`` run from the tail (``y = 0``) to the head (``y = b``).  UDP
fluid entering at the tail is thinned by every later arrival that matches it,
so the UDP probability ``rho0(y)`` falls from ``1/(1+a)`` at the tail to
``mu0`` at the head while TCP velocity stays constant at ``(1-mu0) C``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, InvalidBacklogError
from .steady import SteadyStatePoint

# relative slack on interval endpoints, absorbs rounding in callers' grids
_EDGE = 1e-12

#: UDP probability at the inflection point of rho0(y).
RHO0_CRITICAL = 1.0 / 3.0


@dataclass(frozen=True)
class DerivedCoefficients:
    """Per-equilibrium constants used by the spatial and transient formulas.

    ``beta`` is the exact ``ln(1 - 1/b)``.  ``thinning_exponent`` is the log
    of ``(1-mu0)/(a mu0)``: the total log-thinning between tail and head,
    which pins ``rho0`` to ``mu0`` after one full queueing delay ``tau_b``.
    With the exact ``beta`` it differs from ``-x0 (1-r) beta tau_b`` by a
    relative ``O(1/b)``; time-domain formulas use the pinned value.
    """

    b: float
    capacity_C: float
    x0: float
    r: float
    mu0: float
    h0: float
    beta: float
    a: float
    K: float
    tau_b: float
    rho0_tail: float
    v_tail: float
    thinning_exponent: float

    @property
    def x0_norm(self) -> float:
        return self.x0 / self.capacity_C

    @property
    def thinning_rate(self) -> float:
        """Log-thinning per second of queueing (negative)."""
        if self.tau_b == 0:
            return 0.0
        return -self.thinning_exponent / self.tau_b

    @property
    def degenerate(self) -> bool:
        return self.x0 == 0.0


def derive_coefficients(ss: SteadyStatePoint, b: float, C: float) -> DerivedCoefficients:
    if not b >= 2:
        raise InvalidBacklogError(f"backlog b must be >= 2, got {b}")
    if not C > 0:
        raise DomainError(f"capacity C must be positive, got {C}")
    x0 = ss.x0_norm * C
    beta = math.log1p(-1.0 / b)
    tau_b = b * (1.0 - ss.h0) / (C * (1.0 - ss.mu0))
    v_tail = x0 * (1.0 - ss.h0) * (1.0 - ss.r) + (1.0 - ss.mu0) * C
    K = x0 * (1.0 - ss.r) * beta / ((1.0 - ss.mu0) * C)
    if ss.x0_norm == 0:
        return DerivedCoefficients(b, C, 0.0, ss.r, 0.0, 0.0, beta, math.inf, 0.0,
                                   tau_b, 0.0, v_tail, 0.0)
    a = (1.0 - ss.mu0) / (ss.x0_norm * (1.0 - ss.r) * (1.0 - ss.h0))
    rho0_tail = 1.0 / (1.0 + a)
    if ss.mu0 > 0:
        theta = math.log((1.0 - ss.mu0) / (a * ss.mu0))
    else:
        theta = math.inf
    return DerivedCoefficients(b, C, x0, ss.r, ss.mu0, ss.h0, beta, a, K, tau_b,
                               rho0_tail, v_tail, theta)


def _logistic_of_log(s: float) -> float:
    """1 / (1 + exp(s)) without overflow."""
    if s > 0:
        e = math.exp(-s)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(s))


def rho0_of_tau(coeff: DerivedCoefficients, tau: float) -> float:
    """UDP probability at the slot reached after queueing for ``tau`` seconds."""
    if not -_EDGE * max(coeff.tau_b, 1.0) <= tau <= coeff.tau_b * (1 + _EDGE):
        raise DomainError(f"tau={tau} outside [0, {coeff.tau_b}]")
    if coeff.degenerate:
        return 0.0
    if coeff.tau_b == 0 or tau <= 0:
        return coeff.rho0_tail
    return _logistic_of_log(math.log(coeff.a) + coeff.thinning_exponent * tau / coeff.tau_b)


def y_of_rho0(coeff: DerivedCoefficients, rho0: float) -> float:
    """Queue position at which the UDP probability equals ``rho0``."""
    if coeff.degenerate:
        raise DomainError("position is not a function of rho0 when x0 = 0")
    if rho0 >= 1.0:
        raise DomainError("rho0 = 1 is a singularity of the position formula")
    lo, hi = coeff.mu0, coeff.rho0_tail
    if not lo - _EDGE <= rho0 <= hi + _EDGE:
        raise DomainError(f"rho0={rho0} outside [{lo}, {hi}]")
    if rho0 <= 0:
        raise DomainError("rho0 must be positive")
    rt = coeff.rho0_tail
    return (math.log(coeff.a * rho0 / (1.0 - rho0))
            + (rho0 - rt) / ((1.0 - rho0) * (1.0 - rt))) / coeff.K


def critical_point(coeff: DerivedCoefficients) -> tuple[float, float] | None:
    """Inflection ``(y*, 1/3)`` of rho0(y), or None when rho0 never reaches 1/3.

    The inflection lies in the queue iff ``rho0_tail >= 1/3``, i.e. ``a <= 2``.
    With ``r = 0`` that is ``x0/C >= 0.5346``; see :func:`critical_rate`.
    """
    if coeff.degenerate or coeff.rho0_tail < RHO0_CRITICAL:
        return None
    rt = coeff.rho0_tail
    y_star = (math.log(coeff.a / 2.0) + (1.0 - 3.0 * rt) / (2.0 * (1.0 - rt))) / coeff.K
    return y_star, RHO0_CRITICAL


def critical_rate(r: float = 0.0) -> float:
    """Smallest ``x0/C`` whose profile has an inflection point (``a = 2``)."""
    u = 0.5
    e = math.exp(-u)
    return u * (2.0 - e) / (1.0 + u * e) / (1.0 - r)


@dataclass(frozen=True)
class SpatialSample:
    y: float
    rho0: float
    v: float
    tau: float


@dataclass(frozen=True, eq=False)
class SpatialProfile:
    steady: SteadyStatePoint
    coeff: DerivedCoefficients
    y: np.ndarray
    rho0: np.ndarray
    v: np.ndarray
    tau: np.ndarray
    critical: tuple[float, float] | None = None
    closure_error: float = 0.0

    @property
    def samples(self) -> list[SpatialSample]:
        return [SpatialSample(*row) for row in zip(self.y.tolist(), self.rho0.tolist(),
                                                   self.v.tolist(), self.tau.tolist())]

    def __len__(self):
        return len(self.y)

    def rho0_at(self, y) -> np.ndarray:
        """Monotone interpolation of rho0 at arbitrary positions."""
        return np.interp(y, self.y, self.rho0)


def build_profile(ss: SteadyStatePoint, b: float, C: float, n_samples: int = 201) -> SpatialProfile:
    """Sample (y, rho0, v, tau) along the queue on a uniform grid in rho0.

    ``closure_error`` is ``y(mu0)/b - 1``, the mismatch between the position
    formula and the backlog it was built for.
    """
    if n_samples < 3:
        raise ValueError("n_samples must be >= 3")
    coeff = derive_coefficients(ss, b, C)
    if coeff.degenerate:
        y = np.linspace(0.0, b, n_samples)
        return SpatialProfile(ss, coeff, y, np.zeros(n_samples), np.full(n_samples, float(C)),
                              y / C, None, 0.0)

    rho = np.linspace(coeff.rho0_tail, coeff.mu0, n_samples)
    rt = coeff.rho0_tail
    logit = np.log(coeff.a * rho / (1.0 - rho))
    y = (logit + (rho - rt) / ((1.0 - rho) * (1.0 - rt))) / coeff.K
    y[0] = 0.0
    v = (1.0 - coeff.mu0) * C / (1.0 - rho)
    tau = logit / (coeff.x0 * (1.0 - coeff.r) * coeff.beta)
    tau[0] = 0.0
    return SpatialProfile(ss, coeff, y, rho, v, tau, critical_point(coeff), float(y[-1] / b - 1.0))


@dataclass(frozen=True, eq=False)
class ProfileDerivatives:
    y: np.ndarray
    rho0_d1: np.ndarray
    rho0_d2: np.ndarray
    v_d1: np.ndarray
    v_d2: np.ndarray
    tau_d1: np.ndarray
    tau_d2: np.ndarray

    def rows(self):
        return list(zip(*(getattr(self, f).tolist() for f in
                          ("y", "rho0_d1", "rho0_d2", "v_d1", "v_d2", "tau_d1", "tau_d2"))))


def profile_derivatives(profile: SpatialProfile) -> ProfileDerivatives:
    """First and second derivatives in ``y`` of rho0, v and tau at every sample."""
    c = profile.coeff
    rho, v = profile.rho0, profile.v
    k = c.x0 * (1.0 - c.r) * c.beta
    rho_d1 = k * (rho - rho * rho) / v
    rho_d2 = k * k * rho * (1.0 - rho) * (1.0 - 3.0 * rho) / (v * v)
    v_d1 = k * rho
    v_d2 = k * k * rho * (1.0 - rho) / v
    tau_d1 = 1.0 / v
    tau_d2 = -k * rho / (v * v)
    return ProfileDerivatives(profile.y.copy(), rho_d1, rho_d2, v_d1, v_d2, tau_d1, tau_d2)
