"""UDP utilization in the transient regime after a step change in UDP rate.

At ``t = 0`` the UDP arrival rate steps from ``x0`` to ``x02 = alpha * x0``.
The fluid already queued keeps the spatial profile of the old equilibrium but
is thinned at the new rate for the rest of its stay, so for
``dT in [0, tau_b]``::

    mu0(dT) = 1 / (1 + a * z ** (1 + (alpha - 1) * dT / tau_b))

where ``z = (1 - mu0) / (a mu0)`` is the tail-to-head thinning factor of the
old equilibrium.  This is the time-domain form with the thinning exponent
pinned so that ``mu0(0) = mu0`` holds exactly.  The extreme is reached at
``dT = tau_b``.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DegenerateEquilibriumError, DomainError
from .spatial import DerivedCoefficients, _logistic_of_log
from .steady import SteadyStatePoint

_EDGE = 1e-12


def transient_utilization(coeff: DerivedCoefficients, x02: float, dT: float) -> float:
    """UDP link utilization ``dT`` seconds after the rate steps to ``x02`` pkt/s."""
    if x02 < 0:
        raise DomainError(f"x02 must be >= 0, got {x02}")
    if not -_EDGE * max(coeff.tau_b, 1.0) <= dT <= coeff.tau_b * (1 + _EDGE):
        raise DomainError(f"dT={dT} outside [0, tau_b={coeff.tau_b}]")
    if coeff.degenerate:
        return 0.0
    alpha = x02 / coeff.x0
    frac = min(max(dT / coeff.tau_b, 0.0), 1.0) if coeff.tau_b > 0 else 1.0
    exponent = coeff.thinning_exponent * (1.0 + (alpha - 1.0) * frac)
    return _logistic_of_log(math.log(coeff.a) + exponent)


def transient_curve(coeff: DerivedCoefficients, alpha: float, n: int = 101) -> tuple[np.ndarray, np.ndarray]:
    """``(dT, mu0(dT))`` on ``n`` evenly spaced points of ``[0, tau_b]``."""
    dT = np.linspace(0.0, coeff.tau_b, n)
    mu = np.array([transient_utilization(coeff, alpha * coeff.x0, t) for t in dT])
    return dT, mu


def extreme_utilization(ss: SteadyStatePoint, coeff: DerivedCoefficients | None = None,
                        alpha: float = 0.0) -> float:
    """Lowest (alpha > 1) or highest (alpha < 1) transient UDP utilization.

    ``coeff`` is accepted for symmetry with the other transient helpers; the
    extreme does not depend on the backlog.
    """
    if alpha < 0:
        raise DomainError(f"alpha must be >= 0, got {alpha}")
    if ss.x0_norm == 0:
        return 0.0
    a = (1.0 - ss.mu0) / (ss.x0_norm * (1.0 - ss.r) * (1.0 - ss.h0))
    if alpha == 0:
        return 1.0 / (1.0 + a)
    if ss.mu0 <= 0:
        raise DegenerateEquilibriumError("mu0 = 0 leaves the thinning ratio undefined")
    log_ratio = math.log((1.0 - ss.mu0) / (a * ss.mu0))
    return _logistic_of_log(math.log(a) + alpha * log_ratio)
