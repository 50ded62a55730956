import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chokelab.analytic import (
    derive_coefficients,
    extreme_utilization,
    rho0_of_tau,
    solve_steady_state,
    transient_curve,
    transient_to_csv,
    transient_utilization,
)
from chokelab.analytic.steady import SteadyStatePoint
from chokelab.errors import DegenerateEquilibriumError, DomainError

C = 2500.0


def setup(x0, b=1000):
    ss = solve_steady_state(x0)
    return ss, derive_coefficients(ss, b, C)


@pytest.mark.parametrize("x02", [0.0, 0.3, 2.0, 50.0])
def test_starts_at_old_equilibrium(x02):
    ss, c = setup(2.0)
    assert transient_utilization(c, x02 * C, 0.0) == pytest.approx(ss.mu0, abs=1e-9)


@pytest.mark.parametrize("dT_frac", [0.0, 0.3, 1.0])
def test_no_change_is_flat(dT_frac):
    ss, c = setup(3.0)
    assert transient_utilization(c, c.x0, dT_frac * c.tau_b) == pytest.approx(ss.mu0, abs=1e-9)


def test_flow_stop_reaches_tail_probability():
    ss, c = setup(2.0)
    assert transient_utilization(c, 0.0, c.tau_b) == pytest.approx(c.rho0_tail, abs=1e-12)


def test_flow_stop_replays_profile_in_reverse():
    # with x02 = 0 the utilization at dT is the steady rho0 at delay tau_b - dT
    _, c = setup(3.0)
    for f in np.linspace(0, 1, 11):
        dT = f * c.tau_b
        assert transient_utilization(c, 0.0, dT) == pytest.approx(rho0_of_tau(c, c.tau_b - dT), abs=1e-12)


def test_domain_errors():
    _, c = setup(1.0)
    with pytest.raises(DomainError):
        transient_utilization(c, C, -1e-3)
    with pytest.raises(DomainError):
        transient_utilization(c, C, 1.1 * c.tau_b)
    with pytest.raises(DomainError):
        transient_utilization(c, -1.0, 0.0)
    with pytest.raises(DomainError):
        extreme_utilization(solve_steady_state(1.0), c, -0.5)


@pytest.mark.parametrize("x0,alpha,expected,tol", [
    (2.0, 0.1, 0.565, 0.005),   # reported as 56.5%; exact value is 0.5638
    (3.0, 1 / 12, 0.632, 0.001),
    (0.25, 12, 0.013, 0.001),
])
def test_reported_extremes(x0, alpha, expected, tol):
    ss, c = setup(x0)
    assert extreme_utilization(ss, c, alpha) == pytest.approx(expected, abs=tol)


@pytest.mark.parametrize("x0", [0.25, 1.0, 3.0])
def test_alpha_one_returns_mu0(x0):
    ss, c = setup(x0)
    assert extreme_utilization(ss, c, 1.0) == pytest.approx(ss.mu0, rel=1e-12)


def test_degenerate_inputs():
    ss, c = setup(0.0)
    assert extreme_utilization(ss, c, 3.0) == 0.0
    assert transient_utilization(c, C, 0.5 * c.tau_b) == 0.0
    bad = SteadyStatePoint(1.0, 0.0, 0.0, 0.1)
    with pytest.raises(DegenerateEquilibriumError):
        extreme_utilization(bad, None, 2.0)
    assert extreme_utilization(bad, None, 0.0) == pytest.approx(1 / (1 + 1 / 0.9))


@pytest.mark.parametrize("alpha", [0, 0.1, 0.5, 1, 2, 10])
@pytest.mark.parametrize("x0", [0.25, 1.0, 3.0])
def test_endpoint_equals_extreme(alpha, x0):
    ss, c = setup(x0)
    assert abs(transient_utilization(c, alpha * c.x0, c.tau_b) - extreme_utilization(ss, c, alpha)) <= 1e-12


@pytest.mark.parametrize("alpha", [0.0, 0.2, 0.9, 1.1, 4.0, 12.0])
def test_direction_follows_rate_change(alpha):
    _, c = setup(1.0)
    _, mu = transient_curve(c, alpha, 100)
    d = np.diff(mu)
    if alpha > 1:
        assert np.all(d <= 0)
    else:
        assert np.all(d >= 0)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.01, 30), st.floats(0, 50), st.floats(0, 1), st.integers(10, 5000))
def test_bounded_by_tail_probability(x0, alpha, frac, b):
    _, c = setup(x0, b)
    mu = transient_utilization(c, alpha * c.x0, frac * c.tau_b)
    assert 0 <= mu <= c.rho0_tail + 1e-12


def test_curve_csv():
    import io

    _, c = setup(2.0)
    dT, mu = transient_curve(c, 0.25, 11)
    buf = io.StringIO()
    transient_to_csv(dT, mu, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "dT,mu0" and len(lines) == 12
    assert float(lines[-1].split(",")[0]) == pytest.approx(c.tau_b)
