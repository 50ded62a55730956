import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chokelab.analytic import (
    MU0_LIMIT,
    SteadyInput,
    SteadyStatePoint,
    loss_model_residual,
    solve_steady_state,
    steady_consistency_residual,
    sweep,
)
from chokelab.analytic.steady import log_grid
from chokelab.errors import SolverError

from .oracles import olm_by_h0


def test_two_c_reads_quarter_utilization():
    ss = solve_steady_state(SteadyInput(2.0, 0.0))
    assert ss.mu0 == pytest.approx(0.250, abs=1e-3)
    # mu0 = 0.25 substituted into x0 (1 - 2 h0) = mu0
    assert ss.h0 == pytest.approx(0.4375, abs=1e-3)


def test_three_c():
    assert solve_steady_state(3.0).mu0 == pytest.approx(0.21, abs=5e-3)


def test_no_udp_is_origin():
    ss = solve_steady_state(SteadyInput(0.0))
    assert (ss.mu0, ss.h0) == (0.0, 0.0)


@pytest.mark.parametrize("x0", [0.01, 0.1, 0.25, 0.5, 1, 2, 3, 5, 10, 20])
def test_matches_brent_in_h0(x0):
    ss = solve_steady_state(x0)
    mu, h = olm_by_h0(x0)
    assert ss.mu0 == pytest.approx(mu, rel=1e-9, abs=1e-13)
    assert ss.h0 == pytest.approx(h, rel=1e-9)


@pytest.mark.parametrize("r", [0.0, 0.05, 0.3])
def test_ambient_drop_scales_input(r):
    ss = solve_steady_state(SteadyInput(1.5, r))
    mu, h = olm_by_h0(1.5, r)
    assert ss.mu0 == pytest.approx(mu, rel=1e-9)
    assert steady_consistency_residual(ss) < 1e-10


def test_residual_definition():
    assert steady_consistency_residual(SteadyStatePoint(2.0, 0.0, 0.25, 0.4375)) == 0.0
    assert steady_consistency_residual(SteadyStatePoint(2.0, 0.0, 0.25, 0.4475)) > 0


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        SteadyInput(-1.0)
    with pytest.raises(ValueError):
        SteadyInput(1.0, 1.0)
    with pytest.raises(ValueError):
        solve_steady_state(1.0, tol=0)


def test_solver_failure_carries_residual(monkeypatch):
    import chokelab.analytic.steady as steady

    monkeypatch.setattr(steady, "MAX_ITER", 2)
    with pytest.raises(SolverError) as exc:
        steady.solve_steady_state(2.0)
    assert exc.value.residual > 0


SWEEP = [0.1, 0.25, 0.5, 1, 2, 3, 5, 10, 25, 50, 100]


def test_sweep_limits_and_monotone_share():
    pts = sweep(SWEEP)
    for p in pts:
        assert p.mu0 <= MU0_LIMIT + 1e-6
        assert p.h0 < 0.5 or p.x0_norm >= 50  # h0 rounds to 0.5 in double precision
        assert 1 <= (1 - p.mu0) / (1 - p.h0) <= 2
    h = [p.h0 for p in pts]
    assert all(b >= a for a, b in zip(h, h[1:]))


def test_large_rate_stays_accurate():
    # 1 - 2 h0 is ~1e-22 here; the residual must still be tiny
    ss = solve_steady_state(100.0)
    assert ss.h0 >= 0.49
    assert 0 < ss.mu0 < 1e-15
    assert steady_consistency_residual(ss) < 1e-10
    assert loss_model_residual(ss) < 1e-12


def test_peak_is_one_over_e_plus_one():
    mus = [p.mu0 for p in sweep(log_grid(0.05, 100, 2000))]
    assert max(mus) == pytest.approx(1 / (math.e + 1), abs=1e-5)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-4, 200), st.floats(0, 0.9))
def test_solution_satisfies_both_relations(x0, r):
    ss = solve_steady_state(SteadyInput(x0, r))
    assert steady_consistency_residual(ss) < 1e-10
    assert loss_model_residual(ss) < 1e-12
    assert 0 <= ss.mu0 <= MU0_LIMIT + 1e-12
    ratio = (1 - ss.mu0) / (1 - ss.h0)
    assert 1 - 1e-12 <= ratio <= 2 + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 50), st.floats(1e-3, 50))
def test_buffer_share_monotone(x1, x2):
    lo, hi = sorted((x1, x2))
    assert solve_steady_state(lo).h0 <= solve_steady_state(hi).h0 + 1e-15


def test_log_grid_endpoints():
    g = log_grid(0.05, 100, 200)
    assert len(g) == 200 and g[0] == pytest.approx(0.05) and g[-1] == pytest.approx(100)
    assert np.all(np.diff(g) > 0)
