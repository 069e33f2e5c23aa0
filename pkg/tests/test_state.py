import numpy as np
import pytest

from sdgrav import fixtures as fx
from sdgrav.calculus import ONE, Grid3, GridMismatch
from sdgrav.state import (
    Background,
    DegenerateState,
    FieldState,
    coefficients,
    flow_rhs,
    fluctuation_rhs,
    nondegeneracy_check,
)


@pytest.mark.parametrize("eps", [1, -1])
def test_solution_background_identity(eps, g8):
    s = fx.qs(g8) if eps == 1 else fx.qs_minus(g8)
    assert s.background.is_solution(eps)
    co = coefficients(s)
    # Q a - b² - c² = ε holds pointwise by construction
    lhs = (co.Q * co.a - co.b * co.b - co.c * co.c).values()
    assert np.max(np.abs(lhs - eps)) < 1e-14


def test_background_packing_roundtrip():
    bg = Background.solution(1, 2.0, amplitude=0.3, wavenumber=2.0, sign=1.0)
    assert Background.from_packed(bg.packed()) == bg


def test_background_rejects_bad_sign():
    with pytest.raises(ValueError):
        Background(sign=0.5)


def test_state_validation(g8):
    z = np.zeros(g8.shape)
    with pytest.raises(ValueError):
        FieldState(g8, 0.0, 2, z, z, fx.qs_background())
    with pytest.raises(GridMismatch):
        FieldState(g8, 0.0, 1, np.zeros((4, 4, 4)), z, fx.qs_background())
    bad = z.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        FieldState(g8, 0.0, 1, bad, z, fx.qs_background())


def test_state_arrays_are_read_only(rand16):
    with pytest.raises(ValueError):
        rand16.u_fluct[0, 0, 0] = 1.0


def test_qs_is_stationary(g8):
    s = fx.qs(g8, t=0.7)
    f = flow_rhs(s)
    # v_t = Q - u_xx = 1 - 1/2 on QS: the background t²/4 accelerates at 1/2
    assert np.max(np.abs(f.second.values() - 0.5)) < 1e-14
    du, dv = fluctuation_rhs(s)
    assert np.max(np.abs(du)) == 0 and np.max(np.abs(dv)) == 0


def test_fluctuation_rhs_matches_full_rhs(rand16):
    """The perturbation form equals the full right-hand side minus the
    background's own second time derivative."""
    s = rand16
    du, dv = fluctuation_rhs(s)
    full = flow_rhs(s)
    bg_tt = s.background.time_derivative(s.grid, s.t, 2)
    assert set(full.second.terms) == {ONE}
    assert np.max(np.abs(full.second.coefficient(ONE) - bg_tt - dv)) < 1e-13
    assert np.array_equal(du, s.v_fluct)


def test_fluctuation_rhs_needs_solution_background(g8):
    s = FieldState.background_only(g8, 0.0, 1, Background(1.0, 1.0, 1.0, 2.0))
    with pytest.raises(ValueError, match="not a solution"):
        fluctuation_rhs(s)


def test_degenerate_state_raises(g8):
    Y = np.broadcast_to(g8.mesh(1), g8.shape)
    # a = 1 + Δu_f = 1 - cos y vanishes on the y = 0 plane
    u = np.cos(Y)
    s = FieldState(g8, 0.0, 1, u, np.zeros(g8.shape), fx.qs_background())
    rep = nondegeneracy_check(s)
    assert not rep.ok and rep.min_abs_a < 0.1
    with pytest.raises(DegenerateState):
        coefficients(s)
    with pytest.raises(DegenerateState):
        fluctuation_rhs(s)


def test_fixture_amplitudes_grid_independent():
    a = fx.rand(Grid3.cube(16), 4)
    b = fx.rand(Grid3.cube(32), 4)
    assert np.max(np.abs(a.u_fluct - b.u_fluct[::2, ::2, ::2])) < 1e-15


def test_fixture_lookup(g8):
    for name in fx.FIXTURES:
        s = fx.by_name(name, g8)
        assert s.grid == g8
    with pytest.raises(KeyError):
        fx.by_name("nope", g8)
