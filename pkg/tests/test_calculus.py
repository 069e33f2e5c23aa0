import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdgrav.calculus import (
    ONE,
    D,
    DegreeError,
    Grid3,
    GridMismatch,
    PolyField,
    UnsupportedShape,
    derivative,
    fd_derivative,
    integrate_box,
    inner_product,
    inv_laplacian_yz,
    laplacian_yz,
    project_mean,
    resample,
)


def per(grid, arr):
    return PolyField.periodic(grid, np.broadcast_to(arr, grid.shape))


def trig(grid, kx, ky, kz, phase=0.0):
    X, Y, Z = (grid.mesh(i) for i in range(3))
    return np.cos(kx * X + ky * Y + kz * Z + phase)


@given(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3), st.floats(0, 6.28))
@settings(max_examples=25, deadline=None)
def test_spectral_derivative_exact_on_resolved_modes(kx, ky, kz, phase):
    g = Grid3.cube(8)
    X, Y, Z = (g.mesh(i) for i in range(3))
    f = per(g, trig(g, kx, ky, kz, phase))
    exact = -kx * np.sin(kx * X + ky * Y + kz * Z + phase)
    assert np.max(np.abs(derivative(f, "x").values() - exact)) < 1e-12


def test_nyquist_mode_is_dropped(g8):
    X = g8.mesh(0)
    f = per(g8, np.cos(4 * X))
    assert derivative(f, "x").max_abs() < 1e-14


def test_product_rule_on_monomials(g8):
    X, Y = g8.mesh(0), g8.mesh(1)
    w = np.sin(Y)
    x = PolyField.coord(g8, "x")
    f = x * x * per(g8, w)
    d = derivative(f, "x")
    assert np.allclose(d.coefficient((1, 0, 0)), 2 * w)
    mixed = D(f, "x", "y")
    expected = 2 * X * np.cos(Y)
    assert np.max(np.abs(mixed.values() - expected)) < 1e-11


def test_degree_cap_enforced(g8):
    x = PolyField.coord(g8, "x")
    with pytest.raises(DegreeError):
        x * x * x * x * x


def test_grid_mismatch(g8):
    with pytest.raises(GridMismatch):
        PolyField.periodic(g8, np.zeros((4, 4, 4)))


def test_inverse_laplacian_periodic_and_projected(g16, rng):
    v = np.zeros(g16.shape)
    for _ in range(4):
        ky, kz = rng.integers(-3, 4, 2)
        v += rng.standard_normal() * trig(g16, rng.integers(0, 3), ky, kz, rng.uniform(0, 6))
    f = per(g16, v)
    F = inv_laplacian_yz(f)
    assert np.max(np.abs(laplacian_yz(F).values() - project_mean(f).values())) < 1e-12
    # zero plane mean output
    assert np.max(np.abs(F.coefficient(ONE).mean(axis=(1, 2)))) < 1e-14


def test_inverse_laplacian_linear_in_yz(g16):
    X, Y, Z = (g16.mesh(i) for i in range(3))
    y = PolyField.coord(g16, "y")
    z = PolyField.coord(g16, "z")
    f = y * per(g16, np.cos(Y + 2 * Z + X)) + y * z * per(g16, np.sin(Z - Y))
    F = inv_laplacian_yz(f)
    resid = laplacian_yz(F) - project_mean(f)
    assert resid.max_abs() < 1e-10


def test_completed_inverse_inverts_plane_means(g16):
    X = g16.mesh(0)
    f = per(g16, 1.0 + np.cos(X))
    F = inv_laplacian_yz(f, complete=True)
    assert (laplacian_yz(F) - f).max_abs() < 1e-12


def test_inverse_laplacian_rejects_high_yz_degree(g8):
    y = PolyField.coord(g8, "y")
    with pytest.raises(UnsupportedShape):
        inv_laplacian_yz(y * y * per(g8, np.sin(g8.mesh(2))))


def test_integrate_box_monomials_exact(g8):
    L = 2 * np.pi
    x = PolyField.coord(g8, "x")
    y = PolyField.coord(g8, "y")
    assert integrate_box(x * x * y) == pytest.approx(L**3 / 3 * L**2 / 2 * L, rel=1e-13)
    Z = g8.mesh(2)
    # ∫ x cos(z)... vanishes, ∫ x sin(x) = -2π
    f = x * per(g8, np.sin(g8.mesh(0))) + x * per(g8, np.cos(Z))
    assert integrate_box(f) == pytest.approx(-2 * np.pi * L * L, rel=1e-12)


def test_inner_product_symmetric_and_bilinear(g8, rng):
    a = per(g8, trig(g8, 1, 0, 1, 0.3))
    b = per(g8, trig(g8, 1, 0, 1, 1.1)) * PolyField.coord(g8, "y")
    assert inner_product(a, b) == pytest.approx(inner_product(b, a), rel=1e-14)
    assert inner_product(a * 2.0, b) == pytest.approx(2 * inner_product(a, b), rel=1e-14)


def test_resample_reproduces_nodes(g8, rng):
    v = sum(rng.standard_normal() * trig(g8, *rng.integers(-3, 4, 3)) for _ in range(5))
    fine = resample(v, g8, g8.refined(2))
    assert np.allclose(fine[::2, ::2, ::2], v, atol=1e-14)


@pytest.mark.parametrize("order,expected", [(1, 4.0), (2, 4.0)])
def test_fd_derivative_fourth_order(order, expected):
    errs = []
    for n in (16, 32):
        h = 1.0 / n
        s = np.arange(n + 1) * h
        vals = np.sin(s)[:, None, None] * np.ones((1, 5, 5))
        d = fd_derivative(vals, h, "x", order)
        ex = np.cos(s) if order == 1 else -np.sin(s)
        errs.append(np.nanmax(np.abs(d[:, 2, 2] - ex)))
    assert np.log2(errs[0] / errs[1]) > expected - 0.3
