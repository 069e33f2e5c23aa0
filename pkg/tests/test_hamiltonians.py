import numpy as np
import pytest

from sdgrav import fixtures as fx
from sdgrav.calculus import Grid3, PolyField, inner_product, resample
from sdgrav.hamiltonians import (
    H0,
    H1,
    BetaFunction,
    CollarSpec,
    CollarViolation,
    DensityId,
    HarmonicAlpha,
    LinearAlpha,
    alpha_residuals,
    all_density_ids,
    collar_max,
    helmholtz_probe,
    legendre_check,
    relative_functional,
    upsample_state,
    vgrad,
    vgrad_oracle_error,
)


@pytest.mark.parametrize("alpha", [LinearAlpha(), LinearAlpha(ct=1.0, cx=2.0, cy=-1.0), HarmonicAlpha(1.0),
                                   HarmonicAlpha(2.0, 0.5, 1.0, 0.3)])
def test_alpha_generators_satisfy_their_equations(alpha):
    assert max(alpha_residuals(alpha).values()) < 1e-10


def test_density_id_validation():
    with pytest.raises(ValueError):
        DensityId("H7")
    with pytest.raises(ValueError):
        DensityId("Halpha")
    with pytest.raises(ValueError, match="harmonic"):
        DensityId("Hbeta", beta=BetaFunction(cyy=1.0))
    assert DensityId("Hbeta", beta=BetaFunction(cyy=1.0, czz=-1.0)).label == "Hbeta[y^2+-1z^2]"


@pytest.fixture(scope="module")
def resolved():
    """8³ band-limited data carried on 32³ so that density products are resolved."""
    g0 = Grid3.cube(8)
    s = upsample_state(fx.rand(g0, 0), 4)
    rng = np.random.default_rng(0)
    T = fx.taper(g0)
    w = tuple(resample(T * fx.random_modes(g0, rng), g0, s.grid) for _ in range(2))
    return s, w


@pytest.mark.parametrize("did", all_density_ids(), ids=lambda d: d.label)
def test_vgrad_is_the_functional_gradient(resolved, did):
    """⟨vgrad, w⟩ equals the directional derivative of the relative functional."""
    s, w = resolved
    h = 1e-4
    shift = lambda c: s.replace(u_fluct=s.u_fluct + c * w[0], v_fluct=s.v_fluct + c * w[1])
    dF = (relative_functional(did, shift(h)) - relative_functional(did, shift(-h))) / (2 * h)
    g = s.grid
    ip = inner_product(list(vgrad(did, s)), [PolyField.periodic(g, w[0]), PolyField.periodic(g, w[1])])
    assert abs(dF - ip) <= 1e-6 * abs(ip)


def test_fd_oracle_single_density(g8):
    assert vgrad_oracle_error(H0, fx.rand(g8, 0)) < 1e-5


def test_helmholtz_symmetry_h1(rand16):
    g = rand16.grid
    rng = np.random.default_rng(7)
    T = fx.taper(g)
    w1 = tuple(T * fx.random_modes(g, rng) for _ in range(2))
    w2 = tuple(T * fx.random_modes(g, rng) for _ in range(2))
    assert helmholtz_probe(H1, rand16, w1, w2).relative < 1e-6


def test_collar_monitor(g16, rand16):
    assert collar_max(rand16, 1) < 1e-5
    u = 1e-2 * np.broadcast_to(np.cos(g16.mesh(0)), g16.shape)
    bad = rand16.replace(u_fluct=u)
    with pytest.raises(CollarViolation):
        relative_functional(H1, bad, CollarSpec(1, 1e-5))


def test_relative_functional_vanishes_on_background(qs16):
    for did in all_density_ids():
        assert relative_functional(did, qs16) == 0.0


def test_legendre_consistency_on_collar_supported_data(rand16):
    assert legendre_check(rand16) < 1e-6 * max(1.0, abs(relative_functional(H1, rand16)))
