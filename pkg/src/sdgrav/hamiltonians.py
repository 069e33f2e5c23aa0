"""Hamiltonian densities, their Euler-Lagrange derivatives and oracles.

Partial derivatives of each density with respect to the jet variables are
hand-coded; :func:`vgrad` assembles ``δ_u H = Σ_J (-D)_J ∂H/∂u_J`` from them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .calculus import (
    ONE,
    Grid3,
    PolyField,
    _monomial_weights,
    derivative,
    integrate_box,
    inner_product,
    laplacian_yz,
    resample,
    _spectral,
)
from .state import FieldState, Jet, TwoComponentCovector


class CollarViolation(RuntimeError):
    """Fluctuation is not negligible near the box faces."""


# ---------------------------------------------------------------------------
# α and β generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearAlpha:
    """α = c_t t + c_x x + c_y y + c_z z + c_0."""

    ct: float = 0.0
    cx: float = 0.0
    cy: float = 0.0
    cz: float = 1.0
    c0: float = 0.0

    @property
    def label(self) -> str:
        names = [(self.ct, "t"), (self.cx, "x"), (self.cy, "y"), (self.cz, "z"), (self.c0, "1")]
        return "+".join(f"{c:g}{n}" if c != 1 else n for c, n in names if c) or "0"

    def field(self, grid: Grid3, t: float, nt: int = 0) -> PolyField:
        if nt >= 2:
            return PolyField.zeros(grid)
        if nt == 1:
            return PolyField.constant(grid, self.ct)
        out = PolyField.constant(grid, self.ct * t + self.c0)
        for c, ax in ((self.cx, "x"), (self.cy, "y"), (self.cz, "z")):
            if c:
                out = out + PolyField.coord(grid, ax) * c
        return out


@dataclass(frozen=True)
class HarmonicAlpha:
    """α = A sin(k x + φ) exp(s k t)."""

    k: float = 1.0
    amplitude: float = 1.0
    sign: float = -1.0
    phase: float = 0.0

    @property
    def label(self) -> str:
        s = "-" if self.sign < 0 else ""
        return f"sin({self.k:g}x)e^({s}{self.k:g}t)"

    def field(self, grid: Grid3, t: float, nt: int = 0) -> PolyField:
        x = grid.mesh(0)
        lam = self.sign * self.k
        vals = self.amplitude * lam**nt * np.sin(self.k * x + self.phase) * np.exp(lam * t)
        return PolyField.periodic(grid, np.broadcast_to(vals, grid.shape))


AlphaFunction = LinearAlpha | HarmonicAlpha


def alpha_residuals(alpha, grid: Grid3 | None = None, t: float = 0.3) -> dict[str, float]:
    """Max-norm residuals of the four defining α conditions on a sample lattice."""
    grid = grid or Grid3.cube(8)
    a0, a1, a2 = (alpha.field(grid, t, n) for n in range(3))
    res = {
        "laplace_yz": laplacian_yz(a0),
        "tt_plus_xx": a2 + derivative(a0, "x", 2),
        "tz_minus_xy": derivative(a1, "z") - derivative(derivative(a0, "x"), "y"),
        "ty_plus_xz": derivative(a1, "y") + derivative(derivative(a0, "x"), "z"),
    }
    return {k: v.max_abs() for k, v in res.items()}


def check_alpha(alpha, tol: float = 1e-10) -> None:
    bad = {k: v for k, v in alpha_residuals(alpha).items() if v > tol}
    if bad:
        raise ValueError(f"alpha {alpha.label} violates its defining equations: {bad}")


@dataclass(frozen=True)
class BetaFunction:
    """β = c_y y + c_z z + c_yy y² + c_zz z² + c_yz yz."""

    cy: float = 0.0
    cz: float = 0.0
    cyy: float = 0.0
    czz: float = 0.0
    cyz: float = 0.0

    @property
    def label(self) -> str:
        names = [(self.cy, "y"), (self.cz, "z"), (self.cyy, "y^2"), (self.czz, "z^2"), (self.cyz, "yz")]
        return "+".join(f"{c:g}{n}" if c != 1 else n for c, n in names if c) or "0"

    def laplacian(self) -> float:
        return 2 * (self.cyy + self.czz)

    def is_harmonic(self) -> bool:
        return self.laplacian() == 0.0

    def derivatives(self, grid: Grid3) -> dict[str, PolyField]:
        y, z = PolyField.coord(grid, "y"), PolyField.coord(grid, "z")
        one = PolyField.constant(grid, 1.0)
        return {
            "y": one * self.cy + y * (2 * self.cyy) + z * self.cyz,
            "z": one * self.cz + z * (2 * self.czz) + y * self.cyz,
            "yy": one * (2 * self.cyy),
            "yz": one * self.cyz,
        }


# ---------------------------------------------------------------------------
# density identifiers
# ---------------------------------------------------------------------------

DENSITY_NAMES = ("H1", "H0", "H0bar", "H2rot", "H3", "H4", "Halpha", "Hbeta")


@dataclass(frozen=True)
class DensityId:
    name: str
    alpha: AlphaFunction | None = None
    beta: BetaFunction | None = None

    def __post_init__(self):
        if self.name not in DENSITY_NAMES:
            raise ValueError(f"unknown density {self.name!r}")
        if self.name == "Halpha":
            if self.alpha is None:
                raise ValueError("Halpha needs an alpha function")
            check_alpha(self.alpha)
        if self.name == "Hbeta":
            if self.beta is None:
                raise ValueError("Hbeta needs a beta function")
            if not self.beta.is_harmonic():
                raise ValueError(f"beta {self.beta.label} is not harmonic")

    @property
    def label(self) -> str:
        if self.name == "Halpha":
            return f"Halpha[{self.alpha.label}]"
        if self.name == "Hbeta":
            return f"Hbeta[{self.beta.label}]"
        return self.name


H1 = DensityId("H1")
H0 = DensityId("H0")
H0BAR = DensityId("H0bar")
H2ROT = DensityId("H2rot")
H3 = DensityId("H3")
H4 = DensityId("H4")


def Halpha(alpha) -> DensityId:
    return DensityId("Halpha", alpha=alpha)


def Hbeta(beta: BetaFunction) -> DensityId:
    return DensityId("Hbeta", beta=beta)


def all_density_ids() -> list[DensityId]:
    """One representative of each of the eight density families."""
    return [H1, H0, H0BAR, H2ROT, H3, H4, Halpha(HarmonicAlpha(1.0)), Hbeta(BetaFunction(cz=1.0))]


# ---------------------------------------------------------------------------
# densities and their partial derivatives
# ---------------------------------------------------------------------------

@dataclass
class _Ctx:
    grid: Grid3
    t: float
    epsilon: int


def _lap(j: Jet) -> PolyField:
    return j.u["yy"] + j.u["zz"]


def _h1(j, ctx):
    u, v = j.u, j.v[""]
    a = _lap(j)
    grad2 = u["y"] * u["y"] + u["z"] * u["z"]
    return (v * v * a - u["xx"] * grad2) * 0.5 - u[""] * float(ctx.epsilon)


def _h1_partials(j, ctx):
    u, v = j.u, j.v[""]
    half_v2 = v * v * 0.5
    return {
        "u": PolyField.constant(ctx.grid, -float(ctx.epsilon)),
        "u_xx": (u["y"] * u["y"] + u["z"] * u["z"]) * -0.5,
        "u_y": -(u["xx"] * u["y"]),
        "u_z": -(u["xx"] * u["z"]),
        "u_yy": half_v2,
        "u_zz": half_v2,
        "v": v * _lap(j),
    }


def _coords(ctx):
    return PolyField.coord(ctx.grid, "y"), PolyField.coord(ctx.grid, "z")


def _h0(j, ctx):
    y, z = _coords(ctx)
    return z * j.v[""] * _lap(j) + j.u["x"] * j.u["y"]


def _h0_partials(j, ctx):
    y, z = _coords(ctx)
    zv = z * j.v[""]
    return {"u_yy": zv, "u_zz": zv, "u_x": j.u["y"], "u_y": j.u["x"], "v": z * _lap(j)}


def _h0bar(j, ctx):
    y, z = _coords(ctx)
    return y * j.v[""] * _lap(j) - j.u["x"] * j.u["z"]


def _h0bar_partials(j, ctx):
    y, z = _coords(ctx)
    yv = y * j.v[""]
    return {"u_yy": yv, "u_zz": yv, "u_x": -j.u["z"], "u_z": -j.u["x"], "v": y * _lap(j)}


def _h2rot(j, ctx):
    y, z = _coords(ctx)
    u, v = j.u, j.v[""]
    r = y * u["z"] - z * u["y"]
    s2 = z * u["y"] + y * u["z"]
    return v * r * _lap(j) - u["x"] * (s2 * u["yz"] * 2.0 + u["y"] * u["y"] + u["z"] * u["z"])


def _h2rot_partials(j, ctx):
    y, z = _coords(ctx)
    u, v = j.u, j.v[""]
    a = _lap(j)
    r = y * u["z"] - z * u["y"]
    s2 = z * u["y"] + y * u["z"]
    vr = v * r
    return {
        "v": r * a,
        "u_z": v * y * a - u["x"] * (y * u["yz"] + u["z"]) * 2.0,
        "u_y": -(v * z * a) - u["x"] * (z * u["yz"] + u["y"]) * 2.0,
        "u_yy": vr,
        "u_zz": vr,
        "u_x": -(s2 * u["yz"] * 2.0 + u["y"] * u["y"] + u["z"] * u["z"]),
        "u_yz": u["x"] * s2 * -2.0,
    }


_TWO_THIRDS = 2.0 / 3.0


def _h3(j, ctx):
    u, v = j.u, j.v[""]
    return v * u["z"] * _lap(j) + u["x"] * (u["y"] * u["zz"] - u["z"] * u["yz"]) * _TWO_THIRDS


def _h3_partials(j, ctx):
    u, v = j.u, j.v[""]
    a = _lap(j)
    vz = v * u["z"]
    return {
        "v": u["z"] * a,
        "u_z": v * a - u["x"] * u["yz"] * _TWO_THIRDS,
        "u_yy": vz,
        "u_zz": vz + u["x"] * u["y"] * _TWO_THIRDS,
        "u_x": (u["y"] * u["zz"] - u["z"] * u["yz"]) * _TWO_THIRDS,
        "u_y": u["x"] * u["zz"] * _TWO_THIRDS,
        "u_yz": u["x"] * u["z"] * -_TWO_THIRDS,
    }


def _h4(j, ctx):
    u, v = j.u, j.v[""]
    return v * u["y"] * _lap(j) + u["x"] * (u["y"] * u["yz"] - u["z"] * u["yy"]) * _TWO_THIRDS


def _h4_partials(j, ctx):
    u, v = j.u, j.v[""]
    a = _lap(j)
    vy = v * u["y"]
    return {
        "v": u["y"] * a,
        "u_y": v * a + u["x"] * u["yz"] * _TWO_THIRDS,
        "u_yy": vy - u["x"] * u["z"] * _TWO_THIRDS,
        "u_zz": vy,
        "u_x": (u["y"] * u["yz"] - u["z"] * u["yy"]) * _TWO_THIRDS,
        "u_z": u["x"] * u["yy"] * -_TWO_THIRDS,
        "u_yz": u["x"] * u["y"] * _TWO_THIRDS,
    }


def _alpha_fields(ctx, alpha):
    return alpha.field(ctx.grid, ctx.t, 0), alpha.field(ctx.grid, ctx.t, 1)


def _halpha(j, ctx, alpha):
    u, v = j.u, j.v[""]
    al, al_t = _alpha_fields(ctx, alpha)
    return (al * v * _lap(j) + al_t * (u["y"] * u["y"] + u["z"] * u["z"]) * 0.5
            + al * (u["z"] * u["xy"] - u["y"] * u["xz"]))


def _halpha_partials(j, ctx, alpha):
    u, v = j.u, j.v[""]
    al, al_t = _alpha_fields(ctx, alpha)
    av = al * v
    return {
        "v": al * _lap(j),
        "u_yy": av,
        "u_zz": av,
        "u_y": al_t * u["y"] - al * u["xz"],
        "u_z": al_t * u["z"] + al * u["xy"],
        "u_xy": al * u["z"],
        "u_xz": -(al * u["y"]),
    }


def _hbeta(j, ctx, beta):
    u, v = j.u, j.v[""]
    bd = beta.derivatives(ctx.grid)
    grad2 = u["y"] * u["y"] + u["z"] * u["z"]
    return ((bd["y"] * v * 0.5 - bd["z"] * u["x"]) * v * _lap(j)
            - bd["y"] * u["xx"] * grad2 * 0.5
            + u["x"] * u["x"] * (bd["yy"] * u["y"] + bd["yz"] * u["z"]) * 0.5
            - bd["y"] * u[""] * float(ctx.epsilon))


def _hbeta_partials(j, ctx, beta):
    u, v = j.u, j.v[""]
    bd = beta.derivatives(ctx.grid)
    a = _lap(j)
    w = bd["y"] * v * v * 0.5 - bd["z"] * u["x"] * v
    half_ux2 = u["x"] * u["x"] * 0.5
    return {
        "v": (bd["y"] * v - bd["z"] * u["x"]) * a,
        "u_yy": w,
        "u_zz": w,
        "u_x": -(bd["z"] * v * a) + u["x"] * (bd["yy"] * u["y"] + bd["yz"] * u["z"]),
        "u_xx": bd["y"] * (u["y"] * u["y"] + u["z"] * u["z"]) * -0.5,
        "u_y": -(bd["y"] * u["xx"] * u["y"]) + half_ux2 * bd["yy"],
        "u_z": -(bd["y"] * u["xx"] * u["z"]) + half_ux2 * bd["yz"],
        "u": bd["y"] * -float(ctx.epsilon),
    }


_TABLE: dict[str, tuple[Callable, Callable]] = {
    "H1": (_h1, _h1_partials),
    "H0": (_h0, _h0_partials),
    "H0bar": (_h0bar, _h0bar_partials),
    "H2rot": (_h2rot, _h2rot_partials),
    "H3": (_h3, _h3_partials),
    "H4": (_h4, _h4_partials),
    "Halpha": (_halpha, _halpha_partials),
    "Hbeta": (_hbeta, _hbeta_partials),
}


def _extra(did: DensityId) -> tuple:
    if did.name == "Halpha":
        return (did.alpha,)
    if did.name == "Hbeta":
        return (did.beta,)
    return ()


def _as_ids(ids) -> list[DensityId]:
    if isinstance(ids, DensityId):
        return [ids]
    return list(ids)


def density_from_jet(ids, jet: Jet, ctx: _Ctx) -> PolyField:
    out = PolyField.zeros(ctx.grid)
    for did in _as_ids(ids):
        out = out + _TABLE[did.name][0](jet, ctx, *_extra(did))
    return out


def density(ids, s: FieldState) -> PolyField:
    """Pointwise density of one id (or the sum of a sequence of ids)."""
    return density_from_jet(ids, s.jet, _Ctx(s.grid, s.t, s.epsilon))


def partials(did: DensityId, s: FieldState) -> dict[str, PolyField]:
    return _TABLE[did.name][1](s.jet, _Ctx(s.grid, s.t, s.epsilon), *_extra(did))


def euler_lagrange(parts: dict[str, PolyField], grid: Grid3) -> TwoComponentCovector:
    """Assemble (δ_u H, δ_v H) from jet partials keyed 'u', 'u_x', ..., 'v'."""
    du = PolyField.zeros(grid)
    dv = PolyField.zeros(grid)
    for key, p in parts.items():
        var, _, axes = key.partition("_")
        term = p
        for ax in axes:
            term = derivative(term, ax)
        if len(axes) % 2:
            term = -term
        if var == "u":
            du = du + term
        elif var == "v" and not axes:
            dv = dv + term
        else:
            raise KeyError(f"unsupported jet variable {key!r}")
    return TwoComponentCovector(du.chop(1e-13), dv.chop(1e-13))


def vgrad(ids, s: FieldState) -> TwoComponentCovector:
    """Closed-form variational derivative (δ_u H, δ_v H)."""
    out = None
    for did in _as_ids(ids):
        c = euler_lagrange(partials(did, s), s.grid)
        out = c if out is None else out + c
    return out


# ---------------------------------------------------------------------------
# relative functionals and the collar
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollarSpec:
    width: int = 2
    tol: float = 1e-6


def collar_max(s: FieldState, width: int) -> float:
    """Largest |fluctuation| on nodes within ``width`` of a box face."""
    mask = np.zeros(s.grid.shape, dtype=bool)
    for ax, n in enumerate(s.grid.shape):
        idx = np.arange(n)
        near = (idx < width) | (idx >= n - width + 1)
        shp = [1, 1, 1]
        shp[ax] = n
        mask |= near.reshape(shp)
    return float(max(np.max(np.abs(s.u_fluct[mask])), np.max(np.abs(s.v_fluct[mask]))))


def check_collar(s: FieldState, collar: CollarSpec | None) -> None:
    if collar is None:
        return
    m = collar_max(s, collar.width)
    if m > collar.tol:
        raise CollarViolation(f"fluctuation {m:.3g} in collar of width {collar.width} exceeds {collar.tol:g}")


def relative_functional(ids, s: FieldState, collar: CollarSpec | None = None) -> float:
    """∫ [H(s) - H(background at the same t)] over the box."""
    check_collar(s, collar)
    return integrate_box(density(ids, s) - density(ids, s.reference()))


# ---------------------------------------------------------------------------
# Legendre consistency
# ---------------------------------------------------------------------------

class _Cx:
    """Complex-valued PolyField as a (real, imaginary) pair."""

    def __init__(self, re: PolyField, im: PolyField):
        self.re, self.im = re, im

    def __add__(self, o):
        return _Cx(self.re + o.re, self.im + o.im)

    def __sub__(self, o):
        return _Cx(self.re - o.re, self.im - o.im)

    def __mul__(self, o):
        if isinstance(o, _Cx):
            return _Cx(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
        return _Cx(self.re * o, self.im * o)

    def times_i(self):
        return _Cx(-self.im, self.re)


def _complex_jet(j: Jet):
    u = j.u
    zero = PolyField.zeros(u[""].grid)
    real = lambda f: _Cx(f, zero)
    # ∂_w = ∂_y - i∂_z, ∂_w̄ = ∂_y + i∂_z
    uw = _Cx(u["y"], -u["z"])
    uwb = _Cx(u["y"], u["z"])
    uxw = _Cx(u["xy"], -u["xz"])
    uxwb = _Cx(u["xy"], u["xz"])
    uwwb = real(u["yy"] + u["zz"])
    return real, uw, uwb, uxw, uxwb, uwwb


def momentum_u(s: FieldState, tol: float = 1e-12) -> PolyField:
    """π_u = (i/3)(u_w u_xw̄ - u_w̄ u_xw) + v u_ww̄, real by construction."""
    real, uw, uwb, uxw, uxwb, uwwb = _complex_jet(s.jet)
    v = real(s.jet.v[""])
    pi = (uw * uxwb - uwb * uxw).times_i() * (1.0 / 3.0) + v * uwwb
    _assert_real(pi, tol)
    return pi.re


def lagrangian(s: FieldState, tol: float = 1e-12) -> PolyField:
    """Degenerate first-order Lagrangian with u_t replaced by v."""
    real, uw, uwb, uxw, uxwb, uwwb = _complex_jet(s.jet)
    u = s.jet.u
    v = real(s.jet.v[""])
    ux, uxx = real(u["x"]), real(u["xx"])
    body = ((ux * ux - v * v * 3.0) * uwwb + uw * uwb * uxx - ux * (uw * uxwb + uwb * uxw)
            + v * ((uw * uxwb - uwb * uxw).times_i() * 2.0 + v * uwwb * 6.0))
    L = body * (1.0 / 6.0) + real(u[""] * float(s.epsilon))
    _assert_real(L, tol)
    return L.re


def _assert_real(z: _Cx, tol: float) -> None:
    scale = max(z.re.max_abs(), 1.0)
    if z.im.max_abs() > tol * scale:
        raise ArithmeticError("complex-to-real rewrite left an imaginary part")


def legendre_check(s: FieldState, collar: CollarSpec | None = None) -> float:
    """|∫(π_u v - L)_rel - ∫H1_rel|; small when the fluctuation is collar-supported."""
    check_collar(s, collar)

    def canonical(st):
        return momentum_u(st) * st.jet.v[""] - lagrangian(st)

    lhs = integrate_box(canonical(s) - canonical(s.reference()))
    return abs(lhs - relative_functional(H1, s))


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------

def _cardinal_matrices(n: int, L: float, N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """C[d][j, i] = d-th derivative of coarse cardinal function j at fine node i."""
    coarse = Grid3(n, 8, 8, L)  # only the first axis is used
    fine = Grid3(N, 8, 8, L)
    base = np.empty((n, N))
    for j in range(n):
        e = np.zeros((n, 8, 8))
        e[j] = 1.0
        base[j] = resample(e, coarse, fine)[:, 0, 0]
    out = [base]
    for d in (1, 2):
        arr = np.stack([_spectral(base[j][:, None, None] * np.ones((1, 8, 8)), fine, 0, d)[:, 0, 0] for j in range(n)])
        out.append(arr)
    return tuple(out)


def _separable_jet(grid: Grid3, mats, index: tuple[int, int, int]) -> dict[str, PolyField]:
    """Jet of the cardinal function of a coarse node, sampled on the fine grid."""
    (ax, ay, az) = mats
    i, j, k = index

    def prod(dx, dy, dz):
        return ax[dx][i][:, None, None] * ay[dy][j][None, :, None] * az[dz][k][None, None, :]

    keys = {"": (0, 0, 0), "x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1), "xx": (2, 0, 0),
            "xy": (1, 1, 0), "xz": (1, 0, 1), "yy": (0, 2, 0), "yz": (0, 1, 1), "zz": (0, 0, 2)}
    return {key: PolyField.periodic(grid, prod(*d)) for key, d in keys.items()}


def upsample_state(s: FieldState, factor: int) -> FieldState:
    fine = s.grid.refined(factor)
    return FieldState(fine, s.t, s.epsilon, resample(s.u_fluct, s.grid, fine),
                      resample(s.v_fluct, s.grid, fine), s.background, s.delta_a)


def fd_vgrad(ids, s: FieldState, bump: float = 1e-5, oversample: int = 4,
             nodes: Iterable[tuple[int, int, int]] | None = None) -> TwoComponentCovector:
    """Central-difference functional derivative at the nodes of ``s.grid``.

    Node k of the fluctuation is displaced by ±bump along its band-limited
    cardinal function; the density is integrated on a grid ``oversample``
    times finer, where the products are resolved, and the difference is
    divided by 2·bump·(cell volume).  Nodes on the planes through the origin
    are skipped by default (returned as NaN) because the cardinal function's
    derivatives do not vanish on the box faces there.
    """
    g = s.grid
    sf = upsample_state(s, oversample)
    ctx = _Ctx(sf.grid, sf.t, sf.epsilon)
    mats = tuple(_cardinal_matrices(n, L, n * oversample) for n, L in zip(g.shape, g.lengths))
    base = sf.jet
    zero_u = {k: PolyField.zeros(sf.grid) for k in base.u}
    zero_v = {k: PolyField.zeros(sf.grid) for k in base.v}
    if nodes is None:
        nodes = [(i, j, k) for i in range(1, g.nx) for j in range(1, g.ny) for k in range(1, g.nz)]
    out_u = np.full(g.shape, np.nan)
    out_v = np.full(g.shape, np.nan)
    denom = 2 * bump * g.cell_volume
    for node in nodes:
        card = _separable_jet(sf.grid, mats, node)
        for target, out in (("u", out_u), ("v", out_v)):
            if target == "u":
                pert = Jet(card, zero_v)
            else:
                pert = Jet(zero_u, {"": card[""], "x": card["x"], "y": card["y"], "z": card["z"]})
            plus = integrate_box(density_from_jet(ids, base + pert.scaled(bump), ctx))
            minus = integrate_box(density_from_jet(ids, base + pert.scaled(-bump), ctx))
            out[node] = (plus - minus) / denom
    return TwoComponentCovector.from_arrays(g, out_u, out_v)


def projected_vgrad(ids, s: FieldState, oversample: int = 4) -> TwoComponentCovector:
    """∫ vgrad · ℓ_k / h³ for every coarse node k, the quantity fd_vgrad estimates."""
    g = s.grid
    sf = upsample_state(s, oversample)
    cov = vgrad(ids, sf)
    mats = [_cardinal_matrices(n, L, n * oversample)[0] for n, L in zip(g.shape, g.lengths)]
    comps = []
    for comp in cov:
        acc = np.zeros(g.shape)
        for m, v in comp.terms.items():
            w = [_monomial_weights(n * oversample, L, e) for n, L, e in zip(g.shape, g.lengths, m)]
            acc += np.einsum("ai,bj,ck,ijk->abc", mats[0] * w[0], mats[1] * w[1], mats[2] * w[2], v)
        comps.append(acc / g.cell_volume)
    return TwoComponentCovector.from_arrays(g, *comps)


def interior_mask(grid: Grid3) -> np.ndarray:
    m = np.ones(grid.shape, dtype=bool)
    m[0, :, :] = m[:, 0, :] = m[:, :, 0] = False
    return m


def vgrad_oracle_error(ids, s: FieldState, bump: float = 1e-5, oversample: int = 4) -> float:
    """Relative max-norm gap between fd_vgrad and projected closed-form vgrad."""
    fd = fd_vgrad(ids, s, bump, oversample)
    ref = projected_vgrad(ids, s, oversample)
    mask = interior_mask(s.grid)
    num = 0.0
    scale = 0.0
    for a, b in zip(fd, ref):
        av, bv = a.coefficient(ONE)[mask], b.coefficient(ONE)[mask]
        num = max(num, float(np.max(np.abs(av - bv))))
        scale = max(scale, float(np.max(np.abs(bv))))
    return num / max(scale, 1e-300)


# ---------------------------------------------------------------------------
# Helmholtz self-adjointness probe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HelmholtzResult:
    lhs: float
    rhs: float

    @property
    def relative(self) -> float:
        return abs(self.lhs - self.rhs) / max(abs(self.lhs), abs(self.rhs), 1e-300)


def _shift(s: FieldState, w, h: float) -> FieldState:
    return s.replace(u_fluct=s.u_fluct + h * w[0], v_fluct=s.v_fluct + h * w[1])


def vgrad_jacobian(ids, s: FieldState, w, h: float = 1e-3) -> TwoComponentCovector:
    """Directional derivative of s ↦ vgrad(ids, s) along the array pair w."""
    plus = vgrad(ids, _shift(s, w, h))
    minus = vgrad(ids, _shift(s, w, -h))
    return (plus - minus) * (1.0 / (2 * h))


def helmholtz_probe(ids, s: FieldState, w1, w2, h: float = 1e-3) -> HelmholtzResult:
    """Compare ⟨D vgrad · w1, w2⟩ with ⟨D vgrad · w2, w1⟩."""
    g = s.grid
    as_pair = lambda w: [PolyField.periodic(g, w[0]), PolyField.periodic(g, w[1])]
    lhs = inner_product(list(vgrad_jacobian(ids, s, w1, h)), as_pair(w2))
    rhs = inner_product(list(vgrad_jacobian(ids, s, w2, h)), as_pair(w1))
    return HelmholtzResult(lhs, rhs)
