"""Unknowns (u, v), background/fluctuation split and derived coefficients."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .calculus import ONE, Grid3, GridMismatch, PolyField, _spectral, derivative, project_mean


class DegenerateState(ValueError):
    """Raised when a = Δu comes too close to zero for the operators to be used."""


@dataclass(frozen=True)
class Background:
    """u_bg = (κ_t t² + κ_x x² + κ_y y² + κ_z z²)/4 + A sin(kx) exp(s k t)."""

    kappa_t: float = 0.0
    kappa_x: float = 0.0
    kappa_y: float = 0.0
    kappa_z: float = 0.0
    amplitude: float = 0.0
    wavenumber: float = 0.0
    sign: float = -1.0

    def __post_init__(self):
        if self.sign not in (-1.0, 1.0):
            raise ValueError("harmonic sign must be +1 or -1")
        if self.wavenumber < 0:
            raise ValueError("wavenumber must be non-negative")

    @classmethod
    def solution(cls, epsilon: int, kappa: float = 1.0, amplitude=0.0, wavenumber=0.0, sign=-1.0):
        """Solution background with κ_t = κ_x = ε/κ and κ_y = κ_z = κ."""
        return cls(epsilon / kappa, epsilon / kappa, kappa, kappa, amplitude, wavenumber, sign)

    def is_solution(self, epsilon: int, tol: float = 1e-14) -> bool:
        s = self.kappa_y + self.kappa_z
        if s == 0:
            return False
        return abs(0.5 * (self.kappa_t + self.kappa_x) - 2 * epsilon / s) <= tol

    @property
    def signed_wavenumber(self) -> float:
        return math.copysign(self.wavenumber, self.sign)

    @classmethod
    def from_packed(cls, values) -> "Background":
        kt, kx, ky, kz, A, sk = (float(v) for v in values)
        return cls(kt, kx, ky, kz, A, abs(sk), math.copysign(1.0, sk))

    def packed(self) -> tuple[float, ...]:
        return (self.kappa_t, self.kappa_x, self.kappa_y, self.kappa_z, self.amplitude, self.signed_wavenumber)

    # closed-form fields --------------------------------------------------
    def _harmonic(self, grid: Grid3, t: float, nt: int) -> np.ndarray | None:
        if self.amplitude == 0.0:
            return None
        k, s = self.wavenumber, self.sign
        periods = k * grid.Lx / (2 * np.pi)
        if abs(periods - round(periods)) > 1e-12:
            raise ValueError("harmonic wavenumber must be periodic on the box")
        x = grid.mesh(0)
        vals = self.amplitude * (s * k) ** nt * np.sin(k * x) * np.exp(s * k * t)
        return np.broadcast_to(vals, grid.shape)

    def u_poly(self, grid: Grid3, t: float) -> PolyField:
        terms = {
            (2, 0, 0): self.kappa_x / 4,
            (0, 2, 0): self.kappa_y / 4,
            (0, 0, 2): self.kappa_z / 4,
        }
        out = {m: np.full(grid.shape, c) for m, c in terms.items() if c}
        const = np.full(grid.shape, self.kappa_t * t * t / 4)
        h = self._harmonic(grid, t, 0)
        if h is not None:
            const = const + h
        out[ONE] = const
        return PolyField(grid, out)

    def time_derivative(self, grid: Grid3, t: float, order: int) -> np.ndarray:
        """∂_t^order u_bg as a periodic array (order 1 or 2)."""
        base = self.kappa_t * t / 2 if order == 1 else self.kappa_t / 2
        out = np.full(grid.shape, base)
        h = self._harmonic(grid, t, order)
        return out if h is None else out + h

    def v_poly(self, grid: Grid3, t: float) -> PolyField:
        return PolyField.periodic(grid, self.time_derivative(grid, t, 1))


@dataclass(frozen=True, eq=False)
class FieldState:
    grid: Grid3
    t: float
    epsilon: int
    u_fluct: np.ndarray
    v_fluct: np.ndarray
    background: Background
    delta_a: float = 0.1

    def __post_init__(self):
        if self.epsilon not in (1, -1):
            raise ValueError("epsilon must be +1 or -1")
        for name in ("u_fluct", "v_fluct"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != self.grid.shape:
                raise GridMismatch(f"{name} shape {arr.shape} != grid {self.grid.shape}")
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"{name} has non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.delta_a > 0:
            raise ValueError("delta_a must be positive")

    @classmethod
    def background_only(cls, grid, t, epsilon, background, delta_a=0.1) -> "FieldState":
        z = np.zeros(grid.shape)
        return cls(grid, t, epsilon, z, z, background, delta_a)

    def replace(self, **kw) -> "FieldState":
        args = dict(grid=self.grid, t=self.t, epsilon=self.epsilon, u_fluct=self.u_fluct,
                    v_fluct=self.v_fluct, background=self.background, delta_a=self.delta_a)
        args.update(kw)
        return FieldState(**args)

    def reference(self) -> "FieldState":
        """Background-only state at the same time."""
        return FieldState.background_only(self.grid, self.t, self.epsilon, self.background, self.delta_a)

    @cached_property
    def u(self) -> PolyField:
        return self.background.u_poly(self.grid, self.t) + PolyField.periodic(self.grid, self.u_fluct)

    @cached_property
    def v(self) -> PolyField:
        return self.background.v_poly(self.grid, self.t) + PolyField.periodic(self.grid, self.v_fluct)

    @cached_property
    def jet(self) -> "Jet":
        return Jet.of(self.u, self.v)


@dataclass
class Jet:
    """Derivatives of (u, v) up to second order in u and first order in v."""

    u: dict[str, PolyField] = field(default_factory=dict)
    v: dict[str, PolyField] = field(default_factory=dict)

    @classmethod
    def of(cls, u: PolyField, v: PolyField) -> "Jet":
        ud = {"": u}
        for ax in "xyz":
            ud[ax] = derivative(u, ax)
        for key in ("xx", "xy", "xz", "yy", "yz", "zz"):
            ud[key] = derivative(ud[key[0]], key[1])
        vd = {"": v}
        for ax in "xyz":
            vd[ax] = derivative(v, ax)
        return cls(ud, vd)

    def __add__(self, other: "Jet") -> "Jet":
        return Jet({k: self.u[k] + other.u[k] for k in self.u}, {k: self.v[k] + other.v[k] for k in self.v})

    def scaled(self, c: float) -> "Jet":
        return Jet({k: f * c for k, f in self.u.items()}, {k: f * c for k, f in self.v.items()})


# ---------------------------------------------------------------------------
# vectors and covectors
# ---------------------------------------------------------------------------

class _Pair:
    __slots__ = ("first", "second")

    def __init__(self, first: PolyField, second: PolyField):
        if first.grid != second.grid:
            raise GridMismatch("components on different grids")
        self.first = first
        self.second = second

    @classmethod
    def from_arrays(cls, grid: Grid3, first, second):
        return cls(PolyField.periodic(grid, first), PolyField.periodic(grid, second))

    @classmethod
    def zeros(cls, grid: Grid3):
        return cls(PolyField.zeros(grid), PolyField.zeros(grid))

    @property
    def grid(self) -> Grid3:
        return self.first.grid

    def __iter__(self):
        yield self.first
        yield self.second

    def _check(self, other):
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")

    def __add__(self, other):
        self._check(other)
        return type(self)(self.first + other.first, self.second + other.second)

    def __sub__(self, other):
        self._check(other)
        return type(self)(self.first - other.first, self.second - other.second)

    def __neg__(self):
        return type(self)(-self.first, -self.second)

    def __mul__(self, c: float):
        if not np.isscalar(c):
            return NotImplemented
        return type(self)(self.first * c, self.second * c)

    __rmul__ = __mul__

    def project(self):
        return type(self)(project_mean(self.first), project_mean(self.second))

    def chop(self, rtol: float = 1e-12):
        return type(self)(self.first.chop(rtol), self.second.chop(rtol))

    def max_abs(self) -> float:
        return max(self.first.max_abs(), self.second.max_abs())

    def __repr__(self):
        return f"{type(self).__name__}({self.first!r}, {self.second!r})"


class TwoComponentVector(_Pair):
    """Flow direction or symmetry characteristic (φ, ψ)."""


class TwoComponentCovector(_Pair):
    """Variational-derivative pair (δ_u H, δ_v H)."""


# ---------------------------------------------------------------------------
# coefficients and the flow
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coefficients:
    a: PolyField
    b: PolyField
    c: PolyField
    Q: PolyField


@dataclass(frozen=True)
class NondegeneracyReport:
    min_abs_a: float
    ok: bool


def nondegeneracy_check(s: FieldState) -> NondegeneracyReport:
    return _nondegeneracy(s.jet, s.delta_a)


def _nondegeneracy(jet: "Jet", delta_a: float) -> NondegeneracyReport:
    a = jet.u["yy"] + jet.u["zz"]
    m = float(np.min(np.abs(a.values()))) if a.terms and a.is_periodic else 0.0
    return NondegeneracyReport(m, bool(m >= delta_a))


def coefficients_from_jet(jet: "Jet", epsilon: int, delta_a: float = 0.1) -> Coefficients:
    rep = _nondegeneracy(jet, delta_a)
    if not rep.ok:
        raise DegenerateState(f"min|a| = {rep.min_abs_a:.3g} below delta_a = {delta_a}")
    a = (jet.u["yy"] + jet.u["zz"]).chop()
    b = (jet.u["xy"] - jet.v["z"]).chop()
    c = (jet.v["y"] + jet.u["xz"]).chop()
    Q = (b * b + c * c + float(epsilon)) / a
    return Coefficients(a, b, c, Q)


def coefficients(s: FieldState) -> Coefficients:
    cached = s.__dict__.get("_coefficients")
    if cached is None:
        cached = coefficients_from_jet(s.jet, s.epsilon, s.delta_a)
        s.__dict__["_coefficients"] = cached
    return cached


def flow_rhs(s: FieldState) -> TwoComponentVector:
    """(u_t, v_t) = (v, Q - u_xx)."""
    co = coefficients(s)
    return TwoComponentVector(s.v, (co.Q - s.jet.u["xx"]).chop())


def fluctuation_rhs(s: FieldState) -> tuple[np.ndarray, np.ndarray]:
    """Time derivative of the periodic fluctuation (background evolves analytically).

    Written in perturbation form: with a = a_bg + Δu_f and the background
    equation subtracted exactly,
    ∂_t v_f = (b² + c²)/a - ε Δu_f/(a a_bg) - ∂_x² u_f,
    so no O(1) terms cancel in floating point.
    """
    bg = s.background
    if not bg.is_solution(s.epsilon):
        raise ValueError("fluctuation right-hand side is not periodic; background is not a solution")
    g = s.grid
    u, v = s.u_fluct, s.v_fluct
    d = lambda f, ax, n=1: _spectral(f, g, ax, n)
    a_bg = 0.5 * (bg.kappa_y + bg.kappa_z)
    a_f = d(u, 1, 2) + d(u, 2, 2)
    a = a_bg + a_f
    m = float(np.min(np.abs(a)))
    if m < s.delta_a:
        raise DegenerateState(f"min|a| = {m:.3g} below delta_a = {s.delta_a}")
    ux = d(u, 0)
    b = d(ux, 1) - d(v, 2)
    c = d(v, 1) + d(ux, 2)
    dv = (b * b + c * c) / a - s.epsilon * a_f / (a * a_bg) - d(ux, 0)
    return np.array(v), dv
