"""Differential calculus on a periodic 3-box.

Fields are stored as :class:`PolyField` objects: a finite sum of coordinate
monomials ``x**mx * y**my * z**mz`` with periodic coefficient arrays.  Periodic
coefficients are differentiated spectrally, monomials analytically, so that
quantities such as ``u_y = y/2 + f_y`` for a quadratic background keep an exact
representation on the torus.

Grid nodes sit at ``j * L / n`` for ``j = 0 .. n-1``; arrays are indexed
``[ix, iy, iz]`` (z fastest in C order).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
import scipy.fft as sfft

AXES = {"x": 0, "y": 1, "z": 2}
MAX_DEGREE = 4

Monomial = tuple[int, int, int]
ONE: Monomial = (0, 0, 0)


class GridMismatch(ValueError):
    pass


class DegreeError(ValueError):
    pass


class UnsupportedShape(ValueError):
    pass


def _axis(axis) -> int:
    if isinstance(axis, str):
        try:
            return AXES[axis]
        except KeyError:
            raise ValueError(f"invalid axis {axis!r}") from None
    if axis not in (0, 1, 2):
        raise ValueError(f"invalid axis {axis!r}")
    return int(axis)


@dataclass(frozen=True)
class Grid3:
    nx: int
    ny: int
    nz: int
    Lx: float = 2 * np.pi
    Ly: float = 2 * np.pi
    Lz: float = 2 * np.pi

    def __post_init__(self):
        for n in self.shape:
            if n < 8 or n % 2 or n & (n - 1):
                raise ValueError(f"grid counts must be powers of two >= 8, got {self.shape}")
        for L in self.lengths:
            if not L > 0:
                raise ValueError("box lengths must be positive")

    @classmethod
    def cube(cls, n: int, L: float = 2 * np.pi) -> "Grid3":
        return cls(n, n, n, L, L, L)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def lengths(self) -> tuple[float, float, float]:
        return (self.Lx, self.Ly, self.Lz)

    @property
    def spacings(self) -> tuple[float, float, float]:
        return tuple(L / n for L, n in zip(self.lengths, self.shape))

    @property
    def cell_volume(self) -> float:
        hx, hy, hz = self.spacings
        return hx * hy * hz

    @property
    def volume(self) -> float:
        return self.Lx * self.Ly * self.Lz

    def coords(self, axis) -> np.ndarray:
        """1-D node coordinates along ``axis``."""
        i = _axis(axis)
        return np.arange(self.shape[i]) * self.spacings[i]

    def mesh(self, axis) -> np.ndarray:
        """Node coordinate broadcastable against a field array."""
        i = _axis(axis)
        shp = [1, 1, 1]
        shp[i] = self.shape[i]
        return self.coords(i).reshape(shp)

    def refined(self, factor: int) -> "Grid3":
        return Grid3(self.nx * factor, self.ny * factor, self.nz * factor, *self.lengths)


@lru_cache(maxsize=64)
def _wavenumbers(n: int, L: float, keep_nyquist: bool) -> np.ndarray:
    k = 2 * np.pi * sfft.rfftfreq(n, d=L / n)
    if not keep_nyquist:
        k = k.copy()
        k[-1] = 0.0
    return k


def _spectral(values: np.ndarray, grid: Grid3, axis: int, order: int) -> np.ndarray:
    n, L = grid.shape[axis], grid.lengths[axis]
    first = np.take(values, [0], axis=axis)
    if np.array_equal(values, np.broadcast_to(first, values.shape)):
        # constant along this axis: the derivative is exactly zero
        return np.zeros(values.shape)
    k = _wavenumbers(n, L, False)
    shp = [1, 1, 1]
    shp[axis] = k.size
    mult = ((1j * k) ** order).reshape(shp)
    return sfft.irfft(sfft.rfft(values, axis=axis) * mult, n=n, axis=axis)


def _mono_str(m: Monomial) -> str:
    parts = [f"{s}^{e}" if e > 1 else s for s, e in zip("xyz", m) if e]
    return "*".join(parts) or "1"


class PolyField:
    """Sum of coordinate monomials with periodic coefficient arrays.

    ``terms`` maps a monomial exponent triple to a real array of the grid
    shape.  Absent keys are zero.  Instances are treated as immutable.
    """

    __slots__ = ("grid", "terms")

    def __init__(self, grid: Grid3, terms: Mapping[Monomial, np.ndarray] | None = None):
        self.grid = grid
        clean: dict[Monomial, np.ndarray] = {}
        for m, v in (terms or {}).items():
            m = tuple(int(e) for e in m)
            if min(m) < 0:
                raise DegreeError(f"negative exponent {m}")
            if sum(m) > MAX_DEGREE:
                raise DegreeError(f"monomial {_mono_str(m)} exceeds degree cap {MAX_DEGREE}")
            arr = np.broadcast_to(np.asarray(v, dtype=float), grid.shape)
            clean[m] = arr
        self.terms = clean

    # construction -----------------------------------------------------------
    @classmethod
    def zeros(cls, grid: Grid3) -> "PolyField":
        return cls(grid, {})

    @classmethod
    def periodic(cls, grid: Grid3, values) -> "PolyField":
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape and values.ndim != 0:
            raise GridMismatch(f"array shape {values.shape} does not match grid {grid.shape}")
        return cls(grid, {ONE: values})

    @classmethod
    def constant(cls, grid: Grid3, c: float) -> "PolyField":
        return cls(grid, {ONE: np.full(grid.shape, float(c))})

    @classmethod
    def monomial(cls, grid: Grid3, m: Monomial, coeff=1.0) -> "PolyField":
        return cls(grid, {m: np.full(grid.shape, 1.0) * coeff})

    @classmethod
    def coord(cls, grid: Grid3, axis) -> "PolyField":
        m = [0, 0, 0]
        m[_axis(axis)] = 1
        return cls.monomial(grid, tuple(m))

    # inspection ------------------------------------------------------------
    @property
    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=0)

    @property
    def is_periodic(self) -> bool:
        return all(m == ONE for m in self.terms)

    def coefficient(self, m: Monomial) -> np.ndarray:
        arr = self.terms.get(tuple(m))
        return np.zeros(self.grid.shape) if arr is None else np.array(arr)

    def values(self) -> np.ndarray:
        """Nodal values of the full field (monomials evaluated at the nodes)."""
        out = np.zeros(self.grid.shape)
        X, Y, Z = (self.grid.mesh(i) for i in range(3))
        for (a, b, c), v in self.terms.items():
            out = out + (X**a) * (Y**b) * (Z**c) * v
        return out

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values()))) if self.terms else 0.0

    def check_finite(self) -> None:
        for v in self.terms.values():
            if not np.all(np.isfinite(v)):
                raise FloatingPointError("non-finite field values")

    def __repr__(self) -> str:
        keys = ", ".join(_mono_str(m) for m in sorted(self.terms))
        return f"PolyField({self.grid.shape}, terms=[{keys}])"

    # algebra ---------------------------------------------------------------
    def _coerce(self, other) -> "PolyField":
        if isinstance(other, PolyField):
            if other.grid != self.grid:
                raise GridMismatch("fields live on different grids")
            return other
        if np.isscalar(other):
            return PolyField.constant(self.grid, other)
        if isinstance(other, np.ndarray):
            return PolyField.periodic(self.grid, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self.terms)
        for m, v in other.terms.items():
            terms[m] = terms[m] + v if m in terms else v
        return PolyField(self.grid, _prune(terms))

    __radd__ = __add__

    def __neg__(self):
        return PolyField(self.grid, {m: -v for m, v in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return PolyField(self.grid, {m: v * other for m, v in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict[Monomial, np.ndarray] = {}
        for m1, v1 in self.terms.items():
            for m2, v2 in other.terms.items():
                m = (m1[0] + m2[0], m1[1] + m2[1], m1[2] + m2[2])
                p = v1 * v2
                terms[m] = terms[m] + p if m in terms else p
        return PolyField(self.grid, _prune(terms))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return self * (1.0 / other)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if not other.is_periodic:
            raise UnsupportedShape("division only by periodic fields")
        d = other.terms.get(ONE)
        if d is None:
            raise ZeroDivisionError("division by zero field")
        return PolyField(self.grid, {m: v / d for m, v in self.terms.items()})

    def __rtruediv__(self, other):
        if not self.is_periodic:
            raise UnsupportedShape("division only by periodic fields")
        return PolyField.constant(self.grid, 1.0) * other / self if np.isscalar(other) else self._coerce(other) / self

    def __pow__(self, n: int):
        if n != int(n) or n < 0:
            raise ValueError("only non-negative integer powers")
        out = PolyField.constant(self.grid, 1.0)
        for _ in range(int(n)):
            out = out * self
        return out

    def chop(self, rtol: float = 1e-12) -> "PolyField":
        """Drop terms whose coefficient is round-off relative to the largest one."""
        scale = max((float(np.max(np.abs(v))) for v in self.terms.values()), default=0.0)
        keep = {m: v for m, v in self.terms.items() if np.max(np.abs(v)) > rtol * scale}
        return PolyField(self.grid, keep)

    def map_coefficients(self, fn) -> "PolyField":
        return PolyField(self.grid, {m: fn(v) for m, v in self.terms.items()})


def _prune(terms: dict) -> dict:
    return {m: v for m, v in terms.items() if np.any(v)}


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def derivative(f: PolyField, axis, order: int = 1) -> PolyField:
    """Total derivative along ``axis``: product rule over monomials, spectral
    on periodic coefficients (Nyquist mode zeroed)."""
    i = _axis(axis)
    out = f
    for _ in range(order):
        terms: dict[Monomial, np.ndarray] = {}
        for m, v in out.terms.items():
            dv = _spectral(np.asarray(v), f.grid, i, 1)
            terms[m] = terms[m] + dv if m in terms else dv
            if m[i]:
                lower = list(m)
                lower[i] -= 1
                lower = tuple(lower)
                add = m[i] * np.asarray(v)
                terms[lower] = terms[lower] + add if lower in terms else add
        out = PolyField(f.grid, _prune(terms))
    return out


def D(f: PolyField, *axes) -> PolyField:
    """Composite derivative, e.g. ``D(f, 'x', 'y')``."""
    for a in axes:
        f = derivative(f, a)
    return f


def laplacian_yz(f: PolyField) -> PolyField:
    return derivative(f, "y", 2) + derivative(f, "z", 2)


def _plane_mean_removed(v: np.ndarray) -> np.ndarray:
    return v - v.mean(axis=(1, 2), keepdims=True)


def project_mean(f: PolyField) -> PolyField:
    """Remove the per-(y, z)-plane mean of every monomial coefficient."""
    return PolyField(f.grid, _prune({m: _plane_mean_removed(np.asarray(v)) for m, v in f.terms.items()}))


def _inv_lap_periodic(v: np.ndarray, grid: Grid3) -> np.ndarray:
    kz = _wavenumbers(grid.nz, grid.Lz, True)
    ky_full = 2 * np.pi * sfft.fftfreq(grid.ny, d=grid.Ly / grid.ny)
    k2 = ky_full[:, None] ** 2 + kz[None, :] ** 2
    k2[0, 0] = 1.0
    inv = -1.0 / k2
    inv[0, 0] = 0.0
    # match the differentiation convention: Nyquist content is dropped
    inv[grid.ny // 2, :] = 0.0
    inv[:, -1] = 0.0
    vh = sfft.rfftn(v, axes=(1, 2))
    return sfft.irfftn(vh * inv[None, :, :], s=(grid.ny, grid.nz), axes=(1, 2))


# particular solutions of Δp = y^i z^j, used to complete the plane-mean sector
_MEAN_COMPLETION = {
    (0, 0): {(2, 0): 1 / 4, (0, 2): 1 / 4},
    (0, 1): {(2, 1): 1 / 8, (0, 3): 1 / 8},
    (1, 0): {(3, 0): 1 / 8, (1, 2): 1 / 8},
    (1, 1): {(3, 1): 1 / 12, (1, 3): 1 / 12},
}


def inv_laplacian_yz(f: PolyField, complete: bool = False) -> PolyField:
    """Zero-plane-mean inverse of ``D_y**2 + D_z**2``.

    Returns ``F`` with ``laplacian_yz(F) == project_mean(f)`` for inputs whose
    y and z monomial degrees are at most one (x-monomials pass through).

    With ``complete=True`` the plane means are inverted too, by adding the
    rotation-invariant polynomial particular solution (for instance
    ``m(x)·(y²+z²)/4`` for a plane mean ``m(x)``), so that
    ``laplacian_yz(F) == f``.  The result is then non-periodic in y and z and
    carries a harmonic ambiguity; use it only where the final quantity is
    insensitive to that choice.
    """
    F = _inv_laplacian_projected(f)
    if not complete:
        return F
    extra: dict[Monomial, np.ndarray] = {}
    for (mx, my, mz), v in f.chop(1e-11).terms.items():
        mean = np.broadcast_to(np.asarray(v).mean(axis=(1, 2), keepdims=True), f.grid.shape)
        if not np.any(mean):
            continue
        for (py, pz), c in _MEAN_COMPLETION[(my, mz)].items():
            key = (mx, py, pz)
            extra[key] = extra[key] + c * mean if key in extra else c * mean
    return F + PolyField(f.grid, extra)


def _inv_laplacian_projected(f: PolyField) -> PolyField:
    by_x: dict[int, dict[tuple[int, int], np.ndarray]] = {}
    for (mx, my, mz), v in f.chop(1e-11).terms.items():
        if my > 1 or mz > 1:
            raise UnsupportedShape(f"inverse Laplacian needs y,z degree <= 1, got {_mono_str((mx, my, mz))}")
        by_x.setdefault(mx, {})[(my, mz)] = np.asarray(v)
    grid = f.grid
    dy = lambda a: _spectral(a, grid, 1, 1)
    dz = lambda a: _spectral(a, grid, 2, 1)
    out: dict[Monomial, np.ndarray] = {}
    for mx, g in by_x.items():
        zero = np.zeros(grid.shape)
        h11 = _inv_lap_periodic(g.get((1, 1), zero), grid)
        h10 = _inv_lap_periodic(g.get((1, 0), zero) - 2 * dz(h11), grid)
        h01 = _inv_lap_periodic(g.get((0, 1), zero) - 2 * dy(h11), grid)
        h00 = _inv_lap_periodic(g.get((0, 0), zero) - 2 * dy(h10) - 2 * dz(h01), grid)
        for (my, mz), h in (((1, 1), h11), ((1, 0), h10), ((0, 1), h01), ((0, 0), h00)):
            if np.any(h):
                out[(mx, my, mz)] = h
    return PolyField(grid, out)


@lru_cache(maxsize=64)
def _monomial_weights(n: int, L: float, m: int) -> np.ndarray:
    """Weights w_j = integral over [0, L) of s**m times the j-th trigonometric
    cardinal function (Nyquist mode split symmetrically)."""
    s = np.arange(n) * L / n
    if m == 0:
        return np.full(n, L / n)
    ks = np.arange(-(n // 2), n // 2 + 1)
    w = np.zeros(n)
    for k in ks:
        if k == 0:
            Ik = L ** (m + 1) / (m + 1)
        else:
            kap = 2 * np.pi * k / L
            Ik = 0j
            for p in range(1, m + 1):
                Ik = (L**p - p * Ik) / (1j * kap) if p > 1 else L / (1j * kap)
        weight = 0.5 if abs(k) == n // 2 else 1.0
        w += weight * np.real(np.exp(-2j * np.pi * k * s / L) * Ik)
    return w / n


def _integrate_coeff(v: np.ndarray, grid: Grid3, m: Monomial) -> float:
    wx, wy, wz = (_monomial_weights(n, L, e) for n, L, e in zip(grid.shape, grid.lengths, m))
    return float(np.einsum("i,j,k,ijk->", wx, wy, wz, v))


def integrate_box(f: PolyField) -> float:
    """Integral over the box; exact for resolved trigonometric coefficients,
    with monomial factors integrated analytically."""
    return sum(_integrate_coeff(np.asarray(v), f.grid, m) for m, v in f.terms.items())


def inner_product(f, g) -> float:
    """Sum over both components of the box integral of the pointwise product."""
    fa, ga = _components(f), _components(g)
    if len(fa) != len(ga):
        raise ValueError("shape mismatch")
    return sum(integrate_box(a * b) for a, b in zip(fa, ga))


def _components(f) -> tuple:
    if isinstance(f, PolyField):
        return (f,)
    return tuple(f)


# ---------------------------------------------------------------------------
# resampling and finite differences
# ---------------------------------------------------------------------------

def resample(values: np.ndarray, grid: Grid3, new: Grid3) -> np.ndarray:
    """Trigonometric interpolation of nodal values onto a finer grid.

    The Nyquist mode is split symmetrically, so node values are reproduced.
    """
    out = np.asarray(values, dtype=float)
    for ax in range(3):
        n, N = grid.shape[ax], new.shape[ax]
        if N == n:
            continue
        if N < n:
            raise ValueError("resample only refines")
        vh = sfft.rfft(out, axis=ax)
        idx = [slice(None)] * 3
        idx[ax] = slice(n // 2, n // 2 + 1)
        vh[tuple(idx)] *= 0.5
        shp = list(vh.shape)
        shp[ax] = N // 2 + 1
        big = np.zeros(shp, dtype=complex)
        idx[ax] = slice(0, n // 2 + 1)
        big[tuple(idx)] = vh
        out = sfft.irfft(big, n=N, axis=ax) * (N / n)
    return out


def resample_field(f: PolyField, new: Grid3) -> PolyField:
    return PolyField(new, {m: resample(np.asarray(v), f.grid, new) for m, v in f.terms.items()})


_FD4 = {
    1: (np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12]), 1),
    2: (np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]), 2),
}


def fd_derivative(values: np.ndarray, h: float, axis, order: int = 1) -> np.ndarray:
    """4th-order centred finite differences on interior nodes of a
    non-periodic sample; the two outermost nodes on each side are NaN."""
    i = _axis(axis)
    coeffs, p = _FD4[order]
    v = np.moveaxis(np.asarray(values, dtype=float), i, 0)
    out = np.full_like(v, np.nan)
    n = v.shape[0]
    acc = sum(c * v[k : n - 4 + k] for k, c in enumerate(coeffs))
    out[2 : n - 2] = acc / h**p
    return np.moveaxis(out, 0, i)


def fd_interior_slice(ndim: int = 3, width: int = 2) -> tuple:
    return tuple(slice(width, -width) for _ in range(ndim))


def iter_axes(axes: Iterable) -> list[int]:
    return [_axis(a) for a in axes]
