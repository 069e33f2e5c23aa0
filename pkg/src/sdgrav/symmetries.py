"""Point-symmetry characteristics, Noether reconstruction and 𝒜-residuals."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .calculus import PolyField
from .hamiltonians import (
    AlphaFunction,
    BetaFunction,
    DensityId,
    H2ROT,
    H3,
    H4,
    Halpha,
    Hbeta,
    alpha_residuals,
    vgrad,
)
from .operators import apply_A, apply_K
from .state import FieldState, Jet, TwoComponentVector, coefficients_from_jet


class NonVariational(ValueError):
    """X1 and X5 have no Hamiltonian."""


class NotApplicable(ValueError):
    pass


class InsufficientTrajectory(ValueError):
    pass


SYMMETRY_NAMES = ("X1", "X2", "X3", "X4", "X5", "Xalpha", "Xbeta")


@dataclass(frozen=True)
class SymmetryId:
    name: str
    alpha: AlphaFunction | None = None
    beta: BetaFunction | None = None

    def __post_init__(self):
        if self.name not in SYMMETRY_NAMES:
            raise ValueError(f"unknown symmetry {self.name!r}")
        if self.name == "Xalpha" and self.alpha is None:
            raise ValueError("Xalpha needs an alpha function")
        if self.name == "Xbeta" and self.beta is None:
            raise ValueError("Xbeta needs a beta function")

    @property
    def variational(self) -> bool:
        return self.name not in ("X1", "X5")

    @property
    def label(self) -> str:
        if self.name == "Xalpha":
            return f"Xalpha[{self.alpha.label}]"
        if self.name == "Xbeta":
            return f"Xbeta[{self.beta.label}]"
        return self.name


X1, X2, X3, X4, X5 = (SymmetryId(n) for n in ("X1", "X2", "X3", "X4", "X5"))


def Xalpha(alpha) -> SymmetryId:
    return SymmetryId("Xalpha", alpha=alpha)


def Xbeta(beta: BetaFunction) -> SymmetryId:
    return SymmetryId("Xbeta", beta=beta)


def matching_density(sid: SymmetryId) -> DensityId:
    if not sid.variational:
        raise NonVariational(f"{sid.name} is not a variational symmetry")
    if sid.name == "X2":
        return H2ROT
    if sid.name == "X3":
        return H3
    if sid.name == "X4":
        return H4
    if sid.name == "Xalpha":
        return Halpha(sid.alpha)
    return Hbeta(sid.beta)


def characteristic_from_jet(sid: SymmetryId, jet: Jet, t: float, epsilon: int,
                            delta_a: float = 0.1) -> TwoComponentVector:
    u, v = jet.u, jet.v
    grid = u[""].grid
    name = sid.name
    if name in ("X1", "Xbeta"):
        Q = coefficients_from_jet(jet, epsilon, delta_a).Q
    if name == "X1":
        x = PolyField.coord(grid, "x")
        return TwoComponentVector(u[""] - v[""] * t - x * u["x"], (u["xx"] - Q) * t - x * v["x"])
    if name in ("X2", "X5"):
        y, z = PolyField.coord(grid, "y"), PolyField.coord(grid, "z")
        if name == "X2":
            return TwoComponentVector(y * u["z"] - z * u["y"], y * v["z"] - z * v["y"])
        return TwoComponentVector(u[""] - y * u["y"] - z * u["z"], v[""] - y * v["y"] - z * v["z"])
    if name == "X3":
        return TwoComponentVector(u["z"], v["z"])
    if name == "X4":
        return TwoComponentVector(u["y"], v["y"])
    if name == "Xalpha":
        return TwoComponentVector(sid.alpha.field(grid, t, 0), sid.alpha.field(grid, t, 1))
    bd = sid.beta.derivatives(grid)
    return TwoComponentVector(bd["y"] * v[""] - bd["z"] * u["x"],
                              bd["y"] * (Q - u["xx"]) - bd["z"] * v["x"])


def characteristic(sid: SymmetryId, s: FieldState) -> TwoComponentVector:
    """Two-component characteristic (φ^u, φ^v) of a point symmetry at state s.

    The explicit time in X1 is the state's clock; x, y, z factors are
    carried as monomials.
    """
    return characteristic_from_jet(sid, s.jet, s.t, s.epsilon, s.delta_a)


@dataclass(frozen=True)
class GeneratorReport:
    residuals: dict[str, float]
    tol: float

    @property
    def valid(self) -> bool:
        return all(v <= self.tol for v in self.residuals.values())


def generator_residual(sid: SymmetryId, tol: float = 1e-10) -> GeneratorReport:
    """Residuals of the equations an α or β generator must satisfy."""
    if sid.name == "Xalpha":
        return GeneratorReport(alpha_residuals(sid.alpha), tol)
    if sid.name == "Xbeta":
        return GeneratorReport({"laplace_yz": abs(sid.beta.laplacian())}, tol)
    raise NotApplicable(f"{sid.name} has no free generator function")


def noether_reconstruct(sid: SymmetryId, s: FieldState):
    """K applied to the characteristic: the variational derivative of its Hamiltonian."""
    if not sid.variational:
        raise NonVariational(f"{sid.name} has no Hamiltonian")
    return apply_K(s, characteristic(sid, s))


def noether_residual(sid: SymmetryId, s: FieldState) -> tuple[float, float]:
    """(projected, raw) max-norm of K·characteristic - vgrad(matching density),
    each relative to the max-norm of the projected or raw vgrad."""
    ref = vgrad(matching_density(sid), s)
    diff = noether_reconstruct(sid, s) - ref
    scale_p = max(ref.project().max_abs(), 1e-300)
    scale_r = max(ref.max_abs(), 1e-300)
    return diff.project().max_abs() / scale_p, diff.max_abs() / scale_r


def lie_bracket(a: SymmetryId, b: SymmetryId, s: FieldState, h: float = 1e-4) -> TwoComponentVector:
    """[Φ_a, Φ_b] = Φ_b'[Φ_a] - Φ_a'[Φ_b], by central differences of the jets."""
    base_u, base_v = s.u, s.v

    def along(target, direction):
        d = characteristic(direction, s)
        out = []
        for sign in (1.0, -1.0):
            jet = Jet.of(base_u + d.first * (sign * h), base_v + d.second * (sign * h))
            out.append(characteristic_from_jet(target, jet, s.t, s.epsilon, s.delta_a))
        return (out[0] - out[1]) * (1.0 / (2 * h))

    return along(b, a) - along(a, b)


# ---------------------------------------------------------------------------
# symmetry condition along trajectories
# ---------------------------------------------------------------------------

_STENCILS = {
    3: np.array([-0.5, 0.0, 0.5]),
    5: np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12]),
}


@dataclass(frozen=True)
class SymmetryResidual:
    projected: float
    raw: float
    row1: float
    row2: float
    t: float


def time_derivative(values: Sequence, dt: float):
    """Central time derivative at the middle of 3 or 5 equally spaced samples."""
    w = _STENCILS.get(len(values))
    if w is None:
        raise InsufficientTrajectory("need 3 or 5 samples for the time stencil")
    acc = None
    for c, f in zip(w, values):
        if c == 0.0:
            continue
        term = f * (c / dt)
        acc = term if acc is None else acc + term
    return acc


def symmetry_residual(traj, candidate: Callable[[FieldState], TwoComponentVector],
                      dt_probe: float | None = None, index: int | None = None) -> SymmetryResidual:
    """𝒜(Φ) at a stored time, with Φ_t from central differences of the candidate.

    Uses the 4th-order five-point stencil when the trajectory is deep enough
    around ``index`` (default: the middle state), otherwise three points.
    """
    states = traj.states
    if len(states) < 3:
        raise InsufficientTrajectory("symmetry_residual needs at least 3 stored states")
    stride = 1 if dt_probe is None else max(1, int(round(dt_probe / traj.dt)))
    mid = len(states) // 2 if index is None else index
    half = 2 if mid - 2 * stride >= 0 and mid + 2 * stride < len(states) else 1
    if mid - half * stride < 0 or mid + half * stride >= len(states):
        raise InsufficientTrajectory("not enough states around the probe time")
    window = [states[mid + k * stride] for k in range(-half, half + 1)]
    phis = [candidate(st) for st in window]
    phi = phis[half]
    phi_t = time_derivative(phis, stride * traj.dt)
    s = states[mid]
    res = apply_A(s, phi, phi_t)
    proj = res.project()
    return SymmetryResidual(proj.max_abs(), res.max_abs(), res.first.max_abs(), res.second.max_abs(), s.t)


def closed_form_phi_t(sid: SymmetryId, s: FieldState, h: float = 1e-4) -> TwoComponentVector:
    """∂_t of the characteristic along the flow, by the chain rule.

    The jet of (u, v) is advanced along flow_rhs by ±h (a linear map of the
    jet, so exact up to the h² remainder of the characteristic itself) and
    the explicit time dependence of the characteristic is differenced too.
    """
    from .state import flow_rhs

    rhs = flow_rhs(s)
    out = []
    for sign in (1.0, -1.0):
        jet = Jet.of(s.u + rhs.first * (sign * h), s.v + rhs.second * (sign * h))
        out.append(characteristic_from_jet(sid, jet, s.t + sign * h, s.epsilon, s.delta_a))
    return (out[0] - out[1]) * (1.0 / (2 * h))
