"""Operator algebra of the two-component system.

Multiplication operators sit inside total derivatives exactly as written:
``D_y∘c`` applied to ``f`` is ``D_y(c f)``.  Operators containing Δ⁻¹ use the
zero-plane-mean inverse of :func:`calculus.inv_laplacian_yz`, so their
outputs are meaningful modulo the plane-mean sector; compare them after
:meth:`project`.

Sign conventions worth knowing: R2 is normalised so that R2 = J̄1∘K, and the
(2,2) entry of the nonlocal part of R1† is ``-a D_x D_y``, which is what makes
R1† the adjoint of R1.
"""
from __future__ import annotations

from dataclasses import dataclass

from .calculus import PolyField, D, inv_laplacian_yz, laplacian_yz
from .state import FieldState, TwoComponentCovector, TwoComponentVector, coefficients

_CHOP = 1e-13


def _vec(f, g) -> TwoComponentVector:
    return TwoComponentVector(f.chop(_CHOP), g.chop(_CHOP))


def _cov(f, g) -> TwoComponentCovector:
    return TwoComponentCovector(f.chop(_CHOP), g.chop(_CHOP))


def _need(obj, cls):
    if not isinstance(obj, cls):
        raise TypeError(f"expected {cls.__name__}, got {type(obj).__name__}")


@dataclass(frozen=True)
class OperatorId:
    name: str
    n: int = 0

    NAMES = ("J0", "K", "J1", "J1bar", "R1", "R2", "R1dag", "Jchain", "A")

    def __post_init__(self):
        if self.name not in self.NAMES:
            raise ValueError(f"unknown operator {self.name!r}")


def q_minus(s: FieldState) -> PolyField:
    co = coefficients(s)
    return (co.c * co.c - co.b * co.b + float(s.epsilon)) / co.a


def q_plus(s: FieldState) -> PolyField:
    co = coefficients(s)
    return (co.b * co.b - co.c * co.c + float(s.epsilon)) / co.a


# ---------------------------------------------------------------------------
# J0 and K
# ---------------------------------------------------------------------------

def apply_J0(s: FieldState, p: TwoComponentCovector) -> TwoComponentVector:
    _need(p, TwoComponentCovector)
    co = coefficients(s)
    a, b, c = co.a, co.b, co.c
    P, q = p
    a2 = a * a
    second = (-P / a + (c * D(q, "y") - b * D(q, "z")) / a2
              + D(c * q / a2, "y") - D(b * q / a2, "z"))
    return _vec(q / a, second)


def apply_K(s: FieldState, f: TwoComponentVector) -> TwoComponentCovector:
    _need(f, TwoComponentVector)
    co = coefficients(s)
    a, b, c = co.a, co.b, co.c
    f1, f2 = f
    first = c * D(f1, "y") - b * D(f1, "z") + D(c * f1, "y") - D(b * f1, "z") - a * f2
    return _cov(first, a * f1)


# ---------------------------------------------------------------------------
# recursion operators
# ---------------------------------------------------------------------------

def _inv(f: PolyField, complete: bool = False) -> PolyField:
    return inv_laplacian_yz(f, complete=complete)


def _r1_parts(s, f):
    co = coefficients(s)
    a, b, c, Q = co.a, co.b, co.c, co.Q
    F, G = f
    Fx, Fy, Fz = D(F, "x"), D(F, "y"), D(F, "z")
    local2 = Q * Fz - c * Fx + b * G
    inner = c * Fy - b * Fz
    # r1 = D_y X + D_z Y and r2 = D_x D_y Y - D_x D_z X
    return local2, -a * Fx + b * Fy + c * Fz, inner - a * G


def _r2_parts(s, f):
    co = coefficients(s)
    a, b, c, Q = co.a, co.b, co.c, co.Q
    F, G = f
    Fx, Fy, Fz = D(F, "x"), D(F, "y"), D(F, "z")
    local2 = b * Fx - Q * Fy + c * G
    # r1 = D_y X + D_z Y and r2 = D_x D_y Y - D_x D_z X, with the roles below
    return local2, b * Fz - c * Fy + a * G, -a * Fx + b * Fy + c * Fz


def _nonlocal(X, Y, complete: bool):
    if complete:
        iX, iY = _inv(X, True), _inv(Y, True)
        return D(iX, "y") + D(iY, "z"), D(iY, "x", "y") - D(iX, "x", "z")
    r1 = D(X, "y") + D(Y, "z")
    r2 = D(Y, "x", "y") - D(X, "x", "z")
    return _inv(r1), _inv(r2)


def apply_R(i: int, s: FieldState, f: TwoComponentVector, complete_mean: bool = False) -> TwoComponentVector:
    """Recursion operator R1 or R2 applied to a vector.

    The nonlocal entries have the form Δ⁻¹(D_y X + D_z Y).  By default Δ⁻¹ is
    applied after the derivatives, so any plane-mean content of X and Y is
    lost.  With ``complete_mean=True`` it is applied first, using the
    polynomial completion of the plane means, and the derivatives act
    afterwards.  Both agree after projection on periodic input; only the
    completed form maps time translation to a symmetry of the flow (its image
    carries y·m(x,t) and z·m(x,t) terms that the zero-mean inverse drops).
    """
    _need(f, TwoComponentVector)
    if i == 1:
        local2, X, Y = _r1_parts(s, f)
        n1, n2 = _nonlocal(X, Y, complete_mean)
        return _vec(n1, local2 + n2)
    if i == 2:
        local2, X, Y = _r2_parts(s, f)
        n1, n2 = _nonlocal(X, Y, complete_mean)
        return _vec(-n1, -(local2 + n2))
    raise ValueError("recursion operator index must be 1 or 2")


def apply_R1dag(s: FieldState, p: TwoComponentCovector, complete_mean: bool = False) -> TwoComponentCovector:
    """Adjoint recursion operator: local part plus (nonlocal matrix)∘Δ⁻¹.

    Δ⁻¹ acts first on the raw covector, so its plane means matter.  By
    default they are dropped; ``complete_mean=True`` inverts them with a
    polynomial particular solution instead, which is what chain covectors such
    as R1†·δH1 need.  The nonlocal matrix annihilates the harmonic freedom in
    that choice for covectors with x-independent means, and in practice
    different completions agree to round-off.
    """
    _need(p, TwoComponentCovector)
    co = coefficients(s)
    a, b, c, Q = co.a, co.b, co.c, co.Q
    P, q = p
    local1 = D(c * q, "x") - D(Q * q, "z")
    local2 = b * q
    P_, q_ = _inv(P, complete_mean), _inv(q, complete_mean)
    Py, Pz = D(P_, "y"), D(P_, "z")
    r1 = (-D(a * Py, "x") + D(b * Py, "y") + D(c * Py, "z") + D(c * Pz, "y") - D(b * Pz, "z"))
    w = D(q_, "x")
    wy, wz = D(w, "y"), D(w, "z")
    r1 = r1 + D(b * wy, "z") - D(c * wy, "y") - D(a * wz, "x") + D(b * wz, "y") + D(c * wz, "z")
    r2 = a * Pz - a * D(q_, "x", "y")
    return _cov(local1 + r1, local2 + r2)


# ---------------------------------------------------------------------------
# second Hamiltonian operators
# ---------------------------------------------------------------------------

def _j1(s, p):
    co = coefficients(s)
    a, b, c = co.a, co.b, co.c
    P, q = p
    qm = q_minus(s)
    a2 = a * a
    nl1 = D(P, "z") - D(q, "x", "y")
    nl2 = D(P, "x", "y") + D(q, "x", "x", "z")
    lo1 = b * q / a
    lo2 = (-b * P / a + c / a2 * (b * D(q, "y") - a * D(q, "x"))
           + D(b * c * q / a2, "y") - D(a * c * q / a2, "x")
           + qm / (a * 2.0) * D(q, "z") + D(qm * q / (a * 2.0), "z"))
    return _vec(_inv(nl1) + lo1, _inv(nl2) + lo2)


def _j1bar(s, p):
    co = coefficients(s)
    a, b, c = co.a, co.b, co.c
    P, q = p
    qp = q_plus(s)
    a2 = a * a
    nl1 = D(P, "y") + D(q, "x", "z")
    nl2 = -D(P, "x", "z") + D(q, "x", "x", "y")
    lo1 = -(c * q / a)
    lo2 = (c * P / a + b / a2 * (c * D(q, "z") - a * D(q, "x"))
           + D(c * b * q / a2, "z") - D(a * b * q / a2, "x")
           + qp / (a * 2.0) * D(q, "y") + D(qp * q / (a * 2.0), "y"))
    return _vec(_inv(nl1) + lo1, _inv(nl2) + lo2)


def apply_J(level, s: FieldState, p: TwoComponentCovector) -> TwoComponentVector:
    """Second-level Hamiltonian operators.

    ``level`` is ``"J1"``, ``"J1bar"`` or an integer n >= 0 for the chain
    operator R1ⁿ∘J0.
    """
    _need(p, TwoComponentCovector)
    if level == "J1":
        return _j1(s, p)
    if level == "J1bar":
        return _j1bar(s, p)
    if isinstance(level, int) and level >= 0:
        out = apply_J0(s, p)
        for _ in range(level):
            out = apply_R(1, s, out)
        return out
    raise ValueError(f"unknown Hamiltonian operator level {level!r}")


def apply_pencil(s: FieldState, p: TwoComponentCovector, c0: float, c1: float) -> TwoComponentVector:
    return apply_J0(s, p) * c0 + apply_J("J1", s, p) * c1


def apply_operator(op: OperatorId, s: FieldState, x):
    """Dispatch on an :class:`OperatorId` (A is excluded: it needs phi_t)."""
    name = op.name
    if name == "J0":
        return apply_J0(s, x)
    if name == "K":
        return apply_K(s, x)
    if name in ("J1", "J1bar"):
        return apply_J(name, s, x)
    if name == "Jchain":
        return apply_J(op.n, s, x)
    if name == "R1":
        return apply_R(1, s, x)
    if name == "R2":
        return apply_R(2, s, x)
    if name == "R1dag":
        return apply_R1dag(s, x)
    raise ValueError("operator A needs phi_t; call apply_A")


# ---------------------------------------------------------------------------
# symmetry condition
# ---------------------------------------------------------------------------

def _elliptic_part(s: FieldState, phi1: PolyField) -> PolyField:
    co = coefficients(s)
    a, b, c, Q = co.a, co.b, co.c, co.Q
    px = D(phi1, "x")
    return D(px, "x") - (c * D(px, "z") + b * D(px, "y")) * 2.0 / a + Q / a * laplacian_yz(phi1)


def _transport_part(s: FieldState, phi2: PolyField) -> PolyField:
    co = coefficients(s)
    return (co.c * D(phi2, "y") - co.b * D(phi2, "z")) * 2.0 / co.a


def apply_A(s: FieldState, phi: TwoComponentVector, phi_t: TwoComponentVector) -> TwoComponentVector:
    """Fréchet derivative of the flow applied to (Φ, Φ_t); zero for symmetries."""
    _need(phi, TwoComponentVector)
    _need(phi_t, TwoComponentVector)
    p1, p2 = phi
    t1, t2 = phi_t
    return _vec(t1 - p2, _elliptic_part(s, p1) + t2 - _transport_part(s, p2))


def linearized_rhs(s: FieldState, phi: TwoComponentVector) -> TwoComponentVector:
    """(φ_t, ψ_t) solving 𝒜(Φ) = 0: the tangent-flow right-hand side."""
    _need(phi, TwoComponentVector)
    p1, p2 = phi
    return _vec(p2, -_elliptic_part(s, p1) + _transport_part(s, p2))
