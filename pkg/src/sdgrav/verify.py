"""Verification checks shared by the ``verify`` command and the test suite.

Every check returns :class:`Row` objects (check id, fixture, residual,
tolerance, pass).  Suites group checks; their fixtures and grids come from
the caller so the same code runs at desk scale and in quick smoke tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import fixtures as fx
from .calculus import Grid3, PolyField, inner_product
from .flow import (
    evolve,
    evolve_with_monitor,
    higher_flow_rhs,
    trihamiltonian_residual,
)
from .hamiltonians import (
    H0,
    H0BAR,
    H1,
    H2ROT,
    H3,
    H4,
    BetaFunction,
    HarmonicAlpha,
    LinearAlpha,
    Halpha,
    Hbeta,
    all_density_ids,
    helmholtz_probe,
    vgrad,
    vgrad_oracle_error,
)
from .operators import apply_J, apply_J0, apply_K, apply_R, apply_R1dag, apply_pencil
from .state import FieldState, TwoComponentCovector, TwoComponentVector, flow_rhs
from .symmetries import (
    X1,
    X2,
    X3,
    X4,
    X5,
    Xalpha,
    Xbeta,
    characteristic,
    noether_residual,
    symmetry_residual,
)

EPS_MACH = float(np.finfo(float).eps)


@dataclass(frozen=True)
class Row:
    check: str
    fixture: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tol)

    def csv(self) -> list[str]:
        return [self.check, self.fixture, f"{self.residual:.6e}", f"{self.tol:.1e}", "1" if self.passed else "0"]


def _rel(diff, ref) -> float:
    return diff.max_abs() / max(ref.max_abs(), 1e-300)


# ---------------------------------------------------------------------------
# random test data
# ---------------------------------------------------------------------------

def random_pair(grid: Grid3, rng: np.random.Generator, cls=TwoComponentCovector, kmax: int = 2,
                project: bool = False):
    """Band-limited random periodic pair; no taper (periodic tests need none)."""
    f = cls.from_arrays(grid, fx.random_modes(grid, rng, kmax), fx.random_modes(grid, rng, kmax))
    return f.project() if project else f


def builtin_alphas():
    return [LinearAlpha(), HarmonicAlpha(1.0)]


def builtin_betas():
    return [BetaFunction(cy=1.0), BetaFunction(cz=1.0)]


def conserved_ids():
    return ([H1, H2ROT, H3, H4] + [Halpha(a) for a in builtin_alphas()]
            + [Hbeta(b) for b in builtin_betas()])


def point_symmetries():
    return [X1, X2, X3, X4, X5, Xalpha(LinearAlpha()), Xalpha(HarmonicAlpha(1.0)),
            Xbeta(BetaFunction(cy=1.0)), Xbeta(BetaFunction(cz=1.0))]


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def check_inverse_pair(states: dict[str, FieldState], n: int = 20, seed: int = 0, tol: float = 1e-9):
    rows = []
    for name, s in states.items():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n):
            p = random_pair(s.grid, rng)
            worst = max(worst, _rel(apply_K(s, apply_J0(s, p)) - p, p))
        rows.append(Row("inverse.K_J0", name, worst, tol))
    return rows


def _skew_ops():
    return {
        "J0": (TwoComponentCovector, apply_J0),
        "K": (TwoComponentVector, apply_K),
        "J1": (TwoComponentCovector, lambda s, p: apply_J("J1", s, p)),
        "J1bar": (TwoComponentCovector, lambda s, p: apply_J("J1bar", s, p)),
        "J0+2J1": (TwoComponentCovector, lambda s, p: apply_pencil(s, p, 1.0, 2.0)),
    }


def skew_defect(op: Callable, s: FieldState, f, g) -> float:
    a = inner_product(list(f), list(op(s, g)))
    b = inner_product(list(op(s, f)), list(g))
    return abs(a + b) / (abs(a) + EPS_MACH)


def check_skew(states: dict[str, FieldState], n: int = 20, seed: int = 1, tol: float = 1e-8,
               ops: Sequence[str] | None = None):
    rows = []
    table = _skew_ops()
    for name, s in states.items():
        for op_name in ops or table:
            cls, op = table[op_name]
            rng = np.random.default_rng(seed)
            worst = 0.0
            for _ in range(n):
                f = random_pair(s.grid, rng, cls, project=True)
                g = random_pair(s.grid, rng, cls, project=True)
                worst = max(worst, skew_defect(op, s, f, g))
            rows.append(Row(f"skew.{op_name}", name, worst, tol))
    return rows


def check_factorization(states: dict[str, FieldState], n: int = 20, seed: int = 2, tol: float = 1e-9):
    rows = []
    for name, s in states.items():
        rng = np.random.default_rng(seed)
        w1 = w2 = 0.0
        for _ in range(n):
            f = random_pair(s.grid, rng, TwoComponentVector)
            Kf = apply_K(s, f)
            a, b = apply_R(1, s, f).project(), apply_J("J1", s, Kf).project()
            w1 = max(w1, _rel(a - b, a))
            a, b = apply_R(2, s, f).project(), apply_J("J1bar", s, Kf).project()
            w2 = max(w2, _rel(a - b, a))
        rows += [Row("factor.R1_J1K", name, w1, tol), Row("factor.R2_J1barK", name, w2, tol)]
    return rows


def check_bihamiltonian(states: dict[str, FieldState], tol: float = 1e-8, mean_tol: float = 1e-10):
    """P̃[J1 δH0] = P̃[J0 δH1] = P̃[J̄1 δH̄0] = P̃[flow].  The unprojected mismatch on
    QS is reported too; it must be a pure plane-mean field."""
    rows = []
    for name, s in states.items():
        flow = flow_rhs(s)
        ref = flow.project()
        reps = {
            "J0_dH1": apply_J0(s, vgrad(H1, s)),
            "J1_dH0": apply_J("J1", s, vgrad(H0, s)),
            "J1bar_dH0bar": apply_J("J1bar", s, vgrad(H0BAR, s)),
        }
        for key, val in reps.items():
            rows.append(Row(f"biham.{key}", name, _rel(val.project() - ref, ref), tol))
            if name.upper().startswith("QS") and key != "J0_dH1":
                mism = val - flow
                rows.append(Row(f"biham.{key}.mean_sector", name, mism.project().max_abs(), mean_tol))
    return rows


# ---------------------------------------------------------------------------
# hamiltonians
# ---------------------------------------------------------------------------

def check_vgrad_oracle(s: FieldState, fixture: str, ids=None, tol: float = 1e-5):
    return [Row(f"vgrad_fd.{d.label}", fixture, vgrad_oracle_error(d, s), tol) for d in (ids or all_density_ids())]


def check_helmholtz(s: FieldState, fixture: str, ids=None, seed: int = 3, tol: float = 1e-6):
    rows = []
    rng = np.random.default_rng(seed)
    taper = fx.taper(s.grid)
    w1 = tuple(taper * fx.random_modes(s.grid, rng) for _ in range(2))
    w2 = tuple(taper * fx.random_modes(s.grid, rng) for _ in range(2))
    for d in ids or all_density_ids():
        rows.append(Row(f"helmholtz.{d.label}", fixture, helmholtz_probe(d, s, w1, w2).relative, tol))
    return rows


# ---------------------------------------------------------------------------
# symmetries
# ---------------------------------------------------------------------------

def check_noether(states: dict[str, FieldState], tol: float = 1e-8):
    sids = [X2, X3, X4, Xalpha(LinearAlpha()), Xalpha(HarmonicAlpha(1.0)),
            Xbeta(BetaFunction(cy=1.0)), Xbeta(BetaFunction(cz=1.0))]
    rows = []
    for name, s in states.items():
        for sid in sids:
            rows.append(Row(f"noether.{sid.label}", name, noether_residual(sid, s)[0], tol))
    return rows


def wave_trajectory(grid: Grid3, T: float = 0.04, dt: float = 5e-3):
    return evolve(fx.wave_fluct(grid), T, dt)


def check_symmetry_condition(traj, fixture: str, tol: float = 1e-6, probe_tol: float = 0.9,
                             corrupt: float = 0.0):
    """𝒜-residuals of the point characteristics along a trajectory.

    Rows 1 and 2 of 𝒜 are reported separately, unprojected: 𝒜 contains no
    Δ⁻¹, and on x-only data such as WAVE projection would hide everything.
    ``corrupt`` adds a constant to ψ (a seeded failure for testing).
    The probe (0, 1) is not a symmetry and must fail by at least probe_tol.
    """
    rows = []
    for sid in point_symmetries():
        def cand(st, sid=sid):
            phi = characteristic(sid, st)
            if corrupt:
                phi = TwoComponentVector(phi.first, phi.second + corrupt)
            return phi
        r = symmetry_residual(traj, cand)
        rows.append(Row(f"symeq.{sid.label}.row1", fixture, r.row1, tol))
        rows.append(Row(f"symeq.{sid.label}.row2", fixture, r.row2, tol))
    g = traj.states[0].grid
    probe = symmetry_residual(traj, lambda st: TwoComponentVector(PolyField.zeros(g), PolyField.constant(g, 1.0)))
    # passes when the probe fails by at least probe_tol
    rows.append(Row("symeq.probe_0_1.row1_shortfall", fixture, max(0.0, probe_tol - probe.row1), 0.0))
    return rows


def check_recursion_symmetries(traj, fixture: str, tol: float = 1e-5, complete_mean: bool = True):
    cands = {
        "X3": lambda st: characteristic(X3, st),
        "X4": lambda st: characteristic(X4, st),
        "time": flow_rhs,
    }
    rows = []
    for name, c in cands.items():
        for i in (1, 2):
            r = symmetry_residual(traj, lambda st, c=c, i=i: apply_R(i, st, c(st), complete_mean=complete_mean))
            rows.append(Row(f"recursion.R{i}.{name}", fixture, r.projected, tol))
    return rows


# ---------------------------------------------------------------------------
# conservation and hierarchy
# ---------------------------------------------------------------------------

def check_conservation(states: dict[str, FieldState], T: float = 0.1, dt: float = 1e-3, tol: float = 1e-6,
                       ids=None):
    rows = []
    for name, s in states.items():
        ids_ = ids or conserved_ids()
        _, rep = evolve_with_monitor(s, T, dt, ids_)
        for d in ids_:
            rows.append(Row(f"conservation.{d.label}", name, rep.drift(d.label), tol))
    return rows


def radj_mean_sector(s: FieldState):
    """Split R1†δH0 - δH1 into the part explained by the plane-constant
    mismatch m = J1δH0 - flow (through K) and whatever is left."""
    lhs = apply_R1dag(s, vgrad(H0, s)) - vgrad(H1, s)
    m = apply_J("J1", s, vgrad(H0, s)) - flow_rhs(s)
    left = (lhs - apply_K(s, m)).project()
    return lhs, m, left


def check_hierarchy(states: dict[str, FieldState], tol_adj: float = 1e-9, tol_tri: float = 1e-7,
                    literal: bool = True):
    """``literal=False`` drops the bare P̃[R1†δH0 - δH1] row, which only holds
    where a is constant (see radj_mean_sector)."""
    rows = []
    for name, s in states.items():
        lhs, m, left = radj_mean_sector(s)
        ref = vgrad(H1, s)
        if literal:
            rows.append(Row("hierarchy.R1dag_dH0_minus_dH1", name, lhs.project().max_abs(), tol_adj))
        rows.append(Row("hierarchy.R1dag_dH0_minus_dH1_minus_Km", name, left.max_abs() / max(ref.max_abs(), 1e-300),
                        tol_adj))
        rows.append(Row("hierarchy.trihamiltonian", name, trihamiltonian_residual(s), tol_tri))
    return rows


def check_qs_higher_flow(grid: Grid3, tol: float = 1e-12):
    return [Row("hierarchy.higher_flow_QS", "QS", higher_flow_rhs(fx.qs(grid)).projected.max_abs(), tol)]


SUITES = ("operators", "hamiltonians", "symmetries", "conservation", "hierarchy")


def run_suite(name: str, grid: Grid3, seed: int = 0, n: int = 20, tol: dict | None = None,
              corrupt: float = 0.0, fd_grid: Grid3 | None = None) -> list[Row]:
    """Run a named suite on the QS-perturbed and RAND fixtures at ``grid``."""
    tol = tol or {}
    states = {"QSP": fx.qs_perturbed(grid, seed + 1), "RAND": fx.rand(grid, seed)}
    if name == "operators":
        rows = check_inverse_pair(states, n, seed, tol.get("inverse", 1e-9))
        rows += check_skew(states, n, seed + 1, tol.get("skew", 1e-8))
        rows += check_factorization(states, n, seed + 2, tol.get("factorization", 1e-9))
        rows += check_bihamiltonian({"QS": fx.qs(grid), "RAND": states["RAND"]}, tol.get("bihamiltonian", 1e-8))
        return rows
    if name == "hamiltonians":
        g8 = fd_grid or Grid3.cube(8)
        s8 = fx.rand(g8, seed)
        return (check_vgrad_oracle(s8, "RAND", tol=tol.get("vgrad", 1e-5))
                + check_helmholtz(states["RAND"], "RAND", tol=tol.get("helmholtz", 1e-6)))
    if name == "symmetries":
        rows = check_noether(states, tol.get("noether", 1e-8))
        rows += check_symmetry_condition(wave_trajectory(grid), "WAVE", tol.get("symmetry", 1e-6), corrupt=corrupt)
        traj = evolve(states["RAND"], 0.02, 2e-3)
        rows += check_recursion_symmetries(traj, "RAND", tol.get("recursion", 1e-5))
        return rows
    if name == "conservation":
        return check_conservation({"RAND": states["RAND"], "RANDM": fx.rand(grid, seed, epsilon=-1)},
                                  tol=tol.get("conservation", 1e-6))
    if name == "hierarchy":
        rows = check_hierarchy({"QS": fx.qs(grid)}, tol.get("adjoint", 1e-9), tol.get("trihamiltonian", 1e-7))
        rows += check_hierarchy({"RAND": states["RAND"]}, tol.get("adjoint", 1e-9), tol.get("trihamiltonian", 1e-7),
                                literal=False)
        rows += check_qs_higher_flow(grid)
        return rows
    raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
