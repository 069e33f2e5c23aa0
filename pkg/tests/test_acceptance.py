"""Acceptance criteria 1-13 at the shipped tolerances.

Each test records one PASS/FAIL line; conftest prints the block at the end of
the run (``python3 tests/test_acceptance.py`` does the same on its own).

Grids: static operator identities (1, 3, 4, 5) run at 64³ because the
sin⁸-tapered fixtures are not resolved to 1e-9 at 32³; the finite-difference
oracle runs on 8³; the RK4 order study runs on 8³ where the FFT rounding floor
sits below the truncation error; everything else uses the default 32³.
The strict xfails at the bottom pin the literal readings that do not hold.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pytest

from sdgrav import fixtures as fx
from sdgrav.calculus import Grid3
from sdgrav.cli import main as cli_main
from sdgrav.flow import Trajectory, evolve
from sdgrav.hamiltonians import H0, H1, legendre_check, vgrad
from sdgrav.io import decode_snapshot, encode_snapshot
from sdgrav.metric import determinant_field, ricci_convergence, ricci_report, signature_census
from sdgrav.operators import apply_R1dag
from sdgrav import verify as vf

TITLES = {
    1: "inverse pair K(J0 p) = p",
    2: "skew-symmetry of J0, K, J1, J1bar, J0+2J1",
    3: "factorisations R1 = J1 K and R2 = J1bar K",
    4: "bi-Hamiltonian representations of the flow",
    5: "adjoint recursion chain and tri-Hamiltonian form",
    6: "variational-derivative oracle and Helmholtz symmetry",
    7: "Noether reconstruction",
    8: "symmetry condition along WAVE",
    9: "recursion maps symmetries to symmetries",
    10: "conservation over T = 0.1",
    11: "exact-solution convergence",
    12: "metric determinant, signature and Ricci flatness",
    13: "determinism and I/O",
}
RESULTS: dict[int, str] = {}

G64, G32, G8 = Grid3.cube(64), Grid3.cube(32), Grid3.cube(8)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float
    upper: bool = True  # value <= bound when True, value >= bound otherwise

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.value):
            return False
        return self.value <= self.bound if self.upper else self.value >= self.bound

    @property
    def margin(self) -> float:
        """How close to failing (larger is worse)."""
        if self.upper:
            return self.value / self.bound if self.bound > 0 else (0.0 if self.value <= 0 else math.inf)
        return self.bound / self.value if self.value > 0 else math.inf

    def __str__(self) -> str:
        op = "<=" if self.upper else ">="
        return f"{self.name} = {self.value:.3e} ({op} {self.bound:g})"


def from_rows(rows) -> list[Check]:
    return [Check(f"{r.check}[{r.fixture}]", r.residual, r.tol) for r in rows]


def record(n: int, checks: list[Check]) -> None:
    bad = [c for c in checks if not c.passed]
    worst = max(checks, key=lambda c: c.margin)
    status = "FAIL" if bad else "PASS"
    RESULTS[n] = (f"{status} criterion {n:2d} ({TITLES[n]}): {len(checks) - len(bad)}/{len(checks)} checks; "
                  f"tightest {worst}")
    assert not bad, "\n".join(str(c) for c in bad)


def summary_lines() -> list[str]:
    return [RESULTS.get(n, f"FAIL criterion {n:2d} ({TITLES[n]}): not run") for n in sorted(TITLES)]


# ---------------------------------------------------------------------------
# shared data
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def states64():
    return {"QSP": fx.qs_perturbed(G64, 1), "RAND": fx.rand(G64, 0)}


@lru_cache(maxsize=None)
def states32():
    return {"QSP": fx.qs_perturbed(G32, 1), "RAND": fx.rand(G32, 0)}


@lru_cache(maxsize=None)
def rand_trajectory() -> Trajectory:
    """RAND at 32³ evolved to T = 0.16 with dt = 2e-3 (shared by 9 and 12)."""
    return evolve(fx.rand(G32, 0), 0.16, 2e-3)


def wave_errors(grid: Grid3, dts, T: float = 0.1) -> list[float]:
    out = []
    for dt in dts:
        final = evolve(fx.wave_fluct(grid), T, dt).states[-1]
        exact = fx.wave_fluct(grid, final.t)
        out.append(float(max(np.max(np.abs(final.u_fluct - exact.u_fluct)),
                             np.max(np.abs(final.v_fluct - exact.v_fluct)))))
    return out


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_criterion_01_inverse_pair():
    record(1, from_rows(vf.check_inverse_pair(states64(), n=20, tol=1e-9)))


def test_criterion_02_skew_symmetry():
    record(2, from_rows(vf.check_skew(states32(), n=20, tol=1e-8)))


def test_criterion_03_factorisation():
    record(3, from_rows(vf.check_factorization(states64(), n=20, tol=1e-9)))


def test_criterion_04_bihamiltonian():
    rows = vf.check_bihamiltonian({"QS": fx.qs(G64), "RAND": states64()["RAND"]}, tol=1e-8, mean_tol=1e-10)
    record(4, from_rows(rows))


def test_criterion_05_adjoint_chain():
    rows = vf.check_hierarchy({"QS": fx.qs(G64)}, tol_adj=1e-9, tol_tri=1e-7)
    rows += vf.check_hierarchy({"RAND": states64()["RAND"]}, tol_adj=1e-9, tol_tri=1e-7, literal=False)
    record(5, from_rows(rows))


def test_criterion_06_vgrad_oracle():
    rows = []
    for name, s in (("QSP", fx.qs_perturbed(G8, 1)), ("RAND", fx.rand(G8, 0))):
        rows += vf.check_vgrad_oracle(s, name, tol=1e-5)
    for name, s in states32().items():
        rows += vf.check_helmholtz(s, name, tol=1e-6)
    record(6, from_rows(rows))


def test_criterion_07_noether():
    record(7, from_rows(vf.check_noether(states32(), tol=1e-8)))


def test_criterion_08_symmetry_condition():
    traj = vf.wave_trajectory(G32)
    record(8, from_rows(vf.check_symmetry_condition(traj, "WAVE", tol=1e-6, probe_tol=0.9)))


def test_criterion_09_recursion_symmetries():
    traj = rand_trajectory()
    short = Trajectory(traj.states[:11], traj.dt)
    record(9, from_rows(vf.check_recursion_symmetries(short, "RAND", tol=1e-5)))


def test_criterion_10_conservation():
    states = {"RAND": fx.rand(G32, 0), "RANDM": fx.rand(G32, 0, epsilon=-1)}
    record(10, from_rows(vf.check_conservation(states, T=0.1, dt=1e-3, tol=1e-6)))


def test_criterion_11_convergence():
    dts = (4e-3, 2e-3, 1e-3)
    errs = wave_errors(G8, dts)
    checks = [Check(f"rk4_order[dt {dts[i]:g}->{dts[i + 1]:g}]", math.log2(errs[i] / errs[i + 1]), 3.8, upper=False)
              for i in range(2)]
    for n in (8, 16, 32):
        (e,) = wave_errors(Grid3.cube(n), (1e-3,))
        checks.append(Check(f"spectral_floor[nx {n}]", e, 1e-10))
    record(11, checks)


def test_criterion_12_metric():
    checks = []
    traj = rand_trajectory()
    dets = {"QS": fx.qs(G32), "QSM": fx.qs_minus(G32), "WAVE": fx.wave(G32), "RAND": fx.rand(G32, 0),
            "RAND_evolved": traj.states[-1]}
    for name, s in dets.items():
        checks.append(Check(f"det_error[{name}]", float(np.max(np.abs(determinant_field(s) - 1 / 256))), 1e-10))
    for name, make in (("QS", fx.qs), ("WAVE", fx.wave)):
        rep = ricci_report([make(G32, 2e-3 * j) for j in range(5)])
        checks.append(Check(f"ricci[{name}]", rep.max_ricci, 1e-9))
    table = ricci_convergence(traj.states, traj.dt, (20, 10, 5))
    for (dt0, r0), (dt1, r1) in zip(table, table[1:]):
        checks.append(Check(f"ricci_factor[dt {dt0:g}->{dt1:g}]", r0 / r1, 12.0, upper=False))
    for name, s, pattern in (("QS", fx.qs(G32), "++++"), ("RAND", fx.rand(G32, 0), "++++"),
                             ("QSM", fx.qs_minus(G32), "++--")):
        checks.append(Check(f"census[{name}] {pattern}", signature_census(s).get(pattern, 0.0), 1.0, upper=False))
    record(12, checks)


def test_criterion_13_determinism(tmp_path):
    checks = []
    for name, s in (("RAND_evolved", rand_trajectory().states[-1]), ("QSM", fx.qs_minus(G8)),
                    ("WAVE_F", fx.wave_fluct(G8, 0.3))):
        back = decode_snapshot(encode_snapshot(s))
        same = (back.u_fluct.tobytes() == s.u_fluct.tobytes() and back.v_fluct.tobytes() == s.v_fluct.tobytes()
                and back.background == s.background and back.t == s.t and back.epsilon == s.epsilon)
        checks.append(Check(f"cmaf_roundtrip[{name}] mismatches", 0.0 if same else 1.0, 0.0))
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[grid]\nnx = 16\nny = 16\nnz = 16\n[evolve]\nt = 0.01\ndt = 2e-3\ncollar_width = 0\n"
                   "densities = H1,H3,H4\n[verify]\nsamples = 2\n")
    for cmd, files in ((["evolve"], ("conservation.csv", "growth.csv", "evolve_summary.csv")),
                       (["verify", "--suite", "operators"], ("verify_operators.csv",))):
        outs = [tmp_path / f"{cmd[0]}_{k}" for k in range(2)]
        for o in outs:
            cli_main(cmd + ["--config", str(cfg), "--seed", "5", "--out", str(o)])
        for f in files:
            same = (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
            checks.append(Check(f"csv_identical[{f}] mismatches", 0.0 if same else 1.0, 0.0))
    record(13, checks)


# ---------------------------------------------------------------------------
# literal readings that do not hold (analysis in the decisions ledger)
# ---------------------------------------------------------------------------

@pytest.mark.xfail(strict=True, reason="off the QS background R1†δH0 - δH1 = K(m) with m the plane-mean "
                                       "mismatch of J1δH0; P̃ does not remove it")
def test_adjoint_chain_literal_on_rand():
    s = states64()["RAND"]
    lhs = apply_R1dag(s, vgrad(H0, s)) - vgrad(H1, s)
    assert lhs.project().max_abs() <= 1e-9


@pytest.mark.xfail(strict=True, reason="the zero-plane-mean recursion operator drops y·m(x,t), z·m(x,t) terms; "
                                       "only the completed form maps time translation to a symmetry")
def test_zero_mean_recursion_on_time_translation():
    traj = rand_trajectory()
    short = Trajectory(traj.states[:11], traj.dt)
    rows = vf.check_recursion_symmetries(short, "RAND", tol=1e-5, complete_mean=False)
    assert all(r.passed for r in rows)


@pytest.mark.xfail(strict=True, reason="the fluctuation form of WAVE is not collar-supported, so the "
                                       "total-divergence term leaves a boundary flux")
def test_legendre_on_fluctuation_form_of_wave():
    assert legendre_check(fx.wave_fluct(Grid3.cube(16))) <= 1e-8


@pytest.mark.xfail(strict=True, reason="on 16³ the FFT rounding floor (~k_max² eps) reaches the 1e-17 "
                                       "truncation error of the finest step")
def test_rk4_order_on_16_cubed():
    errs = wave_errors(Grid3.cube(16), (4e-3, 2e-3, 1e-3))
    assert math.log2(errs[1] / errs[2]) >= 3.8


if __name__ == "__main__":
    code = pytest.main([__file__, "-q"])
    print("\n".join(summary_lines()))
    sys.exit(code)
