"""Time integration, tangent flow, first higher flow and conservation monitoring.

For ε = +1 the system is elliptic in (t, x, y, z), so marching in t is an
ill-posed Cauchy problem: a mode of 4-wavenumber |k| grows like exp(|k| t).
Runs are therefore limited to band-limited data and a growth budget
exp(k_max T) <= budget, and an optional exponential low-pass filter can be
switched on (it is off by default).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .calculus import Grid3, _wavenumbers
from .hamiltonians import CollarSpec, DensityId, H1, check_collar, collar_max, relative_functional, vgrad
from .operators import apply_J, apply_J0, apply_R1dag, linearized_rhs
from .state import DegenerateState, FieldState, TwoComponentVector, fluctuation_rhs


class GrowthBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class FilterSpec:
    """Exponential filter exp(-strength (|k|/k_nyq)^order) applied per axis."""

    strength: float = 36.0
    order: int = 16
    cutoff: float = 0.0  # fraction of the Nyquist wavenumber below which modes are untouched

    def factors(self, grid: Grid3) -> list[np.ndarray]:
        out = []
        for ax, (n, L) in enumerate(zip(grid.shape, grid.lengths)):
            k = np.abs(2 * np.pi * sfft.fftfreq(n, d=L / n)) if ax < 2 else _wavenumbers(n, L, True)
            kn = np.pi * n / L
            r = np.clip((k / kn - self.cutoff) / max(1 - self.cutoff, 1e-12), 0, None)
            out.append(np.exp(-self.strength * r**self.order))
        return out

    def apply(self, arr: np.ndarray, grid: Grid3) -> np.ndarray:
        fx, fy, fz = self.factors(grid)
        h = sfft.rfftn(arr)
        h *= fx[:, None, None] * fy[None, :, None] * fz[None, None, :]
        return sfft.irfftn(h, s=grid.shape)


def max_wavenumber(grid: Grid3) -> float:
    """Largest retained 3-D wavenumber magnitude (Nyquist excluded)."""
    ks = [2 * np.pi / L * (n // 2 - 1) for n, L in zip(grid.shape, grid.lengths)]
    return float(np.sqrt(sum(k * k for k in ks)))


def check_growth_budget(grid: Grid3, T: float, budget: float) -> None:
    bound = max_wavenumber(grid) * T
    if bound > math.log(budget):
        raise GrowthBudgetExceeded(
            f"exp(k_max T) = exp({bound:.3g}) exceeds the growth budget {budget:g}"
        )


def high_band_amplitude(u: np.ndarray, v: np.ndarray, grid: Grid3) -> float:
    """Energy-like norm sqrt(Σ |k|²|û|² + |v̂|²) over modes whose largest index
    exceeds a quarter of the grid.

    For the linearisation δu_tt = -Δ₄δu a mode of wavenumber k has
    |k|²|û|² + |v̂|² = k²|û₀|² cosh(2kt) when it starts from rest, so this
    norm never grows faster than exp(k t).
    """
    masks, ks = [], []
    for ax, (n, L) in enumerate(zip(grid.shape, grid.lengths)):
        idx = np.abs(sfft.fftfreq(n) * n) if ax < 2 else np.arange(n // 2 + 1)
        masks.append(idx > n // 4)
        ks.append(idx * (2 * np.pi / L))
    m = masks[0][:, None, None] | masks[1][None, :, None] | masks[2][None, None, :]
    k2 = ks[0][:, None, None] ** 2 + ks[1][None, :, None] ** 2 + ks[2][None, None, :] ** 2
    uh, vh = sfft.rfftn(u), sfft.rfftn(v)
    e = k2 * np.abs(uh) ** 2 + np.abs(vh) ** 2
    return float(np.sqrt(np.sum(e[m])) / u.size)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def _stage(s: FieldState, t: float, du, dv) -> FieldState:
    return s.replace(t=t, u_fluct=du, v_fluct=dv)


def _increment(s: FieldState, dt: float) -> tuple[np.ndarray, np.ndarray]:
    u0, v0 = s.u_fluct, s.v_fluct
    try:
        k1 = fluctuation_rhs(s)
        s2 = _stage(s, s.t + dt / 2, u0 + dt / 2 * k1[0], v0 + dt / 2 * k1[1])
        k2 = fluctuation_rhs(s2)
        s3 = _stage(s, s.t + dt / 2, u0 + dt / 2 * k2[0], v0 + dt / 2 * k2[1])
        k3 = fluctuation_rhs(s3)
        s4 = _stage(s, s.t + dt, u0 + dt * k3[0], v0 + dt * k3[1])
        k4 = fluctuation_rhs(s4)
    except DegenerateState as exc:
        raise DegenerateState(f"step from t={s.t:.6g} with dt={dt:g}: {exc}") from exc
    du = dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    dv = dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return du, dv


def _finish(s: FieldState, dt: float, u1, v1, filt: FilterSpec | None) -> FieldState:
    if filt is not None:
        u1, v1 = filt.apply(u1, s.grid), filt.apply(v1, s.grid)
    if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(v1))):
        raise GrowthBudgetExceeded(f"non-finite fluctuation after step at t={s.t:.6g}")
    return _stage(s, s.t + dt, u1, v1)


def step(s: FieldState, dt: float, filt: FilterSpec | None = None) -> FieldState:
    """One classical RK4 step of the fluctuation; the background moves analytically."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    du, dv = _increment(s, dt)
    return _finish(s, dt, s.u_fluct + du, s.v_fluct + dv, filt)


class _Compensated:
    """Kahan summation of successive increments, so that rounding in the
    state update does not accumulate over many small steps."""

    def __init__(self, shape):
        self.carry = np.zeros(shape)

    def add(self, x, inc):
        y = inc - self.carry
        total = x + y
        self.carry = (total - x) - y
        return total


@dataclass
class Trajectory:
    states: list[FieldState]
    dt: float
    scheme: str = "rk4"
    filter: FilterSpec | None = None
    collar: CollarSpec | None = None
    growth: list[float] = field(default_factory=list)
    collar_monitor: list[float] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def __len__(self):
        return len(self.states)

    def window(self, center: int, half: int = 2) -> "Trajectory":
        return Trajectory(self.states[center - half:center + half + 1], self.dt, self.scheme,
                          self.filter, self.collar)


def evolve(s: FieldState, T: float, dt: float, filt: FilterSpec | None = None,
           collar: CollarSpec | None = None, budget: float = 1e6, a_priori: bool = True,
           on_step: Callable[[int, FieldState], None] | None = None) -> Trajectory:
    """March s to time s.t + T with uniform steps, recording every state.

    Before stepping, exp(k_max T) is checked against ``budget`` (skip with
    ``a_priori=False``).  While stepping, the high-band amplitude is tracked
    relative to its starting value, floored at 1e-6 of the total starting
    amplitude so that modes created by the nonlinearity from nothing do not
    count as amplification.  Passing the budget, or any non-finite value,
    raises GrowthBudgetExceeded.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if a_priori:
        check_growth_budget(s.grid, T, budget)
    nsteps = int(round(T / dt))
    if nsteps < 1 or abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a positive integer multiple of dt")
    check_collar(s, collar)
    traj = Trajectory([s], dt, "rk4", filt, collar)

    def amp(st):
        return high_band_amplitude(st.u_fluct, st.v_fluct, st.grid)

    total0 = float(np.sqrt(np.mean(s.u_fluct**2)) + np.sqrt(np.mean(s.v_fluct**2)))
    base = max(amp(s), 1e-6 * total0, 1e-300)
    prev = amp(s)
    traj.collar_monitor.append(collar_max(s, collar.width) if collar else 0.0)
    if on_step:
        on_step(0, s)
    cur = s
    comp_u, comp_v = _Compensated(s.grid.shape), _Compensated(s.grid.shape)
    for n in range(1, nsteps + 1):
        du, dv = _increment(cur, dt)
        if filt is None:
            u1, v1 = comp_u.add(cur.u_fluct, du), comp_v.add(cur.v_fluct, dv)
        else:
            u1, v1 = cur.u_fluct + du, cur.v_fluct + dv
        cur = _finish(cur, dt, u1, v1, filt)
        now = amp(cur)
        traj.growth.append(now / prev if prev > 0 else float("inf") if now > 0 else 1.0)
        prev = now
        if now / base > budget:
            raise GrowthBudgetExceeded(
                f"high-band amplitude grew by {now / base:.3g} (budget {budget:g}) by t={cur.t:.6g}"
            )
        if collar is not None:
            traj.collar_monitor.append(collar_max(cur, collar.width))
            check_collar(cur, collar)
        traj.states.append(cur)
        if on_step:
            on_step(n, cur)
    return traj


@dataclass
class ConservationReport:
    ids: list[DensityId]
    times: np.ndarray
    values: dict[str, np.ndarray]

    def drift(self, label: str) -> float:
        """max_t |F(t) - F(0)| / |F(0)|, or the absolute drift when F(0) = 0."""
        v = self.values[label]
        ref = abs(v[0])
        d = float(np.max(np.abs(v - v[0])))
        return d / ref if ref > 0 else d

    def rows(self):
        for label, vals in self.values.items():
            for n, (t, f) in enumerate(zip(self.times, vals)):
                d = abs(f - vals[0]) / abs(vals[0]) if vals[0] != 0 else abs(f - vals[0])
                yield n, t, label, f, d


def evolve_with_monitor(s: FieldState, T: float, dt: float, densities: Sequence[DensityId],
                        filt: FilterSpec | None = None, collar: CollarSpec | None = CollarSpec(width=1, tol=1e-5),
                        budget: float = 1e6) -> tuple[Trajectory, ConservationReport]:
    """Evolve and record the relative functional of each density at every step."""
    series: dict[str, list[float]] = {d.label: [] for d in densities}

    def record(n, st):
        for d in densities:
            series[d.label].append(relative_functional(d, st))

    traj = evolve(s, T, dt, filt, collar, budget, on_step=record)
    rep = ConservationReport(list(densities), traj.times, {k: np.array(v) for k, v in series.items()})
    return traj, rep


# ---------------------------------------------------------------------------
# tangent flow
# ---------------------------------------------------------------------------

def _interpolated_state(traj: Trajectory, t: float) -> FieldState:
    """Cubic Lagrange interpolation of the stored fluctuations at time t."""
    states = traj.states
    n = len(states)
    if n < 4:
        raise ValueError("tangent_evolve needs at least 4 stored states")
    t0 = states[0].t
    i = int(math.floor((t - t0) / traj.dt))
    i0 = min(max(i - 1, 0), n - 4)
    nodes = [states[i0 + k] for k in range(4)]
    ts = [st.t for st in nodes]
    w = []
    for j in range(4):
        c = 1.0
        for m in range(4):
            if m != j:
                c *= (t - ts[m]) / (ts[j] - ts[m])
        w.append(c)
    u = sum(c * st.u_fluct for c, st in zip(w, nodes))
    v = sum(c * st.v_fluct for c, st in zip(w, nodes))
    return states[0].replace(t=t, u_fluct=u, v_fluct=v)


def tangent_evolve(traj: Trajectory, phi0: TwoComponentVector) -> list[TwoComponentVector]:
    """Integrate the linearised flow along a stored trajectory with RK4."""
    states = traj.states
    dt = traj.dt
    out = [phi0]
    phi = phi0
    for n in range(len(states) - 1):
        s0, s1 = states[n], states[n + 1]
        mid = _interpolated_state(traj, s0.t + dt / 2)
        k1 = linearized_rhs(s0, phi)
        k2 = linearized_rhs(mid, phi + k1 * (dt / 2))
        k3 = linearized_rhs(mid, phi + k2 * (dt / 2))
        k4 = linearized_rhs(s1, phi + k3 * dt)
        phi = (phi + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6)).chop(1e-14)
        out.append(phi)
    return out


# ---------------------------------------------------------------------------
# first higher flow
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HigherFlow:
    projected: TwoComponentVector
    raw: TwoComponentVector

    @property
    def mean_sector(self) -> TwoComponentVector:
        return self.raw - self.projected


def higher_flow_rhs(s: FieldState) -> HigherFlow:
    """J1·δH1, the first higher flow of the hierarchy."""
    raw = apply_J("J1", s, vgrad(H1, s))
    return HigherFlow(raw.project(), raw)


def chain_covector(s: FieldState, n: int = 1):
    """(R1†)ⁿ δH1 with the plane-mean sector completed polynomially."""
    p = vgrad(H1, s)
    for _ in range(n):
        p = apply_R1dag(s, p, complete_mean=True)
    return p


def trihamiltonian_residual(s: FieldState) -> float:
    """Relative max-norm of P̃[J1 δH1 - J0 R1† δH1]."""
    lhs = higher_flow_rhs(s).projected
    rhs = apply_J0(s, chain_covector(s, 1)).project()
    return (lhs - rhs).max_abs() / max(lhs.max_abs(), rhs.max_abs(), 1e-300)


def commuting_flows_probe(s: FieldState, dt: float, dtau: float) -> float:
    """Max-norm gap between (flow dt, then higher flow dtau) and the reverse.

    Each leg is a single forward-Euler step on the fluctuation, so the gap is
    O(dt dtau (dt + dtau)) plus the commutator, which vanishes for commuting
    flows.  Reported, not gated.
    """
    def flow_leg(st, h):
        du, dv = fluctuation_rhs(st)
        return st.replace(t=st.t + h, u_fluct=st.u_fluct + h * du, v_fluct=st.v_fluct + h * dv)

    def higher_leg(st, h):
        hf = higher_flow_rhs(st).projected
        return st.replace(u_fluct=st.u_fluct + h * hf.first.coefficient((0, 0, 0)),
                          v_fluct=st.v_fluct + h * hf.second.coefficient((0, 0, 0)))

    a = higher_leg(flow_leg(s, dt), dtau)
    b = flow_leg(higher_leg(s, dtau), dt)
    return float(max(np.max(np.abs(a.u_fluct - b.u_fluct)), np.max(np.abs(a.v_fluct - b.v_fluct))))
