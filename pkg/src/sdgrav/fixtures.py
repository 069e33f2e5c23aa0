"""Named reference states shared by the tests, the CLI and the acceptance run.

QS, QSM      quadratic solution backgrounds (ε = +1 and ε = -1), no fluctuation.
WAVE         QS background carrying the harmonic extra A sin(kx) e^{-kt}.
WAVE_F       the same solution with the harmonic stored as a fluctuation, so
             that the integrator actually has something to advance.
QSP          QS plus a tapered u-only fluctuation.
RAND         seeded band-limited tapered fluctuation in u and v.
"""
from __future__ import annotations

import numpy as np

from .calculus import Grid3
from .state import Background, FieldState

FIXTURE_VERSION = 2
WAVE_AMPLITUDE = 0.01
WAVE_K = 1.0
FIXTURES = ("QS", "QSM", "WAVE", "WAVE_F", "QSP", "RAND", "RANDM")


def qs_background(epsilon: int = 1) -> Background:
    return Background.solution(epsilon, 1.0 if epsilon == 1 else -1.0)


def qs(grid: Grid3, t: float = 0.0) -> FieldState:
    return FieldState.background_only(grid, t, 1, qs_background(1))


def qs_minus(grid: Grid3, t: float = 0.0) -> FieldState:
    return FieldState.background_only(grid, t, -1, qs_background(-1))


def wave_background(amplitude=WAVE_AMPLITUDE, k=WAVE_K) -> Background:
    return Background.solution(1, 1.0, amplitude=amplitude, wavenumber=k, sign=-1.0)


def wave(grid: Grid3, t: float = 0.0, amplitude=WAVE_AMPLITUDE, k=WAVE_K) -> FieldState:
    return FieldState.background_only(grid, t, 1, wave_background(amplitude, k))


def wave_fluct(grid: Grid3, t: float = 0.0, amplitude=WAVE_AMPLITUDE, k=WAVE_K) -> FieldState:
    x = np.broadcast_to(grid.mesh(0), grid.shape)
    decay = amplitude * np.exp(-k * t)
    u = decay * np.sin(k * x)
    v = -k * decay * np.sin(k * x)
    return FieldState(grid, t, 1, u, v, qs_background(1))


def taper(grid: Grid3, power: int = 8) -> np.ndarray:
    """Product of sin^power(π s / L) over the three axes; vanishes on the faces."""
    out = np.ones(grid.shape)
    for ax in range(3):
        s = grid.mesh(ax) * (np.pi / grid.lengths[ax])
        out = out * np.sin(s) ** power
    return out


def random_modes(grid: Grid3, rng: np.random.Generator, kmax: int = 1) -> np.ndarray:
    """Random real trigonometric polynomial with |k_i| <= kmax, max-normalised on
    a fine lattice so the amplitude does not depend on the grid."""
    ks = range(-kmax, kmax + 1)
    modes = [(a, b, c) for a in ks for b in ks for c in ks]
    coef = rng.standard_normal(len(modes))
    phase = rng.uniform(0, 2 * np.pi, len(modes))

    def evaluate(g: Grid3) -> np.ndarray:
        # Σ w cos(k·x + p) placed on the FFT lattice; exact for |k_i| < n_i/2
        C = np.zeros(g.shape, dtype=complex)
        N = C.size
        for (a, b, c), w, p in zip(modes, coef, phase):
            C[a % g.nx, b % g.ny, c % g.nz] += 0.5 * N * w * np.exp(1j * p)
            C[-a % g.nx, -b % g.ny, -c % g.nz] += 0.5 * N * w * np.exp(-1j * p)
        return np.fft.ifftn(C).real

    ref = np.max(np.abs(evaluate(Grid3(32, 32, 32, *grid.lengths))))
    return evaluate(grid) / ref


def rand_fluctuation(grid: Grid3, seed: int = 0, amp_u: float = 0.02, amp_v: float = 0.02,
                     kmax: int = 1, taper_power: int = 8) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    T = taper(grid, taper_power)
    gu = random_modes(grid, rng, kmax)
    gv = random_modes(grid, rng, kmax)
    return amp_u * T * gu, amp_v * T * gv


def rand(grid: Grid3, seed: int = 0, epsilon: int = 1, t: float = 0.0, amp_u: float = 0.02,
         amp_v: float = 0.02, taper_power: int = 8) -> FieldState:
    u, v = rand_fluctuation(grid, seed, amp_u, amp_v, taper_power=taper_power)
    return FieldState(grid, t, epsilon, u, v, qs_background(epsilon))


def qs_perturbed(grid: Grid3, seed: int = 1, amp: float = 0.02) -> FieldState:
    u, _ = rand_fluctuation(grid, seed, amp, 0.0)
    return FieldState(grid, 0.0, 1, u, np.zeros(grid.shape), qs_background(1))


def by_name(name: str, grid: Grid3, seed: int = 0) -> FieldState:
    key = name.upper().replace("-", "M").replace("QSMINUS", "QSM")
    if key == "QS":
        return qs(grid)
    if key == "QSM":
        return qs_minus(grid)
    if key == "WAVE":
        return wave(grid)
    if key == "WAVE_F":
        return wave_fluct(grid)
    if key == "QSP":
        return qs_perturbed(grid, seed)
    if key == "RAND":
        return rand(grid, seed)
    if key == "RANDM":
        return rand(grid, seed, epsilon=-1)
    raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
