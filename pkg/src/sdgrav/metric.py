"""Four-metric built from a state, its determinant, signature and Ricci tensor.

Coordinates are ordered (t, x, y, z) and

    g = ¼ [[Q, 0, c, -b],
           [0, Q, b,  c],
           [c, b, a,  0],
           [-b, c, 0, a]].

Qa - b² - c² = ε makes det g = 1/256 exactly; the numerical determinant is a
check on the coefficient pipeline.  Ricci is computed from coordinate
Christoffel symbols with spectral derivatives in space and fourth-order
central differences in time across a stack of five stored states.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calculus import ONE, UnsupportedShape, _spectral
from .state import FieldState, coefficients

_D1 = np.array([1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12])
_D2 = np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12])


class StackTooShallow(ValueError):
    pass


def _periodic(f, name):
    if set(f.terms) - {ONE}:
        raise UnsupportedShape(f"metric coefficient {name} carries coordinate monomials")
    return f.coefficient(ONE)


def metric_field(s: FieldState) -> np.ndarray:
    """g_{μν} at every node, shape (4, 4, nx, ny, nz)."""
    co = coefficients(s)
    a, b, c, Q = (_periodic(f, n) for f, n in ((co.a, "a"), (co.b, "b"), (co.c, "c"), (co.Q, "Q")))
    z = np.zeros_like(a)
    g = np.array([[Q, z, c, -b],
                  [z, Q, b, c],
                  [c, b, a, z],
                  [-b, c, z, a]])
    return 0.25 * g


@dataclass(frozen=True)
class MetricSample:
    g: np.ndarray
    node: tuple[int, int, int]
    t: float

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.g))

    @property
    def signature(self) -> str:
        ev = np.linalg.eigvalsh(self.g)
        return "".join("+" if e > 0 else "-" for e in sorted(ev, reverse=True))


def metric_at(stack, node: tuple[int, int, int]) -> MetricSample:
    """Metric at a node of the middle state of a stack (or of a single state)."""
    s = _middle(stack)
    g = metric_field(s)
    i, j, k = node
    return MetricSample(np.array(g[:, :, i, j, k]), tuple(node), s.t)


def _states(stack) -> list[FieldState]:
    if isinstance(stack, FieldState):
        return [stack]
    return list(getattr(stack, "states", stack))


def _middle(stack) -> FieldState:
    st = _states(stack)
    return st[len(st) // 2]


def determinant_field(s: FieldState) -> np.ndarray:
    g = np.moveaxis(metric_field(s), (0, 1), (-2, -1))
    return np.linalg.det(g)


def signature_census(s: FieldState) -> dict[str, float]:
    """Fraction of nodes with each eigenvalue sign pattern (sorted descending)."""
    g = np.moveaxis(metric_field(s), (0, 1), (-2, -1)).reshape(-1, 4, 4)
    ev = np.linalg.eigvalsh(g)
    pos = (ev > 0).sum(axis=1)
    counts = Counter(int(p) for p in pos)
    n = g.shape[0]
    return {"+" * p + "-" * (4 - p): counts[p] / n for p in sorted(counts, reverse=True)}


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------

@dataclass
class CurvatureReport:
    max_ricci: float
    components: dict[str, float]
    t: float
    dt: float
    shape: tuple[int, int, int]
    stride: int
    max_det_error: float
    census: dict[str, float] = field(default_factory=dict)


_NAMES = "txyz"


def _derivatives(states: Sequence[FieldState], dt: float):
    """g, ∂_λ g and ∂_λ∂_μ g at the middle state."""
    gs = [metric_field(s) for s in states]
    grid = states[0].grid
    g = gs[2]
    # differences from the centre first, so a stationary stack gives exact zeros
    diffs = [gi - g for gi in gs]
    dg_t = sum(w * d for w, d in zip(_D1, diffs)) / dt
    ddg_tt = sum(w * d for w, d in zip(_D2, diffs)) / dt**2

    def sp(f, ax):
        return _spectral(f, grid, ax, 1)

    shape = g.shape
    dg = np.empty((4,) + shape)
    dg[0] = dg_t
    for ax in range(3):
        dg[ax + 1] = np.array([[sp(g[i, j], ax) for j in range(4)] for i in range(4)])
    ddg = np.empty((4, 4) + shape)
    ddg[0, 0] = ddg_tt
    for ax in range(3):
        mixed = np.array([[sp(dg_t[i, j], ax) for j in range(4)] for i in range(4)])
        ddg[0, ax + 1] = ddg[ax + 1, 0] = mixed
        for bx in range(ax, 3):
            second = np.array([[sp(dg[ax + 1][i, j], bx) for j in range(4)] for i in range(4)])
            ddg[ax + 1, bx + 1] = ddg[bx + 1, ax + 1] = second
    return g, dg, ddg


def ricci_field(g, dg, ddg) -> np.ndarray:
    """R_{μν} from g_{ij}, ∂_l g_{ij} and ∂_l∂_m g_{ij} (fields on trailing axes)."""
    gp = np.moveaxis(g, (0, 1), (-2, -1))
    ginv = np.moveaxis(np.linalg.inv(gp), (-2, -1), (0, 1))
    # lowered Christoffels Γ_{σμν} and their derivatives
    low = 0.5 * (np.einsum("mSn...->Smn...", dg) + np.einsum("nSm...->Smn...", dg)
                 - np.einsum("Smn...->Smn...", dg))
    dlow = 0.5 * (np.einsum("lmSn...->lSmn...", ddg) + np.einsum("lnSm...->lSmn...", ddg)
                  - np.einsum("lSmn...->lSmn...", ddg))
    gam = np.einsum("aS...,Smn...->amn...", ginv, low)
    dginv = -np.einsum("ai...,lij...,jb...->lab...", ginv, dg, ginv)
    dgam = (np.einsum("lbS...,Smn...->lbmn...", dginv, low)
            + np.einsum("bS...,lSmn...->lbmn...", ginv, dlow))
    term1 = np.einsum("llmn...->mn...", dgam)
    term2 = np.einsum("nllm...->mn...", dgam)
    trace = np.einsum("lls...->s...", gam)
    term3 = np.einsum("s...,smn...->mn...", trace, gam)
    term4 = np.einsum("lns...,sml...->mn...", gam, gam)
    return term1 - term2 + term3 - term4


def ricci_report(stack, stride: int = 1, index: int | None = None) -> CurvatureReport:
    """Ricci tensor at the middle of a five-state window of a uniform stack.

    ``stride`` subsamples nodes in every spatial direction before the
    contraction; derivatives always use the full grid.
    """
    states = _states(stack)
    dt = getattr(stack, "dt", None)
    if dt is None:
        if len(states) >= 2:
            dt = states[1].t - states[0].t
        else:
            raise StackTooShallow("need at least 5 uniformly spaced states")
    if len(states) < 5:
        raise StackTooShallow(f"need at least 5 states, got {len(states)}")
    mid = len(states) // 2 if index is None else index
    if mid < 2 or mid + 2 >= len(states):
        raise StackTooShallow("the time stencil does not fit around the requested state")
    window = states[mid - 2:mid + 3]
    ts = np.array([s.t for s in window])
    if np.max(np.abs(np.diff(ts) - dt)) > 1e-9 * max(1.0, abs(dt)):
        raise ValueError("stack is not uniformly spaced")
    g, dg, ddg = _derivatives(window, dt)
    sl = (Ellipsis, slice(None, None, stride), slice(None, None, stride), slice(None, None, stride))
    R = ricci_field(g[sl], dg[sl], ddg[sl])
    comps = {}
    for m in range(4):
        for n in range(m, 4):
            comps[_NAMES[m] + _NAMES[n]] = float(np.max(np.abs(R[m, n])))
    centre = window[2]
    det_err = float(np.max(np.abs(determinant_field(centre) - 1 / 256)))
    return CurvatureReport(max(comps.values()), comps, centre.t, dt, centre.grid.shape, stride, det_err,
                           signature_census(centre))


def ricci_convergence(states_fine: Sequence[FieldState], dt_fine: float, strides: Sequence[int] = (2, 1),
                      node_stride: int = 1) -> list[tuple[float, float]]:
    """Ricci max-norm at the centre of a fine-step trajectory for stacks whose
    spacing is ``k * dt_fine`` for each k in ``strides``; returns (dt, max |R|)."""
    mid = len(states_fine) // 2
    out = []
    for k in strides:
        if mid - 2 * k < 0 or mid + 2 * k >= len(states_fine):
            raise StackTooShallow(f"trajectory too short for time spacing {k} x dt")
        window = [states_fine[mid + j * k] for j in range(-2, 3)]
        rep = ricci_report(window, node_stride)
        out.append((k * dt_fine, rep.max_ricci))
    return out
