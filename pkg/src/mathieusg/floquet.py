"""Floquet stability oracle for u'' + (delta + eps*cos t) u = 0.

Everything reduces to the monodromy matrix of the first-order system over
one period [0, 2pi], integrated with fixed-step classical RK4 from the two
fundamental initial conditions (1,0) and (0,1).  |trace| against 2 decides
stability; the trace itself carries the Floquet rotation number through
trace = 2 cos(2 pi theta) on the stable side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NoSignChange

TRANSITION_TOL = 1e-6   # |trace|-2 band rendered as boundary

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


def _rk4_fundamental(delta, eps, steps):
    # vectorized numpy fallback; identical arithmetic per point
    delta = np.asarray(delta, dtype=float)
    eps = np.asarray(eps, dtype=float)
    h = 2.0 * np.pi / steps
    u1 = np.ones_like(delta)
    p1 = np.zeros_like(delta)
    u2 = np.zeros_like(delta)
    p2 = np.ones_like(delta)
    for i in range(steps):
        t = i * h
        c0 = math.cos(t)
        c1 = math.cos(t + 0.5 * h)
        c2 = math.cos(t + h)
        q0 = -(delta + eps * c0)
        q1 = -(delta + eps * c1)
        q2 = -(delta + eps * c2)
        k1u1 = p1; k1p1 = q0 * u1; k1u2 = p2; k1p2 = q0 * u2
        a = u1 + 0.5 * h * k1u1; b = p1 + 0.5 * h * k1p1
        c = u2 + 0.5 * h * k1u2; d = p2 + 0.5 * h * k1p2
        k2u1 = b; k2p1 = q1 * a; k2u2 = d; k2p2 = q1 * c
        a = u1 + 0.5 * h * k2u1; b = p1 + 0.5 * h * k2p1
        c = u2 + 0.5 * h * k2u2; d = p2 + 0.5 * h * k2p2
        k3u1 = b; k3p1 = q1 * a; k3u2 = d; k3p2 = q1 * c
        a = u1 + h * k3u1; b = p1 + h * k3p1
        c = u2 + h * k3u2; d = p2 + h * k3p2
        k4u1 = b; k4p1 = q2 * a; k4u2 = d; k4p2 = q2 * c
        u1 = u1 + (h / 6.0) * (k1u1 + 2 * k2u1 + 2 * k3u1 + k4u1)
        p1 = p1 + (h / 6.0) * (k1p1 + 2 * k2p1 + 2 * k3p1 + k4p1)
        u2 = u2 + (h / 6.0) * (k1u2 + 2 * k2u2 + 2 * k3u2 + k4u2)
        p2 = p2 + (h / 6.0) * (k1p2 + 2 * k2p2 + 2 * k3p2 + k4p2)
    return u1, u2, p1, p2


if _HAVE_NUMBA:

    @njit(cache=True)
    def _rk4_fundamental_nb(delta, eps, steps):  # pragma: no cover - jitted
        n = delta.shape[0]
        m11 = np.empty(n); m12 = np.empty(n)
        m21 = np.empty(n); m22 = np.empty(n)
        h = 2.0 * np.pi / steps
        cos0 = np.empty(steps); cos1 = np.empty(steps); cos2 = np.empty(steps)
        for i in range(steps):
            t = i * h
            cos0[i] = math.cos(t)
            cos1[i] = math.cos(t + 0.5 * h)
            cos2[i] = math.cos(t + h)
        for j in range(n):
            d = delta[j]; e = eps[j]
            u1 = 1.0; p1 = 0.0; u2 = 0.0; p2 = 1.0
            for i in range(steps):
                q0 = -(d + e * cos0[i])
                q1 = -(d + e * cos1[i])
                q2 = -(d + e * cos2[i])
                k1u1 = p1; k1p1 = q0 * u1; k1u2 = p2; k1p2 = q0 * u2
                a = u1 + 0.5 * h * k1u1; b = p1 + 0.5 * h * k1p1
                c = u2 + 0.5 * h * k1u2; f = p2 + 0.5 * h * k1p2
                k2u1 = b; k2p1 = q1 * a; k2u2 = f; k2p2 = q1 * c
                a = u1 + 0.5 * h * k2u1; b = p1 + 0.5 * h * k2p1
                c = u2 + 0.5 * h * k2u2; f = p2 + 0.5 * h * k2p2
                k3u1 = b; k3p1 = q1 * a; k3u2 = f; k3p2 = q1 * c
                a = u1 + h * k3u1; b = p1 + h * k3p1
                c = u2 + h * k3u2; f = p2 + h * k3p2
                k4u1 = b; k4p1 = q2 * a; k4u2 = f; k4p2 = q2 * c
                u1 += (h / 6.0) * (k1u1 + 2 * k2u1 + 2 * k3u1 + k4u1)
                p1 += (h / 6.0) * (k1p1 + 2 * k2p1 + 2 * k3p1 + k4p1)
                u2 += (h / 6.0) * (k1u2 + 2 * k2u2 + 2 * k3u2 + k4u2)
                p2 += (h / 6.0) * (k1p2 + 2 * k2p2 + 2 * k3p2 + k4p2)
            m11[j] = u1; m12[j] = u2; m21[j] = p1; m22[j] = p2
        return m11, m12, m21, m22


def default_steps(delta: float, eps: float) -> int:
    """Step count growing with coefficient magnitude; floor 1024."""
    return max(1024, 64 * math.ceil(math.sqrt(abs(delta) + abs(eps))))


def monodromy_batch(delta, eps, steps: int):
    """Monodromy entries (m11, m12, m21, m22) for arrays of (delta, eps)."""
    delta = np.ascontiguousarray(delta, dtype=float)
    eps = np.ascontiguousarray(eps, dtype=float)
    if _HAVE_NUMBA:
        return _rk4_fundamental_nb(delta, eps, steps)
    return _rk4_fundamental(delta, eps, steps)


def trace_batch(delta, eps, steps: int) -> np.ndarray:
    m11, _, _, m22 = monodromy_batch(delta, eps, steps)
    return m11 + m22


@dataclass(frozen=True)
class Monodromy:
    m11: float
    m12: float
    m21: float
    m22: float
    delta: float
    eps: float
    steps: int

    @property
    def trace(self) -> float:
        return self.m11 + self.m22

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21


@dataclass(frozen=True)
class StabilityClass:
    tag: str                 # "Stable" | "Unstable" | "Transitional"
    trace: float
    tol: float

    @property
    def stable(self) -> bool:
        return self.tag == "Stable"


def monodromy(delta: float, eps: float, steps: int | None = None) -> Monodromy:
    """Fundamental-solution matrix over one period 2pi."""
    if steps is None:
        steps = default_steps(delta, eps)
    if steps < 256:
        raise ValueError("steps must be >= 256")
    m11, m12, m21, m22 = monodromy_batch(np.array([delta]), np.array([eps]), steps)
    return Monodromy(float(m11[0]), float(m12[0]), float(m21[0]), float(m22[0]),
                     delta, eps, steps)


def classify(delta: float, eps: float, tol: float = TRANSITION_TOL,
             steps: int | None = None) -> StabilityClass:
    tr = monodromy(delta, eps, steps).trace
    return _classify_trace(tr, tol)


def _classify_trace(tr: float, tol: float = TRANSITION_TOL) -> StabilityClass:
    if abs(tr) < 2.0 - tol:
        tag = "Stable"
    elif abs(tr) > 2.0 + tol:
        tag = "Unstable"
    else:
        tag = "Transitional"
    return StabilityClass(tag, float(tr), tol)


@dataclass(frozen=True)
class StabilityGrid:
    """Row-major classification over a (delta, eps) rectangle.

    codes: int8, 1 = stable, -1 = unstable, 0 = transitional/boundary.
    deltas/epsilons are the sample coordinates (cell centers).
    """

    deltas: np.ndarray
    epsilons: np.ndarray
    codes: np.ndarray
    traces: np.ndarray
    steps: int
    tol: float


def stability_grid(delta_range: tuple[float, float],
                   eps_range: tuple[float, float],
                   nx: int, ny: int,
                   steps: int | None = None,
                   tol: float = TRANSITION_TOL) -> StabilityGrid:
    """Classify an nx-by-ny grid of (delta, eps) sample points."""
    if nx < 1 or ny < 1:
        raise ValueError("grid resolutions must be positive")
    deltas = np.linspace(delta_range[0], delta_range[1], nx)
    epsilons = np.linspace(eps_range[0], eps_range[1], ny)
    if steps is None:
        steps = default_steps(max(map(abs, delta_range)), max(map(abs, eps_range)))
    dd, ee = np.meshgrid(deltas, epsilons, indexing="ij")
    tr = trace_batch(dd.ravel(), ee.ravel(), steps).reshape(nx, ny)
    codes = np.zeros((nx, ny), dtype=np.int8)
    codes[np.abs(tr) < 2.0 - tol] = 1
    codes[np.abs(tr) > 2.0 + tol] = -1
    return StabilityGrid(deltas, epsilons, codes, tr, steps, tol)


def _trace_on_diagonal(t: float, steps: int) -> float:
    return float(trace_batch(np.array([t]), np.array([t]), steps)[0])


def _bisect(f, a: float, b: float, tol: float, max_iter: int = 200) -> float:
    fa, fb = f(a), f(b)
    if fa * fb > 0:
        raise NoSignChange(f"no sign change on [{a:g}, {b:g}]")
    for _ in range(max_iter):
        if b - a < tol:
            break
        mid = 0.5 * (a + b)
        fm = f(mid)
        if fa * fm <= 0:
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    return 0.5 * (a + b)


@lru_cache(maxsize=8)
def diagonal_unstable_intervals(count: int, scan_step: float = 0.02,
                                refine_tol: float = 1e-8,
                                steps: int = 2048) -> tuple[tuple[float, float], ...]:
    """First `count` maximal unstable intervals of t -> classify(t, t).

    The trace alternates sign between consecutive instability tongues, so a
    stable sliver too thin to sample still shows up as a sign flip of the
    trace between two unstable samples; interval endpoints are then refined
    by bisection on trace -+ 2.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    intervals: list[tuple[float, float]] = []
    f = lambda t: _trace_on_diagonal(t, steps)
    block = 4096
    t_lo = scan_step
    cur_start = None
    prev_sign = 0.0
    prev_t = 0.0
    prev_tr = 2.0  # trace at the origin
    while len(intervals) < count:
        ts = t_lo + scan_step * np.arange(block)
        trs = trace_batch(ts, ts, steps)
        for t, tr in zip(ts, trs):
            unstable = abs(tr) > 2.0
            s = math.copysign(1.0, tr)
            if cur_start is None:
                if unstable:
                    left = _bisect(lambda u: abs(f(u)) - 2.0, prev_t, t, refine_tol)
                    cur_start = left
                    prev_sign = s
            else:
                if unstable and s != prev_sign:
                    # hidden stable sliver: trace sweeps from +-2 to -+2
                    tz = _bisect(f, prev_t, t, refine_tol)
                    right = _bisect(lambda u: f(u) - 2.0 * prev_sign, prev_t, tz,
                                    refine_tol)
                    intervals.append((cur_start, right))
                    cur_start = _bisect(lambda u: f(u) - 2.0 * s, tz, t, refine_tol)
                    prev_sign = s
                elif not unstable:
                    right = _bisect(lambda u: f(u) - 2.0 * prev_sign, prev_t, t,
                                    refine_tol)
                    intervals.append((cur_start, right))
                    cur_start = None
            if len(intervals) >= count:
                break
            prev_t, prev_tr = t, tr
        t_lo = ts[-1] + scan_step
        if t_lo > 1e4:
            raise NoSignChange("diagonal scan ran away past t = 1e4")
    return tuple(intervals[:count])


def triangle_probability(i: int, samples_per_axis: int = 1200,
                         steps: int = 1024,
                         w: float | None = None) -> float:
    """Stable-area fraction of the triangle 0 < |eps| < delta < w_i.

    Midpoint quadrature on the upper half (eps > 0); the eps -> -eps
    symmetry of the stability chart makes this equal to the full triangle
    probability.  ``w`` overrides the scanned right endpoint w_i.
    """
    if w is None:
        if i < 1:
            raise ValueError("interval index must be >= 1")
        w = diagonal_unstable_intervals(i)[i - 1][1]
    n = samples_per_axis
    xs = (np.arange(n) + 0.5) * (w / n)
    dd, ee = np.meshgrid(xs, xs, indexing="ij")
    mask = ee < dd
    tr = trace_batch(dd[mask], ee[mask], steps)
    return float(np.mean(np.abs(tr) < 2.0))
