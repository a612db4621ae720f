"""Line-case matrices, transition curves and periodic solutions.

The four classical coefficient matrices come from splitting the Fourier
system of a 2pi- or 4pi-periodic solution by parity:

    A: cos, even index   diag 0,1,4,9,...      sub couplings eps, eps/2, ...
    B: sin, even index   diag 1,4,9,...        all couplings eps/2
    C: cos, odd index    diag 1/4,9/4,...      corner +eps/2, couplings eps/2
    D: sin, odd index    diag 1/4,9/4,...      corner -eps/2, couplings eps/2

Period-2Npi equivalence classes add, besides copies of A/B/C/D, a genuinely
new family: a doubly infinite chain with diagonal delta - (p + k/N)^2 over
p in Z and uniform eps/2 couplings.  Its truncations are symmetric windows
of the chain (see FoldedChainSpec).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import floquet, trirec
from .errors import AmbiguousBand, InvalidPeriodClass, NoSignChange
from .trirec import TridiagonalSpec, Truncation

GRID_SIZE = 4096  # samples per period for solution evaluation


@dataclass(frozen=True)
class MatrixKind:
    """One of the A/B/C/D matrices or a period-2Npi class PN(N, k, trig, form).

    form 1 is the {a_0, a_N, ...} class (= A, or B for sines), form 3 the
    N/2-offset class (= C or D, N even only), form 2 the doubly infinite
    class with 1 <= k < N/2.
    """

    tag: str                      # 'A' | 'B' | 'C' | 'D' | 'PN'
    n: int = 0
    k: int = 0
    trig: str = "cos"
    form: int = 0

    def __post_init__(self):
        if self.tag in "ABCD":
            return
        if self.tag != "PN":
            raise InvalidPeriodClass(f"unknown matrix tag {self.tag!r}")
        if self.n < 3:
            raise InvalidPeriodClass("period class needs N >= 3")
        if self.trig not in ("cos", "sin"):
            raise InvalidPeriodClass(f"trig must be cos or sin, got {self.trig!r}")
        if self.form == 1:
            if self.k != 0:
                raise InvalidPeriodClass("form 1 is the k = 0 class")
        elif self.form == 2:
            if not 1 <= self.k < self.n / 2:
                raise InvalidPeriodClass("form 2 needs 1 <= k < N/2")
        elif self.form == 3:
            if self.n % 2 or self.k != self.n // 2:
                raise InvalidPeriodClass("form 3 needs even N and k = N/2")
        else:
            raise InvalidPeriodClass(f"form must be 1, 2 or 3, got {self.form}")

    @property
    def period(self) -> float:
        """Fundamental period of solutions carried by this matrix."""
        if self.tag in "AB":
            return 2.0 * math.pi
        if self.tag in "CD":
            return 4.0 * math.pi
        if self.form == 1:
            return 2.0 * math.pi
        if self.form == 3:
            return 4.0 * math.pi
        g = math.gcd(self.n, self.k)
        return 2.0 * math.pi * self.n / g

    def describe(self) -> str:
        if self.tag in "ABCD":
            return self.tag
        return f"PN({self.n},{self.k},{self.trig},{self.form})"


def matrix_kind(tag: str) -> MatrixKind:
    return MatrixKind(tag.upper())


def period_kind(n: int, k: int, trig: str, form: int) -> MatrixKind:
    return MatrixKind("PN", n, k, trig, form)


@dataclass(frozen=True)
class CurveLabel:
    """Transition curve labeled by its eps = 0 eigenfunction of d^2/dt^2.

    twice_freq is 2k for sin/cos(kt) labels and 2k+1 for the half-integer
    families; the matrix kind and eigenvalue index follow from it.
    """

    trig: str          # 'cos' | 'sin'
    twice_freq: int

    def __post_init__(self):
        if self.trig not in ("cos", "sin"):
            raise ValueError("trig must be 'cos' or 'sin'")
        if self.twice_freq < 0 or (self.twice_freq == 0 and self.trig == "sin"):
            raise ValueError("sin 0t is not a curve label")

    @property
    def matrix(self) -> MatrixKind:
        even = self.twice_freq % 2 == 0
        tag = {"cos": "AC", "sin": "BD"}[self.trig][0 if even else 1]
        return MatrixKind(tag)

    @property
    def eigen_index(self) -> int:
        if self.twice_freq % 2 == 0:
            k = self.twice_freq // 2
            return k + 1 if self.trig == "cos" else k
        return (self.twice_freq + 1) // 2

    @property
    def delta_at_zero(self) -> float:
        return (self.twice_freq / 2.0) ** 2

    def describe(self) -> str:
        f = Fraction(self.twice_freq, 2)
        return f"{self.trig} {f}t"


def parse_label(text: str) -> CurveLabel:
    """Parse 'cos 3/2' / 'sin2' / 'cos 0' style labels."""
    t = text.strip().lower().replace("t", " ")
    for trig in ("cos", "sin"):
        if t.startswith(trig):
            frac = Fraction(t[len(trig):].strip() or "0")
            if (2 * frac).denominator != 1:
                raise ValueError(f"label frequency must be a half-integer: {text!r}")
            return CurveLabel(trig, int(2 * frac))
    raise ValueError(f"cannot parse curve label {text!r}")


@dataclass(frozen=True)
class CurvePoint:
    eps: float
    delta: float
    m_used: int


@dataclass(frozen=True)
class TransitionCurve:
    kind_desc: str
    eigen_index: int
    points: tuple[CurvePoint, ...]

    def epsilons(self) -> np.ndarray:
        return np.array([p.eps for p in self.points])

    def deltas(self) -> np.ndarray:
        return np.array([p.delta for p in self.points])


# ---------------------------------------------------------------------------
# matrix construction


def _lam_quad(offset: int):
    return lambda j: float((j - 1 + offset) ** 2)


def _lam_odd_quarters(j: int) -> float:
    return (2 * j - 1) ** 2 / 4.0


def _coupling_const(value: float):
    return lambda j: value


def _coupling_first(first: float, rest: float):
    return lambda j: first if j == 1 else rest


@dataclass(frozen=True)
class FoldedChainSpec:
    """Doubly infinite period-N chain folded to one-sided truncations.

    The underlying operator lives on Z: diagonal (p + kappa)^2 with
    kappa = k/N, couplings eps/2 between neighbors (for the sine class the
    single coupling between p = 0 and p = -1 is -eps/2, which no eigenvalue
    ever sees).  Re-ordering the sites by increasing diagonal is not
    tridiagonal, but each leading m-set of that order is a contiguous window
    [-floor(m/2), m-1-floor(m/2)] of the chain, so truncations stay
    tridiagonal in chain order and the usual bisection kernel applies.
    """

    n: int
    k: int
    trig: str
    eps: float

    @property
    def kappa(self) -> float:
        return self.k / self.n

    def window(self, m: int) -> tuple[int, int]:
        left = m // 2
        return -left, m - 1 - left

    def truncation(self, m: int) -> Truncation:
        lo, hi = self.window(m)
        p = np.arange(lo, hi + 1, dtype=float)
        diag = (p + self.kappa) ** 2
        sup = np.full(m - 1, self.eps / 2.0)
        sub = np.full(m - 1, self.eps / 2.0)
        if self.trig == "sin" and lo <= -1 and hi >= 0:
            i = int(-1 - lo)          # edge between sites -1 and 0
            sup[i] = sub[i] = -self.eps / 2.0
        return Truncation(None, m, diag, sup, sub)

    def frequencies(self, m: int) -> np.ndarray:
        lo, hi = self.window(m)
        return np.abs(np.arange(lo, hi + 1, dtype=float) + self.kappa)


def build_spec(kind: MatrixKind, eps: float) -> TridiagonalSpec | FoldedChainSpec:
    """Eq.-(3.1)-form spec for a matrix kind at coupling strength eps."""
    tag = kind.tag
    if tag == "PN":
        if kind.form == 1:
            return build_spec(MatrixKind("A" if kind.trig == "cos" else "B"), eps)
        if kind.form == 3:
            return build_spec(MatrixKind("C" if kind.trig == "cos" else "D"), eps)
        return FoldedChainSpec(kind.n, kind.k, kind.trig, eps)
    half = _coupling_const(0.5)
    if tag == "A":
        return TridiagonalSpec(_lam_quad(0), half, _coupling_first(1.0, 0.5),
                               gamma=0.0, eps=eps, start_index=0)
    if tag == "B":
        return TridiagonalSpec(_lam_quad(1), half, half, gamma=0.0, eps=eps,
                               start_index=1)
    if tag == "C":
        return TridiagonalSpec(_lam_odd_quarters, half, half, gamma=-0.5,
                               eps=eps, start_index=0)
    if tag == "D":
        return TridiagonalSpec(_lam_odd_quarters, half, half, gamma=0.5,
                               eps=eps, start_index=1)
    raise InvalidPeriodClass(f"unknown matrix tag {tag!r}")


def _folded_eigenvalue(spec: FoldedChainSpec, k: int,
                       tol: float = trirec.TOL_EIG) -> tuple[float, int]:
    """Adaptive window eigenvalue for the folded chain: double m until the
    k-th eigenvalue moves by < 10*tol."""
    m = max(trirec.ADAPTIVE_M_START, 4 * k)
    prev = None
    while True:
        t = spec.truncation(m)
        val = trirec.eigenvalue_bisect(t.diag, t.symmetric_offdiag, k, tol)
        if prev is not None and abs(val - prev) < 10 * tol:
            return val, m
        if m >= trirec.ADAPTIVE_M_CAP:
            return val, m
        prev = val
        m = min(2 * m, trirec.ADAPTIVE_M_CAP)


def curve_delta(kind: MatrixKind, eigen_index: int, eps: float,
                seed: float | None = None) -> tuple[float, int]:
    """Transition value and truncation order used, for one matrix and index."""
    spec = build_spec(kind, eps)
    if isinstance(spec, FoldedChainSpec):
        return _folded_eigenvalue(spec, eigen_index)
    return trirec.adaptive_eigenvalue(spec, eigen_index, seed=seed)


def transition_curve(label: CurveLabel | tuple[MatrixKind, int],
                     eps_grid, threads: int = 1) -> TransitionCurve:
    """delta(eps) samples of one labeled transition curve, in grid order."""
    if isinstance(label, CurveLabel):
        kind, k = label.matrix, label.eigen_index
        desc = label.describe()
    else:
        kind, k = label
        desc = kind.describe()
    eps_grid = list(eps_grid)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda e: curve_delta(kind, k, e), eps_grid))
    else:
        results = []
        seed = None
        for e in eps_grid:
            delta, m_used = curve_delta(kind, k, e, seed=seed)
            results.append((delta, m_used))
            seed = delta
    pts = tuple(CurvePoint(e, d, m) for e, (d, m) in zip(eps_grid, results))
    return TransitionCurve(desc, k, pts)


# ---------------------------------------------------------------------------
# solutions


@dataclass(frozen=True)
class LineSolution:
    kind: MatrixKind
    delta: float
    eps: float
    coeffs: np.ndarray
    freqs: np.ndarray          # basis frequencies nu_j, u = sum c_j trig(nu_j t)
    trig: str
    period: float
    ts: np.ndarray
    us: np.ndarray

    def residual(self) -> float:
        """max |u'' + (delta + eps cos t) u| on the grid, evaluated spectrally."""
        nu = self.freqs[:, None]
        c = self.coeffs[:, None]
        t = self.ts[None, :]
        basis = np.cos(nu * t) if self.trig == "cos" else np.sin(nu * t)
        u = (c * basis).sum(axis=0)
        upp = (-c * nu ** 2 * basis).sum(axis=0)
        r = upp + (self.delta + self.eps * np.cos(self.ts)) * u
        scale = np.abs(self.us).max() or 1.0
        return float(np.abs(r).max() / scale)


def _basis_for(kind: MatrixKind, n_terms: int) -> tuple[np.ndarray, str]:
    if kind.tag == "A":
        return np.arange(n_terms, dtype=float), "cos"
    if kind.tag == "B":
        return np.arange(1, n_terms + 1, dtype=float), "sin"
    if kind.tag in "CD":
        nu = (2 * np.arange(1, n_terms + 1, dtype=float) - 1) / 2.0
        return nu, "cos" if kind.tag == "C" else "sin"
    raise InvalidPeriodClass("solution synthesis supports A/B/C/D and "
                             "PN form 2 kinds")


def solution(label: CurveLabel | tuple[MatrixKind, int], eps: float,
             n_terms: int = 48, grid_size: int = GRID_SIZE) -> LineSolution:
    """Normalized periodic solution on the labeled curve at this eps.

    Coefficients come from backward recursion at the curve's delta (or are a
    single basis vector at eps = 0); the sample grid covers one full period
    and the solution is scaled so max u = 1.
    """
    if isinstance(label, CurveLabel):
        kind, k = label.matrix, label.eigen_index
    else:
        kind, k = label
    if n_terms < 8:
        raise ValueError("n_terms must be >= 8")
    n_terms = max(n_terms, k + 8)
    delta, _ = curve_delta(kind, k, eps)
    spec = build_spec(kind, eps)

    if kind.tag == "PN":
        return _pn_solution(kind, spec, k, delta, eps, n_terms, grid_size)

    if eps == 0.0:
        c = np.zeros(n_terms)
        c[k - 1] = 1.0
    else:
        c = trirec.backward_recursion(spec, delta, n_terms)
    freqs, trig = _basis_for(kind, n_terms)
    period = kind.period
    ts = np.linspace(0.0, period, grid_size, endpoint=False)
    us = (c[:, None] * (np.cos(freqs[:, None] * ts[None, :]) if trig == "cos"
                        else np.sin(freqs[:, None] * ts[None, :]))).sum(axis=0)
    c, us = _normalize_max_one(c, us)
    return LineSolution(kind, delta, eps, c, freqs, trig, period, ts, us)


def _pn_solution(kind, spec: FoldedChainSpec, k: int, delta: float, eps: float,
                 n_terms: int, grid_size: int) -> LineSolution:
    # coefficients from the dense window null vector (chain is two-sided, so
    # one-sided backward recursion does not apply)
    m = max(64, 4 * n_terms)
    t = spec.truncation(m)
    w, v = np.linalg.eigh(t.dense())  # the window matrix is symmetric
    i = int(np.argmin(np.abs(w - delta)))
    c = v[:, i]
    lo, hi = spec.window(m)
    freqs = np.arange(lo, hi + 1, dtype=float) + spec.kappa
    trig = kind.trig
    period = kind.period
    ts = np.linspace(0.0, period, grid_size, endpoint=False)
    basis = np.cos(freqs[:, None] * ts[None, :]) if trig == "cos" \
        else np.sin(freqs[:, None] * ts[None, :])
    us = (c[:, None] * basis).sum(axis=0)
    c, us = _normalize_max_one(c, us)
    return LineSolution(kind, delta, eps, c, freqs, trig, period, ts, us)


def _normalize_max_one(c: np.ndarray, us: np.ndarray):
    peak = np.abs(us).max()
    sign = 1.0 if us[np.argmax(np.abs(us))] > 0 else -1.0
    return c * (sign / peak), us * (sign / peak)


def find_extrema(sol: LineSolution) -> list[tuple[float, float, str]]:
    """Local extrema of the sampled solution, refined parabolically.

    The grid is treated as periodic; returned tuples are (t, u, 'max'|'min')
    sorted by t.
    """
    u = sol.us
    n = len(u)
    up = np.roll(u, -1)
    um = np.roll(u, 1)
    out = []
    h = sol.ts[1] - sol.ts[0]
    for i in np.nonzero((u >= um) & (u > up) | (u <= um) & (u < up))[0]:
        a, b, c = um[i], u[i], up[i]
        denom = a - 2 * b + c
        shift = 0.0 if denom == 0 else 0.5 * (a - c) / denom
        t = sol.ts[i] + shift * h
        val = b - 0.25 * (a - c) * shift
        out.append((float(t % sol.period), float(val),
                    "max" if b > up[i] else "min"))
    out.sort()
    return out


def critical_alpha(label: CurveLabel, eps_hi: float = 64.0) -> float:
    """Root of delta(eps) - eps = 0 on [0, eps_hi] (Theorem-4.4 threshold)."""
    kind, k = label.matrix, label.eigen_index

    def g(e: float) -> float:
        return curve_delta(kind, k, e)[0] - e

    g0 = g(0.0)
    if g0 == 0.0:
        return 0.0
    if g0 < 0.0:
        raise NoSignChange("delta(0) < 0: curve starts below the diagonal")
    if g(eps_hi) > 0.0:
        raise NoSignChange(f"delta({eps_hi:g}) - {eps_hi:g} > 0; raise eps_hi")
    lo, hi = 0.0, eps_hi
    for _ in range(200):
        if hi - lo < 1e-10:
            break
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# stable bands


def sorted_transition_values(eps: float, count: int,
                             per_matrix: int | None = None,
                             distinct_tol: float | None = None) -> list[float]:
    """Sorted union of A/B/C/D transition values at fixed eps.

    With distinct_tol set, values closer than the tolerance are merged
    (pairs become exponentially close for large eps).
    """
    per_matrix = per_matrix or count + 4
    vals: list[float] = []
    for tag in "ABCD":
        spec = build_spec(MatrixKind(tag), eps)
        m = _band_truncation_order(per_matrix, eps)
        vals.extend(trirec.truncated_eigenvalues(spec, m, 1, per_matrix,
                                                 tol=1e-12))
    vals.sort()
    if distinct_tol is not None:
        merged = [vals[0]]
        for v in vals[1:]:
            if v - merged[-1] > distinct_tol:
                merged.append(v)
        vals = merged
    return vals[:count]


def _band_truncation_order(k_max: int, eps: float) -> int:
    # modes are needed past the classical turning point lam_j ~ |eps| + delta
    return max(60, 2 * k_max + 8, int(2.5 * math.sqrt(abs(eps))) + 20)


def band_width(band_index: int, eps: float) -> float:
    """Width of the k-th stable band at fixed eps.

    Gaps between consecutive sorted transition values are classified by the
    Floquet oracle at the midpoint; near-degenerate gaps (midpoint
    transitional) are resolved by the trace sign at the two edges: a genuine
    stable band always has opposite edge signs (the trace sweeps from +-2 to
    -+2 across it), a collapsed unstable gap has equal signs.
    """
    if band_index < 1:
        raise ValueError("band_index must be >= 1")
    need = 2 * band_index + 6
    vals = sorted_transition_values(eps, need, per_matrix=band_index + 4)
    steps = floquet.default_steps(abs(vals[-1]), eps)
    stable_seen = -1
    for left, right in zip(vals, vals[1:]):
        width = right - left
        mid_class = floquet.classify(0.5 * (left + right), eps, steps=steps)
        if mid_class.tag == "Stable":
            is_band = True
        elif mid_class.tag == "Unstable":
            is_band = False
        else:
            tr_l = floquet.monodromy(left, eps, steps).trace
            tr_r = floquet.monodromy(right, eps, steps).trace
            if abs(abs(tr_l) - 2) > 0.5 or abs(abs(tr_r) - 2) > 0.5:
                raise AmbiguousBand(
                    f"gap ({left:.6g}, {right:.6g}) edges not transitional")
            is_band = (tr_l > 0) != (tr_r > 0)
        if is_band:
            stable_seen += 1
            if stable_seen == band_index:
                return max(width, 0.0)
    raise AmbiguousBand(f"stable band {band_index} not found in first "
                        f"{need} transition values")
