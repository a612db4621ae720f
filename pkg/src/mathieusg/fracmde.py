"""Fractal Mathieu matrices M1..M4, their transition curves and solutions.

Versions 1/2 couple neighboring Neumann eigenfunctions with the line-case
weights eps/2 (eps on the (2,1) entry of the cosine-type version 1);
versions 3/4 use the frequency-matched weights

    alpha_j = (sqrt(lam_{j+2}) - sqrt(lam_{j+1})) / (sqrt(lam_{j+2}) - sqrt(lam_j))
    beta_j  = (sqrt(lam_j) - sqrt(lam_{j-1})) / (sqrt(lam_{j+1}) - sqrt(lam_{j-1}))

built on the eigenvalue sequence with lam_0 = 0 prepended (the constant
eigenfunction).  Cosine-type versions 1/3 start the diagonal at lam_0,
sine-type 2/4 at lam_1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import sgspec, trirec
from .errors import EpsilonZero
from .linemde import CurvePoint, TransitionCurve
from .trirec import TridiagonalSpec

COEFF_CUTOFF = 1e-10    # drop expansion terms below this fraction of max |c|
RENDER_LEVEL = 6


class EigenvalueSequence:
    """Memoized ordered eigenvalues of one decimation family, with lam_0 = 0.

    Index 0 is the constant eigenfunction's eigenvalue 0; index j >= 1 is
    the j-th smallest family eigenvalue.  Instances are safe to share after
    warm-up (values only ever get added).
    """

    def __init__(self, series: int, m0: int):
        self.series = series
        self.m0 = m0
        self._cache: dict[int, float] = {0: 0.0}

    def __call__(self, j: int) -> float:
        if j not in self._cache:
            p = sgspec.DecimationPath(self.m0, self.series,
                                      sgspec.path_of_index(j - 1))
            self._cache[j] = sgspec.lambda_of_path(p)
        return self._cache[j]


@dataclass(frozen=True)
class FractalVersion:
    v: int
    series: int = 5
    m0: int = 0
    lam: EigenvalueSequence = field(default=None, compare=False)

    def __post_init__(self):
        if self.v not in (1, 2, 3, 4):
            raise ValueError("version must be 1..4")
        if self.series not in (5, 6):
            raise ValueError("series must be 5 or 6")
        if self.lam is None:
            object.__setattr__(self, "lam",
                               EigenvalueSequence(self.series, self.m0))

    @property
    def cosine_type(self) -> bool:
        return self.v in (1, 3)

    def describe(self) -> str:
        return f"v{self.v}/{self.series}-series/m0={self.m0}"


def alpha_beta(lam, j: int) -> tuple[float, float]:
    """Frequency-matched coupling pair (alpha_j, beta_j), j >= 1.

    ``lam`` maps index -> eigenvalue with lam(0) = 0; the sequence must be
    strictly increasing and nonnegative.
    """
    if j < 1:
        raise ValueError("alpha_beta defined for j >= 1")
    s = [math.sqrt(lam(i)) for i in (j - 1, j, j + 1, j + 2)]
    if s[3] <= s[1] or s[2] <= s[0]:
        raise ZeroDivisionError("degenerate sqrt spacing in coupling formula")
    alpha = (s[3] - s[2]) / (s[3] - s[1])
    beta = (s[1] - s[0]) / (s[2] - s[0])
    return alpha, beta


def _alpha0(lam) -> float:
    s0, s1, s2 = (math.sqrt(lam(i)) for i in (0, 1, 2))
    return (s2 - s1) / (s2 - s0)


def build_fractal_spec(fv: FractalVersion, eps: float) -> TridiagonalSpec:
    """Eq.-(3.1)-form spec of M_v at coupling strength eps."""
    lam = fv.lam
    if fv.cosine_type:
        diag = lambda j: lam(j - 1)          # row 1 holds lam_0 = 0
        if fv.v == 1:
            alpha = lambda j: 0.5
            beta = lambda j: 1.0 if j == 1 else 0.5
        else:
            alpha = lambda j: _alpha0(lam) if j == 1 else alpha_beta(lam, j - 1)[0]
            beta = lambda j: 1.0 if j == 1 else alpha_beta(lam, j - 1)[1]
    else:
        diag = lambda j: lam(j)
        if fv.v == 2:
            alpha = lambda j: 0.5
            beta = lambda j: 0.5
        else:
            alpha = lambda j: alpha_beta(lam, j)[0]
            beta = lambda j: alpha_beta(lam, j)[1]
    return TridiagonalSpec(diag, alpha, beta, gamma=0.0, eps=eps,
                           start_index=0 if fv.cosine_type else 1)


def fractal_transition_curve(fv: FractalVersion, k: int, eps_grid,
                             threads: int = 1) -> TransitionCurve:
    """k-th transition curve of M_v over the eps grid (adaptive truncation)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    eps_grid = list(eps_grid)

    def point(e: float, seed: float | None = None):
        spec = build_fractal_spec(fv, e)
        return trirec.adaptive_eigenvalue(spec, k, seed=seed)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(point, eps_grid))
    else:
        results = []
        seed = None
        for e in eps_grid:
            delta, m_used = point(e, seed)
            results.append((delta, m_used))
            seed = delta
    pts = tuple(CurvePoint(e, d, m) for e, (d, m) in zip(eps_grid, results))
    return TransitionCurve(fv.describe(), k, pts)


@dataclass(frozen=True)
class RatioTrend:
    epsilons: tuple[float, ...]
    ratios: tuple[float, ...]
    final: float
    slope_vs_inv_sqrt: float


def asymptote_ratio(fv: FractalVersion, k: int, eps_list) -> RatioTrend:
    """delta/eps along one curve, with a trend statistic against 1/sqrt|eps|.

    Proposition-7.1 behavior (ratio -> -1 as eps -> +inf, +1 as eps -> -inf)
    is proved for versions 1/2 only; for 3/4 the numbers are reported
    without an asserted limit.
    """
    eps_list = list(eps_list)
    if any(e == 0 for e in eps_list):
        raise EpsilonZero("ratio delta/eps undefined at eps = 0")
    ratios = []
    for e in eps_list:
        delta, _ = trirec.adaptive_eigenvalue(build_fractal_spec(fv, e), k)
        ratios.append(delta / e)
    x = np.array([1.0 / math.sqrt(abs(e)) for e in eps_list])
    y = np.array(ratios)
    slope = float(np.polyfit(x, y, 1)[0]) if len(eps_list) > 1 else float("nan")
    return RatioTrend(tuple(eps_list), tuple(ratios), ratios[-1], slope)


@dataclass(frozen=True)
class FractalSolution:
    version: FractalVersion
    delta: float
    eps: float
    coeffs: np.ndarray           # c_j aligned with basis ranks
    ranks: np.ndarray            # 0 stands for the constant eigenfunction
    field: sgspec.SGFunction
    m_used: int

    def coefficient_residual(self) -> float:
        """max |M c| relative to max |c| over interior rows of the truncation."""
        spec = build_fractal_spec(self.version, self.eps)
        n = len(self.coeffs)
        lam = np.array([spec.lam(j) for j in range(1, n + 1)])
        lam[0] += spec.gamma * spec.eps
        sup, sub = spec.couplings(n)
        c = self.coeffs
        r = (self.delta - lam) * c
        r[:-1] += sup * c[1:]
        r[1:] += sub * c[:-1]
        # the last row is truncated (missing alpha_n c_{n+1}); skip it
        return float(np.abs(r[:-1]).max() / np.abs(c).max())


def fractal_solution(fv: FractalVersion, k: int, eps: float,
                     render_level: int = RENDER_LEVEL,
                     basis: sgspec.NeumannBasis | None = None) -> FractalSolution:
    """Solution u = sum c_j phi_j on the k-th curve at eps, sampled on V_m.

    Requires the desk-scale family (m0 = 2, the Fig.-7.9 initial functions);
    coefficients are truncated where |c_j| < 1e-10 max|c| and the field is
    normalized to max value 1.
    """
    if render_level > 8:
        raise ValueError("render level capped at 8")
    if fv.m0 != 2:
        raise ValueError("solution rendering requires the generation-2 family "
                         "(m0 = 2); curves support other m0")
    if basis is None:
        basis = sgspec.NeumannBasis(fv.series, 2)
    spec = build_fractal_spec(fv, eps)
    delta, m_used = trirec.adaptive_eigenvalue(spec, k)
    if eps == 0.0:
        coeffs = np.array([1.0])
        ranks = np.array([k - 1 if fv.cosine_type else k])
    else:
        n = max(24, m_used // 2)
        c = trirec.backward_recursion(spec, delta, n)
        keep = np.nonzero(np.abs(c) >= COEFF_CUTOFF * np.abs(c).max())[0]
        n_keep = int(keep[-1]) + 1
        coeffs = c[:n_keep]
        first_rank = 0 if fv.cosine_type else 1
        ranks = np.arange(first_rank, first_rank + n_keep)
    level = sgspec.build_level(render_level)
    u = np.zeros(level.size)
    for c_j, rank in zip(coeffs, ranks):
        if rank == 0:
            u += c_j                      # constant eigenfunction phi_0 = 1
        else:
            u += c_j * basis.by_rank(int(rank), render_level).values
    peak = np.abs(u).max()
    sign = 1.0 if u[np.argmax(np.abs(u))] > 0 else -1.0
    u *= sign / peak
    coeffs = coeffs * (sign / peak)
    return FractalSolution(fv, delta, eps, coeffs, ranks,
                           sgspec.SGFunction(level, u), m_used)


def find_peaks_on_sg(f: sgspec.SGFunction) -> list[tuple[int, float]]:
    """Vertices strictly above all graph neighbors, sorted by value descending."""
    u = f.values
    out = []
    for i, nb in enumerate(f.level.neighbors):
        if all(u[i] > u[j] for j in nb):
            out.append((i, float(u[i])))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out
