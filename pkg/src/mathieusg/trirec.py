"""Generic infinite-tridiagonal kernel.

Operators handled here have the one-sided form

    T = [ lam_1 + gamma*eps   alpha_1*eps                          ]
        [ beta_1*eps          lam_2         alpha_2*eps            ]
        [                     beta_2*eps    lam_3       ...        ]

with lam_j -> infinity and bounded nonzero coupling sequences.  A value
``delta`` is a transition value iff it is an eigenvalue of T, which is what
the truncation + Sturm-bisection machinery below computes.  Coefficient
vectors of the associated homogeneous system are recovered by backward
recursion of the three-term recurrence, which tracks the minimal solution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EpsilonZero, IndexOutOfRange, NonPositiveProduct

TOL_EIG = 1e-10          # default absolute tolerance on bisected eigenvalues
TOL_TRUNC = 1e-8         # adaptive-m stops when the error estimate is below this
ADAPTIVE_M_START = 40
ADAPTIVE_M_CAP = 640

_TINY_PIVOT = 1e-300


@dataclass(frozen=True)
class TridiagonalSpec:
    """Lazily evaluable one-sided tridiagonal operator.

    ``lam``, ``alpha`` and ``beta`` are 1-based index -> value functions:
    ``lam(j)`` is the j-th diagonal base value, ``alpha(j)`` the coupling on
    entry (j, j+1) in units of eps, ``beta(j)`` the coupling on (j+1, j).
    ``gamma`` perturbs entry (1, 1) by ``gamma*eps``.  ``start_index`` records
    which basis function the first row corresponds to (0 for cosine-type
    families, 1 for sine-type) and is bookkeeping only.
    """

    lam: Callable[[int], float]
    alpha: Callable[[int], float]
    beta: Callable[[int], float]
    gamma: float
    eps: float
    start_index: int = 0

    def with_eps(self, eps: float) -> "TridiagonalSpec":
        return TridiagonalSpec(self.lam, self.alpha, self.beta, self.gamma,
                               eps, self.start_index)

    def diagonal(self, m: int) -> np.ndarray:
        d = np.array([self.lam(j) for j in range(1, m + 1)], dtype=float)
        d[0] += self.gamma * self.eps
        return d

    def couplings(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Super- and subdiagonal entries (f_j, g_j) of the m x m truncation."""
        sup = np.array([self.alpha(j) for j in range(1, m)], dtype=float) * self.eps
        sub = np.array([self.beta(j) for j in range(1, m)], dtype=float) * self.eps
        return sup, sub

    def truncation(self, m: int) -> "Truncation":
        sup, sub = self.couplings(m)
        return Truncation(self, m, self.diagonal(m), sup, sub)


@dataclass(frozen=True)
class Truncation:
    """Dense m x m leading principal submatrix, stored as three diagonals."""

    spec: TridiagonalSpec | None
    m: int
    diag: np.ndarray
    sup: np.ndarray
    sub: np.ndarray

    @property
    def symmetric_offdiag(self) -> np.ndarray:
        prod = self.sup * self.sub
        if np.any(prod < 0):
            j = int(np.argmax(prod < 0)) + 1
            raise NonPositiveProduct(
                f"coupling product alpha_{j}*beta_{j} < 0; cannot symmetrize")
        return np.sqrt(prod)

    def dense(self) -> np.ndarray:
        a = np.diag(self.diag).astype(float)
        if self.m > 1:
            a += np.diag(self.sup, 1) + np.diag(self.sub, -1)
        return a


@dataclass(frozen=True)
class KappaScaling:
    """Diagonal similarity kappa_j = sqrt(prod_{i<j} g_i/f_i).

    Conjugating by diag(kappa) turns the operator symmetric with couplings
    sqrt(f_j g_j) while preserving every truncation spectrum.
    """

    kappa: Callable[[int], float]

    def values(self, m: int) -> np.ndarray:
        return np.array([self.kappa(j) for j in range(1, m + 1)], dtype=float)


def symmetrize(spec: TridiagonalSpec, probe: int = 64) -> tuple[TridiagonalSpec, KappaScaling]:
    """Return the symmetric similar spec and the kappa scaling realizing it.

    Raises NonPositiveProduct if some probed alpha_j*beta_j <= 0 (eps != 0);
    the symmetrized couplings sqrt(alpha_j*beta_j) are not real there.
    """
    alpha, beta = spec.alpha, spec.beta
    if spec.eps != 0.0:
        for j in range(1, probe + 1):
            if alpha(j) * beta(j) <= 0.0:
                raise NonPositiveProduct(
                    f"alpha_{j}*beta_{j} = {alpha(j) * beta(j):g} <= 0")

    def coup(j: int) -> float:
        return math.sqrt(alpha(j) * beta(j))

    cache: dict[int, float] = {1: 1.0}

    def kappa(j: int) -> float:
        if j not in cache:
            k = max(cache)
            v = cache[k]
            while k < j:
                v *= math.sqrt(beta(k) / alpha(k))
                k += 1
                cache[k] = v
        return cache[j]

    sym = TridiagonalSpec(spec.lam, coup, coup, spec.gamma, spec.eps,
                          spec.start_index)
    return sym, KappaScaling(kappa)


def sturm_count(diag: np.ndarray, offdiag: np.ndarray, x: float) -> int:
    """Number of eigenvalues of the symmetric tridiagonal matrix below x.

    LDL^T pivot recurrence; pivots with magnitude below 1e-300 are replaced
    by +-1e-300 keeping their sign (0.0 counts as +).
    """
    count = 0
    q = diag[0] - x
    if abs(q) < _TINY_PIVOT:
        q = math.copysign(_TINY_PIVOT, q)
    if q < 0.0:
        count += 1
    for i in range(1, len(diag)):
        q = diag[i] - x - offdiag[i - 1] * offdiag[i - 1] / q
        if abs(q) < _TINY_PIVOT:
            q = math.copysign(_TINY_PIVOT, q)
        if q < 0.0:
            count += 1
    return count


def _gershgorin(diag: np.ndarray, offdiag: np.ndarray) -> tuple[float, float]:
    r = np.zeros(len(diag))
    if len(offdiag):
        r[:-1] += np.abs(offdiag)
        r[1:] += np.abs(offdiag)
    return float(np.min(diag - r)), float(np.max(diag + r))


def eigenvalue_bisect(diag: np.ndarray, offdiag: np.ndarray, k: int,
                      tol: float = TOL_EIG,
                      bracket: tuple[float, float] | None = None) -> float:
    """k-th smallest eigenvalue (1-based) of a symmetric tridiagonal matrix.

    Bisection on sturm_count, seeded by Gershgorin bounds unless a valid
    bracket is supplied.  The interval is also stopped at the floating-point
    resolution of its endpoints, so tol is a target, not a promise, for
    eigenvalues of magnitude above tol/eps_machine.
    """
    if not 1 <= k <= len(diag):
        raise IndexOutOfRange(f"eigenvalue index {k} outside 1..{len(diag)}")
    lo, hi = _gershgorin(diag, offdiag)
    if bracket is not None:
        blo, bhi = bracket
        if (blo < bhi and sturm_count(diag, offdiag, blo) < k
                and sturm_count(diag, offdiag, bhi) >= k):
            lo, hi = blo, bhi
    eps_m = np.finfo(float).eps
    for _ in range(300):
        if hi - lo <= max(tol, 8 * eps_m * max(abs(lo), abs(hi))):
            break
        mid = 0.5 * (lo + hi)
        if sturm_count(diag, offdiag, mid) >= k:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def eigenvalues_of_truncation(t: Truncation, k_lo: int, k_hi: int,
                              tol: float = TOL_EIG) -> list[float]:
    """Sorted eigenvalues k_lo..k_hi of a (possibly nonsymmetric) truncation."""
    if k_hi > t.m or k_lo < 1:
        raise IndexOutOfRange(f"range {k_lo}..{k_hi} outside 1..{t.m}")
    off = t.symmetric_offdiag
    return [eigenvalue_bisect(t.diag, off, k, tol) for k in range(k_lo, k_hi + 1)]


def truncated_eigenvalues(spec: TridiagonalSpec, m: int, k_lo: int, k_hi: int,
                          tol: float = TOL_EIG) -> list[float]:
    """delta_k for k in k_lo..k_hi from the m x m truncation of spec."""
    return eigenvalues_of_truncation(spec.truncation(m), k_lo, k_hi, tol)


def backward_recursion(spec: TridiagonalSpec, delta: float, n: int) -> np.ndarray:
    """Approximate the minimal solution c_1..c_n of (delta*I - T)c = 0.

    Sets c_{n+1} = 0, c_n = 1 and recurs downward through

        beta_{j-1} eps c_{j-1} + (delta - lam_j) c_j + alpha_j eps c_{j+1} = 0,

    then rescales to max |c_j| = 1.  The first row is not used; it is
    satisfied automatically when delta is an eigenvalue.
    """
    if spec.eps == 0.0:
        raise EpsilonZero("backward recursion undefined at eps = 0")
    if n < 2:
        raise IndexOutOfRange("need n >= 2 for backward recursion")
    if spec.lam(n) <= delta:
        warnings.warn("lam_n <= delta: recursion started inside the "
                      "oscillatory range; increase n", stacklevel=2)
    lam = np.array([spec.lam(j) for j in range(1, n + 1)], dtype=float)
    sup, sub = spec.couplings(n)
    c = np.zeros(n)
    c[n - 1] = 1.0
    for j in range(n, 1, -1):
        up = sup[j - 1] * c[j] if j <= n - 1 else 0.0
        c[j - 2] = -((delta - lam[j - 1]) * c[j - 1] + up) / sub[j - 2]
    return c / np.abs(c).max()


def truncation_error_estimate(spec: TridiagonalSpec, delta: float,
                              c: Sequence[float], n: int) -> float:
    """Leading-order estimate of l_n - delta for the n x n truncation.

    Works in the symmetrized picture: with c' = diag(1/kappa) c the estimate
    is sqrt(f_{n+1} g_{n+1}) c'_n c'_{n+1} / (c'^T c').  At eps = 0 the
    couplings vanish and the estimate is exactly 0.
    """
    c = np.asarray(c, dtype=float)
    if len(c) < n + 1:
        raise IndexOutOfRange(f"need at least {n + 1} coefficients, got {len(c)}")
    if spec.eps == 0.0:
        return 0.0
    f = spec.alpha(n + 1) * spec.eps
    g = spec.beta(n + 1) * spec.eps
    prod = f * g
    if prod < 0:
        raise NonPositiveProduct("f_{n+1} g_{n+1} < 0 in error estimate")
    _, scaling = symmetrize(spec, probe=0)
    kappa = scaling.values(len(c))
    cp = c / kappa
    denom = float(np.dot(cp, cp))
    return math.sqrt(prod) * cp[n - 1] * cp[n] / denom


def adaptive_eigenvalue(spec: TridiagonalSpec, k: int, tol: float = TOL_EIG,
                        trunc_tol: float = TOL_TRUNC,
                        m_start: int = ADAPTIVE_M_START,
                        m_cap: int = ADAPTIVE_M_CAP,
                        seed: float | None = None) -> tuple[float, int]:
    """delta_k with automatically chosen truncation order.

    Doubles m from m_start until the Theorem-3.6 style error estimate at the
    current order drops below trunc_tol (or m hits m_cap).  Returns
    (delta, m_used).  ``seed`` optionally brackets the bisection near the
    previous grid point's value for curve tracing.
    """
    m = max(m_start, 2 * k)
    while True:
        t = spec.truncation(m)
        bracket = None
        if seed is not None:
            w = max(1.0, 1e-3 * abs(seed))
            bracket = (seed - w, seed + w)
        delta = eigenvalue_bisect(t.diag, t.symmetric_offdiag, k, tol, bracket)
        if spec.eps == 0.0:
            return delta, m
        n_coeff = m + 16
        c = backward_recursion(spec, delta, n_coeff)
        est = truncation_error_estimate(spec, delta, c, m)
        if abs(est) < trunc_tol or m >= m_cap:
            return delta, m
        m = min(2 * m, m_cap)


def dense_eigenvalues(t: Truncation) -> np.ndarray:
    """Brute-force oracle: eigenvalues of the dense truncation, sorted."""
    return np.sort(np.linalg.eigvals(t.dense()).real)
