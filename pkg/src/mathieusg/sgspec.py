"""Sierpinski-gasket geometry, spectral decimation and Neumann eigenfunctions.

Graph approximations Gamma_m of the gasket are built from the three
half-scale contractions fixing q0 = (0,0), q1 = (1,0), q2 = (1/2, sqrt3/2).
Laplacian eigenvalues propagate between levels through

    lam_{m-1} = lam_m (5 - lam_m),

whose two right inverses psi_-, psi_+ generate every eigenvalue of the
continuous Laplacian as  lam_e = 5^(|e|+m0) * Psi(psi_e(lam_init)),  where e
is a finite +/- branch word and Psi(x) = (3/2) lim 5^l psi_-^l(x).  The
binary code d(e) ranks lam_e within its family, which makes ordering and
counting cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (DomainError, EigenvalueAbsent, ForbiddenEigenvalue,
                     LevelTooLarge)

MAX_LEVEL = 10
FORBIDDEN = (2.0, 5.0, 6.0)

# corner coordinates doubled so every V_m vertex is an integer pair in units
# of 2^-(m+1): point = (ix/2^(m+1), iy*sqrt3/2^(m+1))
_CORNERS = ((0, 0), (2, 0), (1, 1))


@dataclass(frozen=True)
class SGLevel:
    """Level-m vertex set V_m with adjacency, cells and planar coordinates."""

    m: int
    coords: np.ndarray            # (n, 2) float positions
    words: tuple[str, ...]        # owner address of each vertex
    edges: tuple[tuple[int, int], ...]
    cells: tuple[tuple[int, int, int], ...]
    boundary: tuple[int, int, int]
    neighbors: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.words)

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])


@dataclass(frozen=True)
class SGFunction:
    level: SGLevel
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != self.level.size:
            raise ValueError("value vector does not match vertex count")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite function values")

    def laplacian(self) -> np.ndarray:
        """Delta_m u(x) = sum_{y~x} (u(y) - u(x)) at every vertex."""
        u = self.values
        out = np.empty_like(u)
        for i, nb in enumerate(self.level.neighbors):
            out[i] = sum(u[j] for j in nb) - len(nb) * u[i]
        return out

    def eigen_residual(self, lam: float) -> float:
        """max |Delta_m u + lam u| over V_m (boundary rows use degree 2)."""
        return float(np.abs(self.laplacian() + lam * self.values).max())


@lru_cache(maxsize=16)
def build_level(m: int) -> SGLevel:
    """Construct Gamma_m with deterministic word-lexicographic ordering.

    Shared cell corners are owned by the lexicographically smallest address
    word; vertices are sorted by owner word.
    """
    if not 0 <= m <= MAX_LEVEL:
        raise LevelTooLarge(f"level {m} outside 0..{MAX_LEVEL}")
    owner: dict[tuple[int, int], str] = {}
    cells_raw: list[tuple[tuple[int, int], ...]] = []
    for widx in range(3 ** m):
        w, t = [], widx
        for _ in range(m):
            w.append(t % 3)
            t //= 3
        w.reverse()
        base = [0, 0]
        for j, wj in enumerate(w):
            s = 2 ** (m - 1 - j)
            base[0] += _CORNERS[wj][0] * s
            base[1] += _CORNERS[wj][1] * s
        wstr = "".join(map(str, w))
        tri = []
        for i in range(3):
            p = (base[0] + _CORNERS[i][0], base[1] + _CORNERS[i][1])
            addr = wstr + str(i)
            if p not in owner or addr < owner[p]:
                owner[p] = addr
            tri.append(p)
        cells_raw.append(tuple(tri))
    vlist = sorted(owner, key=owner.get)
    index = {p: i for i, p in enumerate(vlist)}
    edges = set()
    cells = []
    for tri in cells_raw:
        ids = tuple(index[p] for p in tri)
        cells.append(ids)
        for a in range(3):
            for b in range(a + 1, 3):
                edges.add((min(ids[a], ids[b]), max(ids[a], ids[b])))
    nb: list[list[int]] = [[] for _ in vlist]
    for i, j in edges:
        nb[i].append(j)
        nb[j].append(i)
    coords = np.array([[p[0] / 2 ** (m + 1), p[1] * math.sqrt(3) / 2 ** (m + 1)]
                       for p in vlist])
    boundary = tuple(index[(cx * 2 ** m, cy * 2 ** m)] for cx, cy in _CORNERS)
    return SGLevel(m, coords, tuple(owner[p] for p in vlist),
                   tuple(sorted(edges)), tuple(cells), boundary,
                   tuple(tuple(sorted(x)) for x in nb))


def vertex_measure(level: SGLevel) -> np.ndarray:
    """Natural level-m measure: each cell splits 3^-m mass over its corners."""
    w = np.zeros(level.size)
    for tri in level.cells:
        for i in tri:
            w[i] += 1.0
    return w / (3.0 ** (level.m + 1))


def discrete_inner(f: SGFunction, g: SGFunction) -> float:
    if f.level.m != g.level.m:
        raise ValueError("functions live on different levels")
    w = vertex_measure(f.level)
    return float(np.sum(w * f.values * g.values))


def normal_derivatives(f: SGFunction) -> tuple[float, float, float]:
    """Discrete normal derivative (5/3)^m (2u(q_i) - neighbor sum) at V_0."""
    scale = (5.0 / 3.0) ** f.level.m
    out = []
    for q in f.level.boundary:
        nb = f.level.neighbors[q]
        out.append(scale * (2.0 * f.values[q] - sum(f.values[j] for j in nb)))
    return tuple(out)


# ---------------------------------------------------------------------------
# decimation maps


def psi(sign: str, x: float) -> float:
    """Branch maps psi_-(x), psi_+(x) inverting x -> x(5-x) on [0, 25/4].

    psi_- uses the cancellation-free form 2x/(5+sqrt(25-4x)) so that tiny
    arguments keep full relative accuracy (the Psi limit needs this).
    """
    if x > 6.25:
        raise DomainError(f"psi branch undefined for x = {x:g} > 25/4")
    root = math.sqrt(25.0 - 4.0 * x)
    if sign == "+":
        return (5.0 + root) / 2.0
    if sign == "-":
        return 2.0 * x / (5.0 + root)
    raise ValueError("sign must be '+' or '-'")


def decimation_limit(x: float, rel_tol: float = 1e-13, max_iter: int = 200) -> float:
    """Psi(x) = (3/2) lim 5^l psi_-^l(x), iterated to relative stagnation."""
    v = x
    fac = 1.5
    prev = None
    for _ in range(max_iter):
        cur = fac * v
        if prev is not None and abs(cur - prev) <= rel_tol * abs(cur):
            return cur
        prev = cur
        v = psi("-", v)
        fac *= 5.0
    return prev


@dataclass(frozen=True)
class DecimationPath:
    """Branch word e with generation of birth m0 and initial eigenvalue.

    e is empty or starts with '+'; for lambda_init = 6 the forced psi_+ step
    (psi_-(6) = 2 is forbidden) is implicit and accounted for by the extra
    factor of 5.  m0 may be negative on the infinite gasket.
    """

    m0: int
    lambda_init: int
    e: tuple[str, ...] = ()

    def __post_init__(self):
        if self.lambda_init not in (5, 6):
            raise ValueError("lambda_init must be 5 or 6")
        if self.e and self.e[0] != "+":
            raise ValueError("branch word must be empty or start with '+'")
        if any(s not in "+-" for s in self.e):
            raise ValueError("branch word entries must be '+' or '-'")


def lambda_of_path(p: DecimationPath) -> float:
    """Continuous eigenvalue lam_e = 5^(|e|+m0[+1]) Psi(psi_e(x0))."""
    if p.lambda_init == 6:
        x, shift = 3.0, p.m0 + 1
    else:
        x, shift = 5.0, p.m0
    for s in reversed(p.e):
        x = psi(s, x)
    return 5.0 ** (len(p.e) + shift) * decimation_limit(x)


def level_eigenvalue_sequence(p: DecimationPath, m_max: int) -> list[float]:
    """Graph eigenvalues lam^(m) for m = m0 .. m_max along the path.

    The branch word acts innermost-first: the last letter of e is the first
    refinement step after the (possibly forced) initial one; beyond the word
    every step takes psi_-.
    """
    seq = [float(p.lambda_init)]
    if p.lambda_init == 6:
        seq.append(psi("+", 6.0))
    for s in reversed(p.e):
        seq.append(psi(s, seq[-1]))
    while len(seq) < m_max - p.m0 + 1:
        seq.append(psi("-", seq[-1]))
    for lam in seq[1:]:
        if lam in FORBIDDEN:
            raise ForbiddenEigenvalue(f"path passes through eigenvalue {lam}")
    return seq[:m_max - p.m0 + 1]


def d_of_path(e: tuple[str, ...]) -> int:
    """Rank code: lam_e is the (d(e)+1)-th smallest in its family."""
    d = 0
    prev = 0
    for i, s in enumerate(e):
        if i == 0:
            di = 1
        elif s == "+":
            di = 1 - prev
        else:
            di = prev
        d = 2 * d + di
        prev = di
    return d


def path_of_index(d: int) -> tuple[str, ...]:
    """Inverse of d_of_path: branch word of the (d+1)-th smallest eigenvalue."""
    if d < 0:
        raise ValueError("index must be nonnegative")
    if d == 0:
        return ()
    bits = bin(d)[2:]
    e = []
    prev = None
    for i, ch in enumerate(bits):
        di = int(ch)
        e.append("+" if (i == 0 or di != prev) else "-")
        prev = di
    return tuple(e)


def ordered_eigenvalues(m0: int, lambda_init: int, count: int) -> np.ndarray:
    """lam_1 < lam_2 < ... < lam_count for one family, via the d-code."""
    if count < 1:
        raise ValueError("count must be >= 1")
    out = np.array([lambda_of_path(DecimationPath(m0, lambda_init,
                                                  path_of_index(d)))
                    for d in range(count)])
    if not np.all(np.diff(out) > 0):
        raise AssertionError("d-ordering produced a non-increasing list")
    return out


def counting_function(m0: int, lambda_init: int, x: float) -> int:
    """rho(x) = #{e : lam_e <= x}, by length-bounded enumeration.

    Length-n words occupy the contiguous code block [2^(n-1), 2^n - 1], so
    enumeration stops at the first length whose smallest member (code
    2^(n-1)) already exceeds x.
    """
    if x < 0:
        return 0
    count = 0
    if lambda_of_path(DecimationPath(m0, lambda_init)) <= x:
        count += 1
    n = 1
    while True:
        smallest = lambda_of_path(
            DecimationPath(m0, lambda_init, path_of_index(2 ** (n - 1))))
        if smallest > x:
            break
        for code in range(2 ** (n - 1), 2 ** n):
            p = DecimationPath(m0, lambda_init, path_of_index(code))
            if lambda_of_path(p) <= x:
                count += 1
        n += 1
        if n > 48:
            raise OverflowError("counting function range too large")
    return count


# ---------------------------------------------------------------------------
# eigenfunctions


def _laplacian_matrix(level: SGLevel) -> np.ndarray:
    n = level.size
    a = np.zeros((n, n))
    for i, j in level.edges:
        a[i, j] = a[j, i] = -1.0
    d = -a.sum(axis=1)
    return a + np.diag(d)


def _pattern_5_series(level: SGLevel) -> np.ndarray:
    """+-1 alternation around the outer cycle of off-corner side vertices."""
    n = level.size
    q = [level.coords[i] for i in level.boundary]
    # vertices strictly inside the three boundary sides, excluding midpoints
    pat = np.zeros(n)
    ring = []
    for i in range(n):
        if i in level.boundary:
            continue
        p = level.coords[i]
        for a in range(3):
            b = (a + 1) % 3
            qa, qb = q[a], q[b]
            cross = (qb[0] - qa[0]) * (p[1] - qa[1]) - (qb[1] - qa[1]) * (p[0] - qa[0])
            if abs(cross) < 1e-12:
                mid = 0.5 * (np.asarray(qa) + np.asarray(qb))
                if np.hypot(*(p - mid)) > 1e-12:
                    t = np.dot(p - np.asarray(qa), np.asarray(qb) - qa)
                    ring.append((a, t, i))
    ring.sort()
    for k, (_, _, i) in enumerate(ring):
        pat[i] = 1.0 if k % 2 == 0 else -1.0
    return pat


def _pattern_6_series(level: SGLevel) -> np.ndarray:
    """+1 at side midpoints, -1 at the three cell vertices facing the center."""
    n = level.size
    q = [np.asarray(level.coords[i]) for i in level.boundary]
    center = sum(q) / 3.0
    pat = np.zeros(n)
    mids = [0.5 * (q[a] + q[(a + 1) % 3]) for a in range(3)]
    for i in range(n):
        p = level.coords[i]
        for mp in mids:
            if np.hypot(*(p - mp)) < 1e-12:
                pat[i] = 1.0
    # inner ring: the three non-boundary vertices closest to the center
    interior = [(np.hypot(*(level.coords[i] - center)), i)
                for i in range(n) if pat[i] == 0.0 and i not in level.boundary]
    interior.sort()
    for _, i in interior[:3]:
        pat[i] = -1.0
    return pat


def initial_eigenfunction(lambda_init: int, m0_abs: int = 2) -> SGFunction:
    """Discrete Neumann eigenfunction of Gamma_2 at eigenvalue 5 or 6.

    Solves the dense eigenproblem, projects the target sign pattern onto the
    eigenspace, and scales to max-abs 1 with the first nonzero value
    positive.  Raises EigenvalueAbsent if lambda_init is not in the level
    spectrum (which would indicate a stencil bug).
    """
    if lambda_init not in (5, 6):
        raise ValueError("lambda_init must be 5 or 6")
    level = build_level(m0_abs)
    lap = _laplacian_matrix(level)
    w, v = np.linalg.eigh(lap)
    sel = np.abs(w - lambda_init) < 1e-8
    if not np.any(sel):
        raise EigenvalueAbsent(f"{lambda_init} not in the level-{m0_abs} "
                               f"Neumann spectrum")
    basis = v[:, sel]
    pattern = (_pattern_5_series if lambda_init == 5 else _pattern_6_series)(level)
    proj = basis @ (basis.T @ pattern)
    if np.abs(proj).max() < 1e-8:
        raise EigenvalueAbsent(f"target pattern not in the lambda = "
                               f"{lambda_init} eigenspace")
    vals = proj / np.abs(proj).max()
    first = np.nonzero(np.abs(vals) > 1e-12)[0][0]
    if vals[first] < 0:
        vals = -vals
    return SGFunction(level, vals)


def extend_eigenfunction(f: SGFunction, lam_m: float) -> SGFunction:
    """Unique one-level decimation extension of a lam_(m-1)-eigenfunction.

    New midpoint values follow the local rule

        u(y0) = ((4 - lam)(u(x1) + u(x2)) + 2 u(x0)) / ((2 - lam)(5 - lam)),

    y0 opposite x0 in each previous-level cell; the result is guarded by the
    eigen-equation residual contract rather than trusted.
    """
    if lam_m in FORBIDDEN or abs((2 - lam_m) * (5 - lam_m)) < 1e-14:
        raise ForbiddenEigenvalue(f"cannot extend through lam = {lam_m}")
    prev = f.level
    new = build_level(prev.m + 1)
    pos = {c: i for i, c in enumerate(_int_coords(new))}
    vals = np.full(new.size, np.nan)
    prev_int = _int_coords(prev)
    for i, c in enumerate(prev_int):
        vals[pos[(2 * c[0], 2 * c[1])]] = f.values[i]
    den = (2.0 - lam_m) * (5.0 - lam_m)
    for tri in prev.cells:
        pts = [prev_int[t] for t in tri]
        uv = [f.values[t] for t in tri]
        for a in range(3):
            x1, x2 = pts[(a + 1) % 3], pts[(a + 2) % 3]
            mid = (x1[0] + x2[0], x1[1] + x2[1])
            vals[pos[mid]] = ((4.0 - lam_m) * (uv[(a + 1) % 3] + uv[(a + 2) % 3])
                              + 2.0 * uv[a]) / den
    if np.isnan(vals).any():
        raise AssertionError("extension missed a vertex")
    return SGFunction(new, vals)


def _int_coords(level: SGLevel) -> list[tuple[int, int]]:
    scale = 2 ** (level.m + 1)
    out = []
    for x, y in level.coords:
        out.append((round(x * scale), round(y * scale / math.sqrt(3))))
    return out


class NeumannBasis:
    """Eigenfunction family from one initial function, cached per (path, level).

    The cache is built on demand and only ever appended to; share instances
    across threads only after the needed entries exist (build-once contract).
    """

    def __init__(self, lambda_init: int, m0_abs: int = 2):
        self.lambda_init = lambda_init
        self.m0_abs = m0_abs
        self.initial = initial_eigenfunction(lambda_init, m0_abs)
        self._cache: dict[tuple[tuple[str, ...], int], SGFunction] = {}

    def eigenfunction(self, p: DecimationPath, level: int) -> SGFunction:
        """Path eigenfunction evaluated on V_level (level >= birth level)."""
        if level < self.m0_abs:
            raise ValueError(f"render level below birth level {self.m0_abs}")
        key = (p.e, level)
        if key not in self._cache:
            seq = level_eigenvalue_sequence(
                DecimationPath(self.m0_abs, self.lambda_init, p.e),
                level)
            f = self.initial
            for lam in seq[1:]:
                f = extend_eigenfunction(f, lam)
            self._cache[key] = f
        return self._cache[key]

    def by_rank(self, rank: int, level: int) -> SGFunction:
        """rank-th smallest eigenvalue's eigenfunction (rank >= 1)."""
        return self.eigenfunction(
            DecimationPath(self.m0_abs, self.lambda_init,
                           path_of_index(rank - 1)), level)


def eigenfunction_values(p: DecimationPath, basis: NeumannBasis,
                         level: int) -> SGFunction:
    """Module-level convenience wrapper over NeumannBasis.eigenfunction."""
    return basis.eigenfunction(p, level)
