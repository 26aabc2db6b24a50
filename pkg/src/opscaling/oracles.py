"""Brute-force ground truth for tests and ``--verify``.

Nothing here calls into the scaling code, and determinants are computed by
plain Gaussian elimination over ``Fraction`` (not the Bareiss routine used by
the algorithms) so that a bug in one path cannot hide in the other.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

__all__ = [
    "BipartiteGraph",
    "max_matching_size",
    "perfect_matching_exists",
    "brute_force_permanent",
    "brute_force_capacity",
    "gauss_det",
    "blowup_singularity_oracle",
    "BlowupResult",
]

CAPACITY_SEED = 20160417
MAX_COND = 1e9
PENALTY = 1e6


@dataclass(frozen=True)
class BipartiteGraph:
    """Bipartite graph on rows 1..n and columns 1..n."""

    n: int
    edges: frozenset

    def __init__(self, n: int, edges: Iterable[tuple[int, int]]):
        edges = frozenset((int(i), int(j)) for i, j in edges)
        for i, j in edges:
            if not (1 <= i <= n and 1 <= j <= n):
                raise ValueError(f"edge {(i, j)} outside [1, {n}]")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_support(cls, rows: Sequence[Sequence]) -> "BipartiteGraph":
        n = len(rows)
        return cls(n, [(i + 1, j + 1) for i in range(n) for j in range(n) if rows[i][j]])


def max_matching_size(g: BipartiteGraph) -> int:
    """Maximum matching by repeated augmenting paths (Kuhn)."""
    adj = {i: sorted(j for (r, j) in g.edges if r == i) for i in range(1, g.n + 1)}
    match_col: dict[int, int] = {}

    def augment(i: int, seen: set) -> bool:
        for j in adj[i]:
            if j in seen:
                continue
            seen.add(j)
            if j not in match_col or augment(match_col[j], seen):
                match_col[j] = i
                return True
        return False

    return sum(augment(i, set()) for i in range(1, g.n + 1))


def perfect_matching_exists(g: BipartiteGraph) -> bool:
    return max_matching_size(g) == g.n


def brute_force_permanent(A) -> Fraction:
    """Exact permanent by Ryser's inclusion-exclusion formula (n <= 8)."""
    if hasattr(A, "entries") and hasattr(A.entries, "tolist"):
        A = A.entries  # NonnegMatrix
    if hasattr(A, "tolist"):
        A = A.tolist()
    rows = [[Fraction(x) for x in row] for row in A]
    n = len(rows)
    if n > 8:
        raise ValueError("brute_force_permanent is capped at n <= 8")
    if n == 0:
        return Fraction(1)
    # clear denominators row by row; the permanent is linear in each row
    scales = [math.lcm(*(x.denominator for x in row)) for row in rows]
    ints = [[int(x * s) for x in row] for row, s in zip(rows, scales)]
    total = 0
    for k in range(1, n + 1):
        sign = (-1) ** k
        for cols in itertools.combinations(range(n), k):
            prod = 1
            for row in ints:
                prod *= sum(row[c] for c in cols)
                if not prod:
                    break
            total += sign * prod
    return Fraction((-1) ** n * total, math.prod(scales))


def gauss_det(rows: Sequence[Sequence]) -> Fraction:
    """Determinant by textbook Gaussian elimination over the rationals."""
    a = [[Fraction(x) for x in row] for row in rows]
    n = len(a)
    d = Fraction(1)
    for k in range(n):
        p = next((i for i in range(k, n) if a[i][k] != 0), None)
        if p is None:
            return Fraction(0)
        if p != k:
            a[k], a[p] = a[p], a[k]
            d = -d
        d *= a[k][k]
        inv = 1 / a[k][k]
        for i in range(k + 1, n):
            f = a[i][k] * inv
            if f:
                a[i] = [x - f * y for x, y in zip(a[i], a[k])]
    return d


def _kraus_array(T) -> np.ndarray:
    if hasattr(T, "to_numpy"):
        return np.asarray(T.to_numpy(), dtype=float)
    return np.asarray(T, dtype=float)


def brute_force_capacity(T, starts: int = 32, seed: int = CAPACITY_SEED, max_n: int = 4) -> float:
    """Capacity by multi-start Nelder-Mead over Cholesky factors.

    Minimizes ``ln det T(L L^T) - 2 sum ln L_ii`` (which is scale invariant,
    so ``L_11`` is pinned to 1) over lower-triangular L with positive
    diagonal, and returns ``exp`` of the best value found. Points where X
    or T(X) has condition number above 1e9 are rejected, so an infimum
    approached only at the boundary is matched to about 1e-7. Returns 0 when
    T(X) is singular at every admissible X.

    Args:
        T: a ``CPOperator`` or an (m, n, n) Kraus array.
        starts: number of random starting points.
        seed: RNG seed for the starts.
        max_n: size cap; the local search is only trusted for tiny n.
    """
    A = _kraus_array(T)
    n = A.shape[1]
    if n > max_n:
        raise ValueError(f"brute_force_capacity is capped at n <= {max_n}")
    if n == 1:
        return float(np.sum(A[:, 0, 0] ** 2))
    tril = np.tril_indices(n)
    diag_pos = [k for k, (i, j) in enumerate(zip(*tril)) if i == j]
    free = [k for k in range(len(tril[0])) if k != diag_pos[0]]

    def objective(theta):
        v = np.zeros(len(tril[0]))
        v[free] = theta
        L = np.zeros((n, n))
        L[tril] = v
        d = np.diag(L).copy()
        L[np.diag_indices(n)] = np.exp(d)
        X = L @ L.T
        TX = np.einsum("kij,jl,kml->im", A, X, A)
        ex = np.linalg.eigvalsh(X)
        et = np.linalg.eigvalsh((TX + TX.T) / 2)
        # near-singular points let rounding error undercut the true infimum
        if et[0] <= 0 or ex[-1] > MAX_COND * ex[0] or et[-1] > MAX_COND * et[0]:
            return PENALTY
        return float(np.sum(np.log(et))) - 2 * float(np.sum(d))

    rng = np.random.default_rng(seed)
    dim = len(free)
    best = math.inf
    best_x = None
    opts = {"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000 * dim, "maxfev": 4000 * dim}
    for s in range(starts):
        x0 = np.zeros(dim) if s == 0 else rng.normal(scale=1.0, size=dim)
        res = minimize(objective, x0, method="Nelder-Mead", options=opts)
        if res.fun < best:
            best, best_x = float(res.fun), res.x
    # polish: restarted simplices shake off premature contraction
    for _ in range(3):
        res = minimize(objective, best_x, method="Nelder-Mead", options=opts)
        if res.fun < best - 1e-15:
            best, best_x = float(res.fun), res.x
        else:
            break
    # no admissible point at all: T(X) is singular for every X, so the infimum is 0
    return 0.0 if best >= PENALTY else math.exp(best)


@dataclass(frozen=True)
class BlowupResult:
    """Verdict of the blow-up oracle plus the determinants it saw."""

    singular: bool
    dimension: int
    dets: tuple

    @property
    def verdict(self) -> str:
        return "singular" if self.singular else "nonsingular"


def _coefficients(p) -> list:
    """Coefficient matrices of a pencil with the constant term as one more variable."""
    if isinstance(p, (list, tuple)):
        mats = list(p)
    else:
        mats = list(p.coeffs)
        if getattr(p, "A0", None) is not None:
            mats = [p.A0] + mats
    return [m.tolist() if hasattr(m, "tolist") else m for m in mats]


def blowup_singularity_oracle(p, trials: int = 7, seed: int = 0, dim: int | None = None) -> BlowupResult:
    """Random d x d substitution test for non-commutative singularity.

    Samples integer matrices ``B_i`` of size ``d = max(1, n-1)`` (or ``dim``)
    with entries in ``[-2n^2, 2n^2]`` and reports nonsingular as soon as some
    ``det(sum_i B_i kron A_i)`` is nonzero. An affine constant term is treated
    as the coefficient of one more variable.
    """
    mats = _coefficients(p)
    n = len(mats[0])
    d = max(1, n - 1) if dim is None else dim
    bound = 2 * n * n
    rng = random.Random(seed)
    dets = []
    for _ in range(trials):
        big = [[Fraction(0)] * (n * d) for _ in range(n * d)]
        for A in mats:
            B = [[rng.randint(-bound, bound) for _ in range(d)] for _ in range(d)]
            for a in range(d):
                for b in range(d):
                    if not B[a][b]:
                        continue
                    for i in range(n):
                        for j in range(n):
                            if A[i][j]:
                                big[a * n + i][b * n + j] += B[a][b] * Fraction(A[i][j])
        det = gauss_det(big)
        dets.append(det)
        if det != 0:
            return BlowupResult(False, d, tuple(dets))
    return BlowupResult(True, d, tuple(dets))
