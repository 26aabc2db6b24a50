"""Fullness and non-commutative rank of symbolic matrices.

Fullness of a square pencil is decided by operator scaling on the operator
whose Kraus list is the pencil's coefficient matrices. The nc-rank is then
found either by bordering with generic matrices in fresh variables
(``ncrank_classical``) or by padding the operator so that rank decrease by c
becomes plain rank decrease (``ncrank_quantum``).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.linalg import solve_triangular

from .cp_operator import pad_bar, reduce_kraus_basis
from .exact_linalg import NumericMode, RationalMatrix, rank
from .scaling_core import PrecisionExhausted, ScalingConfig, ScalingRun, run_fullness_test
from .symbolic.matrix import SymbolicMatrix, higman_linearize
from .symbolic.pencil import LinearMatrixPencil, affine_to_linear, eliminate_constant_lines

__all__ = [
    "RankReport",
    "fullness",
    "fullness_run",
    "ncrank_classical",
    "ncrank_quantum",
    "ncrank",
    "commutative_rank_estimate",
    "bordered_pencil",
    "shrunk_subspace_witness",
    "is_shrunk_subspace",
    "DEFAULT_DECISION_MODE",
]

DEFAULT_DECISION_MODE = NumericMode("exact-capped", 256)
MAX_ESCALATED_BITS = 1 << 14


@dataclass
class RankReport:
    """Outcome of an nc-rank computation.

    ``subverdicts`` lists one record per scaling run: the parameter tested
    (``r`` or ``c``), the verdict, and the iterations used.
    """

    ncrank: int
    method: str
    commutative_rank_estimate: int
    trials: int
    subverdicts: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "ncrank": self.ncrank,
            "method": self.method,
            "commutative_rank_estimate": self.commutative_rank_estimate,
            "trials": self.trials,
            "subverdicts": self.subverdicts,
        }


def _config(mode: NumericMode | str | None) -> ScalingConfig:
    if mode is None:
        mode = DEFAULT_DECISION_MODE
    if isinstance(mode, str):
        mode = NumericMode.parse(mode)
    return ScalingConfig(mode=mode)


def _run_with_escalation(T, cfg: ScalingConfig, escalate: bool) -> ScalingRun:
    """Run the fullness test, doubling the capped bit budget on exhaustion."""
    while True:
        try:
            return run_fullness_test(T, cfg)
        except PrecisionExhausted:
            mode = cfg.mode
            if not escalate or mode.kind != "exact-capped" or mode.bits * 2 > MAX_ESCALATED_BITS:
                raise
            cfg = ScalingConfig(mode=NumericMode("exact-capped", mode.bits * 2))


def fullness_run(
    p: LinearMatrixPencil, mode: NumericMode | str | None = None, escalate: bool = True
) -> ScalingRun:
    """Scaling run deciding whether the square pencil p is full.

    The constant term is lifted to a fresh variable and the coefficient list
    is reduced to a linearly independent subset first. In capped mode a run
    that exhausts precision is retried with twice the bits (up to 2^14)
    unless ``escalate`` is False.
    """
    if not p.is_square:
        raise ValueError(f"fullness needs a square pencil, got {p.shape}")
    T = reduce_kraus_basis(affine_to_linear(p).to_operator())
    return _run_with_escalation(T, _config(mode), escalate)


def fullness(
    p: LinearMatrixPencil, mode: NumericMode | str | None = None, reduce: bool = False
) -> bool:
    """True iff the pencil is invertible over the free skew field.

    With ``reduce`` set, constant rows and columns are eliminated exactly
    first (``eliminate_constant_lines``), then a float-guided search for an
    exactly verified shrunk subspace (``shrunk_subspace_witness``) may settle
    a non-full verdict; only what remains goes to the scaling run.
    """
    if reduce:
        p, _ = eliminate_constant_lines(p)
        if p is None:
            return False
        if p.rows == 0:
            return True
        if shrunk_subspace_witness(p) is not None:
            return False
    return fullness_run(p, mode).full


def is_shrunk_subspace(mats: list[RationalMatrix], basis: RationalMatrix) -> bool:
    """True iff the columns of ``basis`` span V with ``dim sum_i A_i V < dim V``.

    Such a V makes the pencil with coefficients ``mats`` not full (and the
    operator with Kraus list ``mats`` rank-decreasing); the check is exact.
    """
    n = basis.shape[0]
    images = [A @ basis for A in mats]
    stacked = RationalMatrix(
        [[x for img in images for x in img.tolist()[i]] for i in range(n)]
    )
    return rank(stacked) < rank(basis)


def shrunk_subspace_witness(
    p: LinearMatrixPencil, steps: int = 400, max_denominator: int = 1000
) -> RationalMatrix | None:
    """Search for an exact shrunk subspace of a square pencil, guided by float scaling.

    A float run of alternating scaling concentrates the accumulated right
    factor ``R R^T`` on a shrunk subspace when one exists. Each eigenvalue gap
    of at least three decades proposes the span of the top eigenvectors,
    which is brought to reduced row echelon form, rounded to small-denominator
    rationals, and verified exactly with ``is_shrunk_subspace``.

    Returns:
        An n x s basis of a verified shrunk subspace, or None if the search
        finds nothing (which proves nothing).
    """
    mats = affine_to_linear(p).coeffs
    n = p.n
    if not mats:
        return RationalMatrix.identity(n)
    A = np.array([m.to_numpy() for m in mats], dtype=float)
    right = np.eye(n)
    try:
        for j in range(steps):
            if j % 2 == 0:
                chol = np.linalg.cholesky(np.einsum("kji,kjl->il", A, A))
                step = solve_triangular(chol, np.eye(n), lower=True).T
                A = A @ step
                right = right @ step
                right /= np.abs(right).max()
            else:
                chol = np.linalg.cholesky(np.einsum("kij,klj->il", A, A))
                A = np.stack([solve_triangular(chol, a, lower=True) for a in A])
            if not np.all(np.isfinite(A)):
                break
    except np.linalg.LinAlgError:
        pass
    if not np.all(np.isfinite(right)):
        return None
    X = right @ right.T
    w, vecs = np.linalg.eigh(X / np.abs(X).max())
    logw = np.log10(np.maximum(np.abs(w), 1e-300))
    for s in range(1, n):
        if logw[n - s] - logw[n - s - 1] < 3:
            continue
        basis = _rationalized_span(vecs[:, n - s :], max_denominator)
        if basis is not None and is_shrunk_subspace(list(mats), basis):
            return basis
    return None


def _rationalized_span(vecs: np.ndarray, max_denominator: int) -> RationalMatrix | None:
    """Reduced row echelon form of the span of ``vecs`` (columns), rounded to rationals."""
    Q = vecs.T.copy()
    s, n = Q.shape
    r = 0
    for c in range(n):
        if r == s:
            break
        piv = r + int(np.argmax(np.abs(Q[r:, c])))
        if abs(Q[piv, c]) < 1e-8:
            continue
        Q[[r, piv]] = Q[[piv, r]]
        Q[r] /= Q[r, c]
        for i in range(s):
            if i != r:
                Q[i] -= Q[i, c] * Q[r]
        r += 1
    if r < s:
        return None
    rows = [[Fraction(float(x)).limit_denominator(max_denominator) for x in row] for row in Q]
    return RationalMatrix(rows).T


def commutative_rank_estimate(p: LinearMatrixPencil, trials: int = 7, seed: int = 0) -> int:
    """Max rank of random integer specializations (entries in [-2n^2, 2n^2]).

    The constant term gets its own random coefficient, matching the lifted
    pencil. Returns a lower bound on the commutative rank that is exact with
    high probability.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    mats = p.all_matrices()
    if not mats:
        return 0
    n = max(p.rows, p.cols)
    bound = 2 * n * n
    rng = random.Random(seed)
    best = 0
    for _ in range(trials):
        acc = RationalMatrix.zeros(p.rows, p.cols)
        for A in mats:
            acc = acc + A.scale(rng.randint(-bound, bound))
        best = max(best, rank(acc))
        if best == min(p.rows, p.cols):
            break
    return best


def _square_up(p: LinearMatrixPencil) -> LinearMatrixPencil:
    """Pad a rectangular pencil with zero rows or columns; nc-rank is unchanged."""
    if p.is_square:
        return p
    N = max(p.rows, p.cols)

    def pad(M: RationalMatrix) -> RationalMatrix:
        rows = [list(r) + [0] * (N - p.cols) for r in M.tolist()]
        rows += [[0] * N for _ in range(N - p.rows)]
        return RationalMatrix(rows)

    return LinearMatrixPencil(
        [pad(c) for c in p.coeffs], p.vars, pad(p.A0) if p.A0 is not None else None, shape=(N, N)
    )


def ncrank_quantum(
    p: LinearMatrixPencil,
    mode: NumericMode | str | None = None,
    trials: int = 7,
    seed: int = 0,
) -> RankReport:
    """nc-rank as ``n - c_max`` where c_max is the largest c with T c-rank-decreasing.

    T is c-rank-decreasing iff ``pad_bar(T, c)`` is rank-decreasing; this is
    monotone in c, so c_max is found by binary search.
    """
    sq = _square_up(p)
    n = sq.n
    T = reduce_kraus_basis(affine_to_linear(sq).to_operator())
    cfg = _config(mode)
    sub: list[dict] = []
    cache: dict[int, bool] = {}

    def decreasing(c: int) -> bool:
        if c not in cache:
            run = _run_with_escalation(reduce_kraus_basis(pad_bar(T, c)), cfg, True)
            cache[c] = not run.full
            sub.append(
                {
                    "c": c,
                    "rank_decreasing": cache[c],
                    "iterations": run.iterations,
                    "reason": run.reason,
                }
            )
        return cache[c]

    lo, hi = 0, n  # invariant: decreasing(lo) (vacuous at 0), answer <= hi
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if decreasing(mid):
            lo = mid
        else:
            hi = mid - 1
    est = commutative_rank_estimate(p, trials, seed)
    return RankReport(n - lo, "quantum-padding", est, trials, sorted(sub, key=lambda d: d["c"]))


def bordered_pencil(L: LinearMatrixPencil, r: int, prefix: str = "") -> LinearMatrixPencil:
    """Linear pencil that is full iff ``U L V`` is full for generic U (r x R), V (C x r).

    The pencil is ``[[0, U, 0], [0, I, -L], [V, 0, I]]`` of size r + R + C
    whose Schur complement is ``-U L V``; U and V hold fresh variables named
    ``u_i_j`` and ``v_i_j``.
    """
    R, C = L.rows, L.cols
    N = r + R + C
    A0 = [[Fraction(0)] * N for _ in range(N)]
    for a in range(R):
        A0[r + a][r + a] = Fraction(1)
    for b in range(C):
        A0[r + R + b][r + R + b] = Fraction(1)
    if L.A0 is not None:
        for a in range(R):
            for b in range(C):
                A0[r + a][r + R + b] = -L.A0[a, b]
    names, coeffs = [], []
    for v, c in zip(L.vars, L.coeffs):
        M = [[Fraction(0)] * N for _ in range(N)]
        for a in range(R):
            for b in range(C):
                M[r + a][r + R + b] = -c[a, b]
        names.append(v)
        coeffs.append(RationalMatrix(M))
    for i in range(r):
        for j in range(R):
            names.append(f"{prefix}u_{i + 1}_{j + 1}")
            coeffs.append(RationalMatrix.unit(N, i, r + j))
    for i in range(C):
        for j in range(r):
            names.append(f"{prefix}v_{i + 1}_{j + 1}")
            coeffs.append(RationalMatrix.unit(N, r + R + i, j))
    return LinearMatrixPencil(coeffs, names, RationalMatrix(A0), shape=(N, N))


def ncrank_classical(
    M: SymbolicMatrix | LinearMatrixPencil,
    mode: NumericMode | str | None = None,
    trials: int = 7,
    seed: int = 0,
) -> RankReport:
    """nc-rank as the largest r with ``U_r M V_r`` full, r scanned upward.

    Polynomial entries are first linearized with Higman's bordering, which
    adds k to the nc-rank; the scan then runs over r in (k, k + min(m, n)]
    and stops at the first non-full r.
    """
    if isinstance(M, LinearMatrixPencil):
        L, k = M, 0
        rows, cols = M.rows, M.cols
    else:
        L, k = higman_linearize(M)
        rows, cols = M.rows, M.cols
    cfg = _config(mode)
    sub: list[dict] = []
    best = k
    for r in range(k + 1, k + min(rows, cols) + 1):
        B = bordered_pencil(L, r)
        T = reduce_kraus_basis(affine_to_linear(B).to_operator())
        run = _run_with_escalation(T, cfg, True)
        sub.append({"r": r - k, "full": run.full, "iterations": run.iterations, "reason": run.reason})
        if not run.full:
            break
        best = r
    est = commutative_rank_estimate(L, trials, seed) - k
    return RankReport(best - k, "classical-borders", max(est, 0), trials, sub)


def ncrank(
    M: SymbolicMatrix | LinearMatrixPencil,
    method: str = "quantum",
    mode: NumericMode | str | None = None,
    trials: int = 7,
    seed: int = 0,
) -> RankReport:
    """Dispatch to ``ncrank_quantum`` (pencils only) or ``ncrank_classical``."""
    if method == "quantum":
        if not isinstance(M, LinearMatrixPencil):
            L, k = higman_linearize(M)
            rep = ncrank_quantum(L, mode, trials, seed)
            rep.ncrank -= k
            rep.commutative_rank_estimate = max(rep.commutative_rank_estimate - k, 0)
            return rep
        return ncrank_quantum(M, mode, trials, seed)
    if method == "classical":
        return ncrank_classical(M, mode, trials, seed)
    raise ValueError(f"unknown method {method!r}")
