"""Alternating operator scaling: rank non-decreasing test and capacity.

Two engines share one entry point:

* the exact engine follows the U_j recursion on integer Kraus matrices,
  ``U_0 = T*(I)``, ``U_j = Trn(T(U_{j-1}^{-1}))`` for odd j and
  ``Trn(T*(U_{j-1}^{-1}))`` for even j, keeping each ``U_j`` as an integer
  matrix over a common positive denominator;
* the float engine renormalizes the Kraus matrices themselves with Cholesky
  factors and keeps a running sum of log-determinants.

In exact arithmetic both produce the same distances ``eps_j`` and the same
capacity estimates; the float engine is the practical one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import IO, Iterable

import numpy as np
from scipy.linalg import solve_triangular

from .cp_operator import CPOperator, integerize, ds as ds_report
from .exact_linalg import (
    NumericMode,
    RationalMatrix,
    bareiss_adjugate,
    int_matmul,
    mpz,
    rank,
)

try:
    from gmpy2 import gcd as _gcd
except ImportError:  # pragma: no cover
    _gcd = math.gcd

__all__ = [
    "PrecisionExhausted",
    "ScalingConfig",
    "ScalingRun",
    "iteration_bound",
    "capacity_iteration_bound",
    "truncation_bits",
    "capacity_truncation_bits",
    "capacity_lower_bound",
    "square_capacity_lower_bound",
    "run_fullness_test",
    "approx_capacity",
    "capacity_bracket_from_fixed_point",
    "scaling_sequence",
    "write_trace",
]

RANK_NON_DECREASING = "rank-non-decreasing"
RANK_DECREASING = "rank-decreasing"
CAPACITY = "capacity"


class PrecisionExhausted(ArithmeticError):
    """Truncated iterate stopped being positive definite (or float breakdown)."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


# ---------------------------------------------------------------------------
# bound formulas (natural logs, ceilings last)


def iteration_bound(n: int, m: int, M: int) -> int:
    """Steps after which a full operator must have crossed the 1/6n threshold."""
    if n < 1 or m < 1 or M < 1:
        raise ValueError("n, m, M must be positive")
    L = M * m * n
    if L == 1:
        return 2
    return 2 + math.ceil(144 * n * n * math.log(L))


def capacity_iteration_bound(n: int, M: int, eps: float) -> int:
    """``ceil((4 n^3 / eps^2) (1 + 10 n^2 ln(Mn)))``."""
    return math.ceil((4 * n**3 / eps**2) * (1 + 10 * n * n * math.log(M * n)))


def _alpha(n: int, m: int, M: int) -> int:
    return (M * M * n * n * m) ** (n - 1)


def truncation_bits(n: int, m: int, M: int, t: int | None = None) -> int:
    """Bits after the binary point that keep truncated and exact distances within 1/12n.

    ``P = max(64, ceil(10 t^2 log2(2 alpha)) + 64)`` with
    ``alpha = (M^2 n^2 m)^(n-1)``. Returns 64 for n = 1 (nothing is iterated).
    """
    if n == 1:
        return 64
    if t is None:
        t = iteration_bound(n, m, M)
    log2_two_alpha = 1 + (n - 1) * math.log2(M * M * n * n * m)
    return max(64, math.ceil(10 * t * t * log2_two_alpha) + 64)


def capacity_truncation_bits(n: int, M: int, eps: float) -> int:
    """``max(64, ceil((1/eps) n^12 ln^4(Mn) ln(n^4/eps^2)))``."""
    val = (1 / eps) * n**12 * math.log(M * n) ** 4 * math.log(n**4 / eps**2)
    return max(64, math.ceil(val))


def capacity_lower_bound(n: int, m: int, M: int) -> Fraction:
    """``(Mmn)^(-4n)``: capacity floor of a right-normalized full integer operator."""
    return Fraction(1, (M * m * n) ** (4 * n))


def square_capacity_lower_bound(n: int) -> Fraction:
    """``n^(-2n)``: floor for operators built from a square tuple."""
    return Fraction(1, n ** (2 * n))


# ---------------------------------------------------------------------------
# configuration and run record


@dataclass(frozen=True)
class ScalingConfig:
    """Knobs for one scaling run.

    Attributes:
        mode: arithmetic; see ``NumericMode``.
        max_iterations: override for the step budget t.
        truncation_bits: override for the bit budget P (exact modes, >= 64).
        ds_threshold: override for the stopping threshold.
        epsilon: relative accuracy target for capacity runs.
        idealized: exact arithmetic with no truncation at all.
        early_exit: stop with a rank-decreasing verdict once the determinant
            potential proves the capacity is below its lower bound.
        keep_sequence: retain every ``U_j`` (memory heavy).
    """

    mode: NumericMode = NumericMode("exact-capped", 256)
    max_iterations: int | None = None
    truncation_bits: int | None = None
    ds_threshold: Fraction | float | None = None
    epsilon: float | None = None
    idealized: bool = False
    early_exit: bool = True
    keep_sequence: bool = False

    def __post_init__(self):
        if isinstance(self.mode, str):
            object.__setattr__(self, "mode", NumericMode.parse(self.mode))
        if self.truncation_bits is not None and self.truncation_bits < 64:
            raise ValueError("truncation_bits must be >= 64")
        if self.ds_threshold is not None and self.ds_threshold <= 0:
            raise ValueError("ds_threshold must be positive")
        if self.epsilon is not None and not 0 < self.epsilon <= 0.5:
            raise ValueError("epsilon must lie in (0, 1/2]")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.idealized and not self.mode.is_exact:
            raise ValueError("idealized runs need an exact mode")


@dataclass
class ScalingRun:
    """Trace and outcome of one scaling run.

    ``eps_trace[k]`` belongs to step ``steps[k]``; ``log_det_trace[k]`` is
    ``ln(Det U_{j-1} Det U_{j-2})`` at that step (in float mode the
    equivalent running sum of ``ln det R_i``). ``progress`` holds the float
    engine's ``(gap, det)`` pairs of the normalized operator at each step.
    """

    n: int
    m: int
    M: int
    mode: str
    threshold: Fraction | float
    max_iterations: int
    truncation_bits: int | None
    verdict: str = ""
    reason: str = ""
    first_hit: int | None = None
    iterations: int = 0
    steps: list[int] = field(default_factory=list)
    eps_trace: list = field(default_factory=list)
    log_det_trace: list[float] = field(default_factory=list)
    det_accumulator: Fraction | float | None = None
    value: Fraction | float | None = None
    truncations: int = 0
    progress: list[tuple[float, float]] = field(default_factory=list)
    sequence: list[RationalMatrix] = field(default_factory=list)
    bracket: tuple[float, float] | None = None
    right_factor: np.ndarray | None = None

    @property
    def full(self) -> bool:
        return self.verdict == RANK_NON_DECREASING

    @property
    def min_eps(self):
        return min(self.eps_trace) if self.eps_trace else None

    def trace_records(self) -> list[dict]:
        return [
            {"j": j, "eps_j": _decimal_string(e), "log_det_accumulator": ld}
            for j, e, ld in zip(self.steps, self.eps_trace, self.log_det_trace)
        ]


def _decimal_string(x) -> str:
    if isinstance(x, Fraction):
        with localcontext() as ctx:
            ctx.prec = 25
            return str(Decimal(x.numerator) / Decimal(x.denominator))
    return repr(float(x))


def write_trace(run: ScalingRun, out: IO[str]) -> None:
    """One JSON object per iteration: ``{j, eps_j, log_det_accumulator}``."""
    for rec in run.trace_records():
        out.write(json.dumps(rec, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# integer kernels


def _transpose_sparse(sk):
    return [[(j, i, v) for (i, j, v) in a] for a in sk]


def _apply_int(sk, X, n: int):
    """``sum_k A_k X A_k^T`` with sparse integer Kraus triples, X symmetric."""
    out = [[0] * n for _ in range(n)]
    dense_cutoff = 2 * n**3
    for a in sk:
        s = len(a)
        if s * s <= dense_cutoff:
            for i, j, v in a:
                Xj = X[j]
                row = out[i]
                for k, l, w in a:
                    if k >= i:
                        row[k] += v * w * Xj[l]
        else:
            A = [[0] * n for _ in range(n)]
            for i, j, v in a:
                A[i][j] = v
            AX = int_matmul(A, X)
            for i in range(n):
                AXi = AX[i]
                row = out[i]
                for k in range(i, n):
                    Ak = A[k]
                    row[k] += sum(x * y for x, y in zip(AXi, Ak) if y)
    for i in range(n):
        for k in range(i):
            out[i][k] = out[k][i]
    return out


def _ln(x) -> float:
    """Natural log of a positive (possibly huge, possibly GMP) integer."""
    b = x.bit_length()
    if b <= 1000:
        return math.log(int(x))
    shift = b - 64
    return math.log(int(x >> shift)) + shift * math.log(2)


def _log_det(d, D, n: int) -> float:
    return _ln(d) - n * _ln(D)


def _exact_gap(W, s, n: int) -> Fraction:
    """``tr[(W/s - I)^2]`` for integer W and positive integer s."""
    Z = [[W[i][k] - (s if i == k else 0) for k in range(n)] for i in range(n)]
    num = sum(Z[i][k] * Z[k][i] for i in range(n) for k in range(n))
    return Fraction(int(num), int(s) * int(s))


def _as_matrix(N, D) -> RationalMatrix:
    return RationalMatrix([[Fraction(int(x), int(D)) for x in row] for row in N])


# ---------------------------------------------------------------------------
# engines


def _resolved_bits(cfg: ScalingConfig, n, m, M, t, capacity_eps) -> int | None:
    if cfg.idealized or not cfg.mode.is_exact:
        return None
    if cfg.truncation_bits is not None:
        return cfg.truncation_bits
    if cfg.mode.kind == "exact-capped":
        return cfg.mode.bits
    if capacity_eps is not None:
        return capacity_truncation_bits(n, M, capacity_eps)
    return truncation_bits(n, m, M, t)


def _exact_engine(T: CPOperator, run: ScalingRun, cfg: ScalingConfig, capacity: bool):
    n = T.n
    P = run.truncation_bits
    lazy = cfg.mode.kind == "exact-certified" and cfg.truncation_bits is None
    thr = Fraction(run.threshold)
    sk = [[(i, j, mpz(v)) for (i, j, v) in a] for a in T.sparse_int_kraus()]
    skT = _transpose_sparse(sk)
    eye = [[mpz(int(i == j)) for j in range(n)] for i in range(n)]

    U0 = _apply_int(skT, eye, n)
    TI = _apply_int(sk, eye, n)
    if bareiss_adjugate(TI)[0] == 0 or bareiss_adjugate(U0)[0] == 0:
        run.verdict, run.reason = RANK_DECREASING, "T(I) or T*(I) singular"
        run.value = Fraction(0)
        return

    if capacity:
        rep = ds_report(T)
        run.steps.append(0)
        run.eps_trace.append(rep.ds_value)
        run.log_det_trace.append(0.0)
        if rep.ds_value <= thr:
            run.verdict, run.reason, run.first_hit = CAPACITY, "threshold", 0
            run.det_accumulator = run.value = Fraction(1)
            return

    # Det U_{j-1} Det U_{j-2} = det T(X) / det X >= cap(T) for X = U_{j-2}^{-1};
    # a full integer operator has cap(T) >= n^(-2n)
    log_f = -2 * n * math.log(n)
    one = mpz(1)
    # (adj, det, denominator) of U_{j-2}; (numerator, denominator) of U_{j-1}
    adj2, d2, D2 = eye, one, one
    N1, D1 = U0, one
    logdet2 = 0.0
    if cfg.keep_sequence:
        run.sequence.extend([RationalMatrix.identity(n), _as_matrix(U0, 1)])

    for j in range(1, run.max_iterations + 1):
        d1, adj1 = bareiss_adjugate(N1, pivoting=False)
        if d1 <= 0:
            raise PrecisionExhausted(
                f"U_{j - 1} lost positive definiteness at {P} bits; raise the bit budget",
                step=j,
            )
        logdet1 = _log_det(d1, D1, n)
        if cfg.early_exit and logdet2 + logdet1 < log_f - 1:
            run.iterations = j - 1
            run.verdict, run.reason = RANK_DECREASING, "capacity potential below lower bound"
            run.value = Fraction(0)
            return

        K = _apply_int(sk if j % 2 else skT, adj1, n)  # U_j = D1 K / d1
        if P is None or (lazy and _fits(K, D1, d1, P)):
            g = D1 * _content(K)
            g = _gcd(g, d1)
            Nj = [[x * D1 // g for x in row] for row in K]
            Dj = d1 // g
        else:
            Nj = [[_trn(x * D1, d1, P) for x in row] for row in K]
            Dj = one << P
            run.truncations += 1
        if cfg.keep_sequence:
            run.sequence.append(_as_matrix(Nj, Dj))

        W = int_matmul(adj2, Nj)
        if D2 != 1:
            W = [[D2 * x for x in row] for row in W]
        eps = _exact_gap(W, d2 * Dj, n)
        acc = logdet1 + logdet2
        run.steps.append(j)
        run.eps_trace.append(eps)
        run.log_det_trace.append(acc)
        run.iterations = j
        if eps <= thr:
            run.first_hit = j
            dacc = Fraction(int(d1), int(D1) ** n) * Fraction(int(d2), int(D2) ** n)
            run.det_accumulator = dacc
            if capacity:
                run.verdict, run.reason, run.value = CAPACITY, "threshold", dacc
            else:
                run.verdict, run.reason = RANK_NON_DECREASING, "threshold"
            return
        adj2, d2, D2, logdet2 = adj1, d1, D1, logdet1
        N1, D1 = Nj, Dj

    run.verdict, run.reason = RANK_DECREASING, "iteration bound reached"
    run.value = Fraction(0)


def _content(K):
    g = 0
    for row in K:
        for x in row:
            if x:
                g = _gcd(g, x)
                if g == 1:
                    return g
    return g or 1


def _fits(K, D1, d1, P) -> bool:
    """True if the reduced exact denominator of ``D1 K / d1`` is at most 2^P."""
    g = _gcd(D1 * _content(K), d1)
    return (d1 // g).bit_length() <= P + 1


def _trn(num, den, P):
    """Truncate ``num/den`` toward zero to P fractional bits; returns the numerator over 2^P."""
    if num >= 0:
        return (num << P) // den
    return -((-num << P) // den)


def _float_engine(T: CPOperator, run: ScalingRun, cfg: ScalingConfig, capacity: bool):
    n = T.n
    thr = float(run.threshold) * (1 + 1e-12)
    eye = RationalMatrix.identity(n)
    # Step 1 is decided exactly: it is cheap and a float rank test is not.
    from .cp_operator import apply as _apply, dual_apply as _dual

    if rank(_apply(T, eye)) < n or rank(_dual(T, eye)) < n:
        run.verdict, run.reason = RANK_DECREASING, "T(I) or T*(I) singular"
        run.value = 0.0
        return

    A = T.to_numpy()
    right = np.eye(n)
    # cap(T) <= exp(log_acc) once one side is normalized; cap(T) >= n^(-2n) if full
    log_f = -2 * n * math.log(n)
    log_acc = 0.0  # sum_{i<j} ln det R_i
    for j in range(0, run.max_iterations + 1):
        if j % 2 == 0:
            Mj = np.einsum("kji,kjl->il", A, A)  # T_j*(I)
        else:
            Mj = np.einsum("kij,klj->il", A, A)  # T_j(I)
        Mj = (Mj + Mj.T) / 2
        Dm = Mj - np.eye(n)
        gap = float(np.sum(Dm * Dm))
        if j == 0:
            other = np.einsum("kij,klj->il", A, A) - np.eye(n)
            eps = gap + float(np.sum(other * other))
        else:
            eps = gap
        if j >= 1 or capacity:
            run.steps.append(j)
            run.eps_trace.append(eps)
            run.log_det_trace.append(log_acc)
        run.iterations = j
        if j >= 1 and cfg.early_exit and log_acc < log_f - 1:
            run.verdict, run.reason = RANK_DECREASING, "capacity potential below lower bound"
            run.value = 0.0
            return
        if (j >= 1 or capacity) and eps <= thr:
            run.first_hit = j
            run.det_accumulator = math.exp(log_acc)
            run.right_factor = right
            if capacity:
                run.verdict, run.reason, run.value = CAPACITY, "threshold", run.det_accumulator
            else:
                run.verdict, run.reason = RANK_NON_DECREASING, "threshold"
            return
        if j == run.max_iterations:
            break
        try:
            L = np.linalg.cholesky(Mj)
        except np.linalg.LinAlgError:
            raise PrecisionExhausted(f"float Cholesky failed at step {j}", step=j) from None
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        if j >= 1:
            det_val = math.exp(logdet)
            run.progress.append((gap, det_val))
        log_acc += logdet
        if j % 2 == 0:
            # A <- A L^{-T}
            Linv_T = solve_triangular(L, np.eye(n), lower=True).T
            A = A @ Linv_T
            right = right @ Linv_T
        else:
            A = np.stack([solve_triangular(L, a, lower=True) for a in A])
    run.right_factor = right
    run.verdict, run.reason = RANK_DECREASING, "iteration bound reached"
    run.value = 0.0


def _new_run(T: CPOperator, cfg: ScalingConfig, threshold, t, bits) -> ScalingRun:
    return ScalingRun(
        n=T.n,
        m=T.m,
        M=T.max_entry,
        mode=str(cfg.mode) + (" (idealized)" if cfg.idealized else ""),
        threshold=threshold,
        max_iterations=t,
        truncation_bits=bits,
    )


def run_fullness_test(T: CPOperator, cfg: ScalingConfig | None = None) -> ScalingRun:
    """Decide whether T is rank non-decreasing by alternating scaling.

    Returns a ``ScalingRun`` whose ``verdict`` is ``"rank-non-decreasing"``
    once some ``eps_j <= 1/(6n)`` with ``j >= 1``, and ``"rank-decreasing"``
    otherwise. Exact modes integerize T first (the verdict is unaffected).

    Raises:
        PrecisionExhausted: an iterate lost positive definiteness.
    """
    cfg = cfg or ScalingConfig()
    Ti, _ = integerize(T)
    n, m, M = Ti.n, Ti.m, Ti.max_entry
    threshold = cfg.ds_threshold if cfg.ds_threshold is not None else Fraction(1, 6 * n)
    t = cfg.max_iterations or iteration_bound(n, m, M)
    bits = _resolved_bits(cfg, n, m, M, t, None)
    run = _new_run(Ti, cfg, threshold, t, bits)
    if n == 1:
        nonzero = any(a[0, 0] != 0 for a in Ti.kraus)
        run.verdict = RANK_NON_DECREASING if nonzero else RANK_DECREASING
        run.reason = "n = 1"
        return run
    if cfg.mode.is_exact:
        _exact_engine(Ti, run, cfg, capacity=False)
    else:
        _float_engine(T, run, cfg, capacity=False)
    return run


def approx_capacity(
    T: CPOperator, eps: float = 0.1, cfg: ScalingConfig | None = None
) -> tuple[Fraction | float, ScalingRun]:
    """Capacity of T to within a factor ``1 +- eps``.

    The default arithmetic is float64. In float mode the run also carries a
    posterior bracket from ``capacity_bracket_from_fixed_point`` evaluated at
    the accumulated right scaling (``run.bracket``; None if rejected).
    Returns 0 when no step reaches the threshold ``eps^2 / (4 n^3)``.
    """
    if not 0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 1/2]")
    cfg = cfg or ScalingConfig(mode=NumericMode("float64"))
    Ti, gamma = integerize(T)
    n, m, M = Ti.n, Ti.m, Ti.max_entry
    threshold = (
        cfg.ds_threshold
        if cfg.ds_threshold is not None
        else Fraction(eps).limit_denominator(10**12) ** 2 / (4 * n**3)
    )
    t = cfg.max_iterations or capacity_iteration_bound(n, M, eps)
    bits = _resolved_bits(cfg, n, m, M, t, eps)
    run = _new_run(Ti, cfg, threshold, t, bits)
    if n == 1:
        val = sum((a[0, 0] ** 2 for a in T.kraus), Fraction(0))
        run.verdict, run.reason = CAPACITY, "n = 1"
        run.value = val if cfg.mode.is_exact else float(val)
        run.bracket = (float(val), float(val))
        return run.value, run
    if cfg.mode.is_exact:
        _exact_engine(Ti, run, cfg, capacity=True)
        if run.value:
            run.value = run.value / Fraction(gamma) ** (2 * n)
        return run.value, run
    _float_engine(T, run, cfg, capacity=True)
    if run.value and run.right_factor is not None:
        C = run.right_factor @ run.right_factor.T
        run.bracket = _float_bracket(T.to_numpy(), C)
    return run.value, run


# ---------------------------------------------------------------------------
# fixed-point bracket


def _float_bracket(A: np.ndarray, C: np.ndarray):
    n = C.shape[0]
    TC = np.einsum("kij,jl,kml->im", A, C, A)
    try:
        TCinv = np.linalg.inv(TC)
    except np.linalg.LinAlgError:
        return None
    Z = C @ np.einsum("kji,jl,klm->im", A, TCinv, A) - np.eye(n)
    e = float(np.trace(Z @ Z))
    if e > 1 / (n + 1):
        return None
    _, ld_tc = np.linalg.slogdet(TC)
    _, ld_c = np.linalg.slogdet(C)
    upper = math.exp(ld_tc - ld_c)
    return ((1 - math.sqrt(n * max(e, 0.0))) ** n * upper, upper)


@dataclass(frozen=True)
class BracketResult:
    """Outcome of the fixed-point bracket; ``accepted`` is False on reject."""

    accepted: bool
    eps: Fraction | None
    lower: float | None
    upper: Fraction | None
    reason: str = ""


def capacity_bracket_from_fixed_point(T: CPOperator, C: RationalMatrix) -> BracketResult:
    """Two-sided capacity bound certified at an approximate fixed point C.

    With ``e = tr[(C T*(T(C)^{-1}) - I)^2] <= 1/(n+1)`` the capacity lies in
    ``[(1 - sqrt(n e))^n u, u]`` where ``u = Det T(C) / Det C``. The lower end
    involves a square root and is returned as a float; everything else is
    exact.
    """
    from .cp_operator import apply as _apply, dual_apply as _dual
    from .exact_linalg import SingularMatrixError, det, invert, is_positive_definite

    n = T.n
    if not is_positive_definite(C):
        raise ValueError("C must be symmetric positive definite")
    TC = _apply(T, C)
    try:
        TCinv = invert(TC)
    except SingularMatrixError as exc:
        return BracketResult(False, None, None, None, f"T(C) is singular ({exc})")
    Z = C @ _dual(T, TCinv) - RationalMatrix.identity(n)
    e = sum((Z[i, k] * Z[k, i] for i in range(n) for k in range(n)), Fraction(0))
    if e > Fraction(1, n + 1):
        return BracketResult(False, e, None, None, f"eps = {float(e):.3g} exceeds 1/(n+1)")
    upper = det(TC) / det(C)
    lower = (1 - math.sqrt(n * e)) ** n * float(upper)
    if e == 0:
        lower = float(upper)
    return BracketResult(True, e, lower, upper)


# ---------------------------------------------------------------------------
# raw sequence (for analysis and tests)


def scaling_sequence(T: CPOperator, steps: int, bits: int | None = None) -> list[RationalMatrix]:
    """``[U_{-1}, U_0, ..., U_steps]`` for integer T, truncated to ``bits`` if given.

    Unlike ``run_fullness_test`` this accepts any ``bits >= 1`` and performs
    no threshold checks, which makes coarse-truncation experiments possible.
    """
    if bits is not None and bits < 1:
        raise ValueError("bits must be >= 1")
    Ti, _ = integerize(T)
    n = Ti.n
    sk = Ti.sparse_int_kraus()
    skT = _transpose_sparse(sk)
    eye = [[int(i == j) for j in range(n)] for i in range(n)]
    N, D = _apply_int(skT, eye, n), 1
    if bits is not None:
        N = [[x << bits for x in row] for row in N]
        D = 1 << bits
    out = [RationalMatrix.identity(n), _as_matrix(N, D)]
    for j in range(1, steps + 1):
        d, adj = bareiss_adjugate(N, pivoting=False)
        if d <= 0:
            raise PrecisionExhausted(f"U_{j - 1} is not positive definite", step=j)
        K = _apply_int(sk if j % 2 else skT, adj, n)
        if bits is None:
            g = math.gcd(int(D * _content(K)), int(d))
            N = [[x * D // g for x in row] for row in K]
            D = d // g
        else:
            N = [[_trn(x * D, d, bits) for x in row] for row in K]
            D = 1 << bits
        out.append(_as_matrix(N, D))
    return out


def eps_sequence(seq: Iterable[RationalMatrix]) -> list[Fraction]:
    """``eps_j = tr[(U_{j-2}^{-1} U_j - I)^2]`` for j >= 1 given ``[U_{-1}, U_0, ...]``."""
    from .exact_linalg import invert

    seq = list(seq)
    out = []
    for k in range(2, len(seq)):
        Z = invert(seq[k - 2]) @ seq[k] - RationalMatrix.identity(seq[k].rows)
        n = Z.rows
        out.append(sum((Z[i, l] * Z[l, i] for i in range(n) for l in range(n)), Fraction(0)))
    return out
