"""Classical Sinkhorn scaling of nonnegative matrices.

Alternately normalize rows and columns to sum to one. The matrix has a
positive permanent iff the distance to doubly stochastic eventually drops
below 1/n, which gives a (slow, but simple) matching test.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact_linalg import RationalMatrix, lcm_of_denominators, parse_rational

__all__ = [
    "NonTrivialityError",
    "NonnegMatrix",
    "sinkhorn_scale",
    "sinkhorn_budget",
    "permanent_positive",
    "matrix_from_json",
    "matrix_to_json",
]


class NonTrivialityError(ValueError):
    """The matrix has an all-zero row or column."""


class NonnegMatrix:
    """Square matrix with nonnegative rational entries."""

    __slots__ = ("n", "entries")

    def __init__(self, entries):
        mat = entries if isinstance(entries, RationalMatrix) else RationalMatrix(entries)
        if not mat.is_square:
            raise ValueError(f"expected a square matrix, got {mat.shape}")
        if any(x < 0 for x in mat.entries()):
            raise ValueError("entries must be nonnegative")
        self.n = mat.rows
        self.entries = mat

    @property
    def nontrivial(self) -> bool:
        """No row and no column is entirely zero."""
        A = self.entries
        rows_ok = all(any(x for x in A.row(i)) for i in range(self.n))
        cols_ok = all(any(A[i, j] for i in range(self.n)) for j in range(self.n))
        return rows_ok and cols_ok

    def to_numpy(self) -> np.ndarray:
        return self.entries.to_numpy()

    def support(self) -> set[tuple[int, int]]:
        A = self.entries
        return {(i, j) for i in range(self.n) for j in range(self.n) if A[i, j] != 0}

    def __repr__(self) -> str:
        return f"NonnegMatrix({self.entries!r})"


def _ds_exact(rows: list[list[Fraction]]) -> Fraction:
    n = len(rows)
    r = [sum(row) for row in rows]
    c = [sum(rows[i][j] for i in range(n)) for j in range(n)]
    return sum((x - 1) ** 2 for x in r) + sum((x - 1) ** 2 for x in c)


def _ds_float(A: np.ndarray) -> float:
    r = A.sum(axis=1) - 1
    c = A.sum(axis=0) - 1
    return float(r @ r + c @ c)


def sinkhorn_scale(A: NonnegMatrix, t: int, exact: bool = True):
    """Run t half-steps (row, column, row, ...) of Sinkhorn scaling.

    Args:
        A: nonnegative matrix with no zero row or column.
        t: number of normalizations.
        exact: Fraction arithmetic if True, float64 otherwise.

    Returns:
        ``(scaled, ds_trace)`` where ``ds_trace[0]`` is ds of the input and
        ``ds_trace[k]`` is ds after k normalizations. ``scaled`` is a
        ``RationalMatrix`` in exact mode and an ndarray otherwise.
    """
    if not A.nontrivial:
        raise NonTrivialityError("matrix has an all-zero row or column")
    if exact:
        rows = A.entries.tolist()
        trace = [_ds_exact(rows)]
        for k in range(t):
            if k % 2 == 0:
                rows = [[x / s for x in row] for row, s in zip(rows, map(sum, rows))]
            else:
                cs = [sum(col) for col in zip(*rows)]
                rows = [[x / s for x, s in zip(row, cs)] for row in rows]
            trace.append(_ds_exact(rows))
        return RationalMatrix(rows), trace
    M = A.to_numpy()
    trace = [_ds_float(M)]
    for k in range(t):
        if k % 2 == 0:
            M = M / M.sum(axis=1, keepdims=True)
        else:
            M = M / M.sum(axis=0, keepdims=True)
        trace.append(_ds_float(M))
    return M, trace


def sinkhorn_budget(A: NonnegMatrix) -> int:
    """Default step count ``ceil(2 + 6n (n ln n + ln(sum of entries)))``.

    Entries are integerized first, so the sum is at least 1.
    """
    n = A.n
    g = lcm_of_denominators(A.entries.entries())
    total = sum(int(x * g) for x in A.entries.entries())
    return math.ceil(2 + 6 * n * (n * math.log(n) + math.log(max(total, 1))))


def permanent_positive(A: NonnegMatrix, t: int | None = None, exact: bool = False) -> bool:
    """True iff some Sinkhorn iterate has ``ds < 1/n`` within the step budget."""
    if not A.nontrivial:
        return False
    n = A.n
    t = sinkhorn_budget(A) if t is None else t
    if exact:
        # exact iterates grow quickly; stop at the first crossing
        rows = A.entries.tolist()
        bound = Fraction(1, n)
        if _ds_exact(rows) < bound:
            return True
        for k in range(t):
            if k % 2 == 0:
                rows = [[x / s for x in row] for row, s in zip(rows, map(sum, rows))]
            else:
                cs = [sum(col) for col in zip(*rows)]
                rows = [[x / s for x, s in zip(row, cs)] for row in rows]
            if _ds_exact(rows) < bound:
                return True
        return False
    M = A.to_numpy()
    bound = 1.0 / n
    if _ds_float(M) < bound:
        return True
    for k in range(t):
        if k % 2 == 0:
            M = M / M.sum(axis=1, keepdims=True)
        else:
            M = M / M.sum(axis=0, keepdims=True)
        if _ds_float(M) < bound:
            return True
    return False


def matrix_to_json(A: NonnegMatrix) -> dict:
    return {"n": A.n, "entries": A.entries.to_strings()}


def matrix_from_json(doc) -> NonnegMatrix:
    """Parse ``{"n": int, "entries": [[rational-string, ...], ...]}``."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, dict) or "n" not in doc or "entries" not in doc:
        raise ValueError('matrix document needs keys "n" and "entries"')
    rows: Sequence = doc["entries"]
    mat = RationalMatrix([[parse_rational(x) for x in row] for row in rows])
    if mat.shape != (doc["n"], doc["n"]):
        raise ValueError(f"entries have shape {mat.shape}, expected n = {doc['n']}")
    return NonnegMatrix(mat)
