"""Completely positive operators given by Kraus lists.

An operator ``T(X) = sum_i A_i X A_i^T`` on n x n matrices is stored as the
tuple of its (real, rational) Kraus matrices. Everything is immutable; the
transformations below return new operators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .exact_linalg import (
    DimensionError,
    RationalMatrix,
    lcm_of_denominators,
    parse_rational,
)

__all__ = [
    "CPOperator",
    "DSReport",
    "OperatorFormatError",
    "apply",
    "dual_apply",
    "ds",
    "tensor",
    "reduce_kraus_basis",
    "integerize",
    "pad_bar",
    "operator_from_json",
    "operator_to_json",
]


class OperatorFormatError(ValueError):
    """Malformed operator document."""


class CPOperator:
    """Completely positive map ``X -> sum_i A_i X A_i^T``.

    Args:
        kraus: nonempty sequence of square matrices of a common size. Entries
            may be anything ``RationalMatrix`` accepts.
    """

    __slots__ = ("n", "kraus", "__dict__")

    def __init__(self, kraus: Sequence):
        mats = tuple(k if isinstance(k, RationalMatrix) else RationalMatrix(k) for k in kraus)
        if not mats:
            raise ValueError("a CP operator needs at least one Kraus matrix")
        n = mats[0].rows
        for a in mats:
            if a.shape != (n, n):
                raise DimensionError(f"Kraus matrices must all be {n}x{n}, got {a.shape}")
        self.n = n
        self.kraus = mats

    @property
    def m(self) -> int:
        return len(self.kraus)

    @cached_property
    def gamma(self) -> int:
        """Integerization factor: lcm of every entry denominator."""
        return lcm_of_denominators(x for a in self.kraus for x in a.entries())

    @cached_property
    def max_entry(self) -> int:
        """M: largest absolute entry after integerization (at least 1)."""
        g = self.gamma
        return max(1, max(abs(int(x * g)) for a in self.kraus for x in a.entries()))

    @cached_property
    def bit_size(self) -> int:
        """b: largest bit length of an integerized entry."""
        return self.max_entry.bit_length()

    def __eq__(self, other) -> bool:
        return isinstance(other, CPOperator) and self.kraus == other.kraus

    def __hash__(self) -> int:
        return hash(self.kraus)

    def __repr__(self) -> str:
        return f"CPOperator(n={self.n}, m={self.m})"

    def __call__(self, X: RationalMatrix) -> RationalMatrix:
        return apply(self, X)

    def dual(self) -> "CPOperator":
        """Operator whose Kraus list is the transposes; its action is ``T*``."""
        return CPOperator([a.T for a in self.kraus])

    def to_numpy(self) -> np.ndarray:
        """Kraus stack as a float array of shape (m, n, n)."""
        return np.stack([a.to_numpy() for a in self.kraus])

    def int_kraus(self) -> list[list[list[int]]]:
        """Kraus matrices as nested int lists (requires integer entries)."""
        out = []
        for a in self.kraus:
            if not a.is_integer():
                raise ValueError("operator is not integral; call integerize first")
            out.append([[x.numerator for x in row] for row in a])
        return out

    def sparse_int_kraus(self) -> list[list[tuple[int, int, int]]]:
        """Per Kraus matrix, the list of nonzero ``(row, col, value)`` triples."""
        return [
            [(i, j, v) for i, row in enumerate(a) for j, v in enumerate(row) if v]
            for a in self.int_kraus()
        ]

    @classmethod
    def from_numpy(cls, arr) -> "CPOperator":
        arr = np.asarray(arr)
        if arr.ndim != 3:
            raise DimensionError("expected an array of shape (m, n, n)")
        return cls([RationalMatrix.from_numpy(a) for a in arr])

    @classmethod
    def from_edges(cls, n: int, edges) -> "CPOperator":
        """Rank-one family ``{E_ij : (i, j) in edges}`` (0-based indices).

        An empty edge set gives the zero operator (one zero Kraus matrix).
        """
        edges = sorted(set(edges))
        if not edges:
            return cls([RationalMatrix.zeros(n)])
        return cls([RationalMatrix.unit(n, i, j) for i, j in edges])


@dataclass(frozen=True)
class DSReport:
    """Distance to doubly stochastic: ``row_gap + col_gap``."""

    ds_value: Fraction | float
    row_gap: Fraction | float
    col_gap: Fraction | float


def _check(T: CPOperator, X: RationalMatrix):
    if X.shape != (T.n, T.n):
        raise DimensionError(f"operator acts on {T.n}x{T.n} matrices, got {X.shape}")


def apply(T: CPOperator, X: RationalMatrix) -> RationalMatrix:
    """``sum_i A_i X A_i^T``."""
    _check(T, X)
    acc = RationalMatrix.zeros(T.n)
    for a in T.kraus:
        acc = acc + a @ X @ a.T
    return acc


def dual_apply(T: CPOperator, X: RationalMatrix) -> RationalMatrix:
    """``sum_i A_i^T X A_i``."""
    _check(T, X)
    acc = RationalMatrix.zeros(T.n)
    for a in T.kraus:
        acc = acc + a.T @ X @ a
    return acc


def _gap(M: RationalMatrix) -> Fraction:
    D = M - RationalMatrix.identity(M.rows)
    # tr(D^2) for symmetric D is the squared Frobenius norm; do it generally
    return sum((D[i, k] * D[k, i] for i in range(D.rows) for k in range(D.rows)), Fraction(0))


def ds(T: CPOperator, exact: bool = True) -> DSReport:
    """``tr[(T(I) - I)^2] + tr[(T*(I) - I)^2]``.

    With ``exact=False`` the computation is done in float64 from the Kraus stack.
    """
    if exact:
        eye = RationalMatrix.identity(T.n)
        row = _gap(apply(T, eye))
        col = _gap(dual_apply(T, eye))
        return DSReport(row + col, row, col)
    A = T.to_numpy()
    eye = np.eye(T.n)
    R = np.einsum("kij,klj->il", A, A) - eye
    C = np.einsum("kji,kjl->il", A, A) - eye
    row = float(np.trace(R @ R))
    col = float(np.trace(C @ C))
    return DSReport(row + col, row, col)


def tensor(T1: CPOperator, T2: CPOperator) -> CPOperator:
    """Kraus list ``{A_i kron D_j}`` in row-major (i, j) order."""
    from .exact_linalg import kron

    return CPOperator([kron(a, d) for a in T1.kraus for d in T2.kraus])


def reduce_kraus_basis(T: CPOperator) -> CPOperator:
    """Keep a maximal linearly independent subset of the Kraus list.

    The greedy scan keeps earlier matrices first. Fullness and rank
    decrease are preserved; the operator itself and its capacity are not.
    If every Kraus matrix is zero, a single zero matrix is kept.
    """
    basis: list[list[Fraction]] = []  # reduced rows, echelon form
    pivots: list[int] = []
    kept: list[RationalMatrix] = []
    for a in T.kraus:
        v = list(a.entries())
        for row, p in zip(basis, pivots):
            if v[p]:
                f = v[p] / row[p]
                v = [x - f * y for x, y in zip(v, row)]
        p = next((i for i, x in enumerate(v) if x), None)
        if p is None:
            continue
        basis.append(v)
        pivots.append(p)
        kept.append(a)
    if not kept:
        kept = [RationalMatrix.zeros(T.n)]
    return CPOperator(kept)


def integerize(T: CPOperator) -> tuple[CPOperator, int]:
    """Scale every Kraus matrix by the lcm of denominators.

    Returns ``(T', gamma)`` with ``T' = gamma^2 T``; so
    ``cap(T') = gamma^(2n) cap(T)``.
    """
    g = T.gamma
    if g == 1:
        return T, 1
    return CPOperator([a.scale(g) for a in T.kraus]), g


def pad_bar(T: CPOperator, c: int) -> CPOperator:
    """Operator on dimension ``n + c - 1`` that is rank-decreasing iff T is c-rank-decreasing.

    Its action is ``X -> diag(T(X11) + tr(X22) I_n, tr(X11) I_{c-1})`` where
    ``X11`` is the leading n x n block. The Kraus list is ``A_i (+) 0``
    followed by the units ``E[k, n+l]`` and then ``E[n+l, k]``.
    """
    n = T.n
    if not 1 <= c <= n:
        raise ValueError(f"c must lie in [1, {n}], got {c}")
    if c == 1:
        return T
    N = n + c - 1
    pad = RationalMatrix.zeros(c - 1)
    kraus = [RationalMatrix.direct_sum(a, pad) for a in T.kraus]
    kraus += [RationalMatrix.unit(N, k, n + l) for k in range(n) for l in range(c - 1)]
    kraus += [RationalMatrix.unit(N, n + l, k) for k in range(n) for l in range(c - 1)]
    return CPOperator(kraus)


def operator_to_json(T: CPOperator) -> dict:
    return {"n": T.n, "kraus": [a.to_strings() for a in T.kraus]}


def operator_from_json(doc) -> CPOperator:
    """Build an operator from ``{"n": int, "kraus": [matrix, ...]}``.

    ``doc`` may be a dict or a JSON string.
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise OperatorFormatError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or "n" not in doc or "kraus" not in doc:
        raise OperatorFormatError('operator document needs keys "n" and "kraus"')
    n = doc["n"]
    if not isinstance(n, int) or n < 1:
        raise OperatorFormatError('"n" must be a positive integer')
    kraus = doc["kraus"]
    if not isinstance(kraus, list) or not kraus:
        raise OperatorFormatError('"kraus" must be a nonempty list')
    mats = []
    for idx, k in enumerate(kraus):
        try:
            mat = RationalMatrix([[parse_rational(x) for x in row] for row in k])
        except (ValueError, TypeError) as exc:
            raise OperatorFormatError(f"Kraus matrix {idx}: {exc}") from None
        if mat.shape != (n, n):
            raise OperatorFormatError(f"Kraus matrix {idx} has shape {mat.shape}, expected {n}x{n}")
        mats.append(mat)
    return CPOperator(mats)
