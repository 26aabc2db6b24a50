"""Linear matrix pencils ``A0 + sum_i x_i A_i`` in non-commuting variables."""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from ..cp_operator import CPOperator
from ..exact_linalg import DimensionError, RationalMatrix, parse_rational

__all__ = [
    "PencilFormatError",
    "LinearMatrixPencil",
    "affine_to_linear",
    "pencil_from_json",
    "pencil_to_json",
    "eliminate_constant_lines",
]

AFFINE_VARIABLE = "x0"


class PencilFormatError(ValueError):
    """Malformed pencil document."""


class LinearMatrixPencil:
    """Matrix ``A0 + sum_i vars[i] * coeffs[i]``.

    Args:
        coeffs: coefficient matrices, one per variable, all of one shape.
        vars: variable names (defaults to x1..xm); must be distinct.
        A0: optional constant term.
        shape: required when there are no matrices at all.
    """

    __slots__ = ("rows", "cols", "vars", "coeffs", "A0")

    def __init__(
        self,
        coeffs: Sequence,
        vars: Sequence[str] | None = None,
        A0=None,
        shape: tuple[int, int] | None = None,
    ):
        coeffs = tuple(c if isinstance(c, RationalMatrix) else RationalMatrix(c) for c in coeffs)
        if A0 is not None and not isinstance(A0, RationalMatrix):
            A0 = RationalMatrix(A0)
        mats = list(coeffs) + ([A0] if A0 is not None else [])
        if mats:
            shape0 = mats[0].shape
            for c in mats:
                if c.shape != shape0:
                    raise DimensionError("pencil matrices must share one shape")
            if shape is not None and tuple(shape) != shape0:
                raise DimensionError(f"shape {shape} does not match matrices {shape0}")
            shape = shape0
        elif shape is None:
            raise ValueError("an empty pencil needs an explicit shape")
        if vars is None:
            vars = [f"x{i + 1}" for i in range(len(coeffs))]
        vars = tuple(vars)
        if len(vars) != len(coeffs):
            raise ValueError("one variable name per coefficient matrix")
        if len(set(vars)) != len(vars):
            raise ValueError("variable names must be distinct")
        object.__setattr__(self, "rows", shape[0])
        object.__setattr__(self, "cols", shape[1])
        object.__setattr__(self, "vars", vars)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "A0", A0)

    def __setattr__(self, name, value):
        raise AttributeError("LinearMatrixPencil is immutable")

    @property
    def n(self) -> int:
        if self.rows != self.cols:
            raise DimensionError(f"pencil is {self.rows}x{self.cols}, not square")
        return self.rows

    @property
    def m(self) -> int:
        return len(self.coeffs)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    @property
    def is_affine(self) -> bool:
        return self.A0 is not None and not self.A0.is_zero()

    def coefficient(self, var: str) -> RationalMatrix:
        return self.coeffs[self.vars.index(var)]

    def all_matrices(self) -> list[RationalMatrix]:
        """Constant term (if nonzero) followed by the variable coefficients."""
        head = [self.A0] if self.is_affine else []
        return head + list(self.coeffs)

    def to_operator(self) -> CPOperator:
        """CP operator whose Kraus list is every matrix of the (lifted) pencil."""
        mats = self.all_matrices()
        if not mats:
            mats = [RationalMatrix.zeros(self.n)]
        return CPOperator(mats)

    def substitute(self, values: Mapping[str, Fraction | int]) -> RationalMatrix:
        """Commutative scalar substitution."""
        acc = self.A0 if self.A0 is not None else RationalMatrix.zeros(self.rows, self.cols)
        for v, c in zip(self.vars, self.coeffs):
            acc = acc + c.scale(values[v])
        return acc

    def evaluate(self, subs: Mapping[str, np.ndarray], dim: int | None = None) -> np.ndarray:
        """Matrix substitution: block (i, j) is ``A0[i,j] I + sum_k A_k[i,j] X_k``.

        Works on float arrays and on object arrays of Fractions.
        """
        if dim is None:
            dim = next(iter(subs.values())).shape[0] if subs else 1
        sample = next(iter(subs.values())) if subs else None
        exact = sample is not None and sample.dtype == object
        dtype = object if exact else float
        out = np.zeros((self.rows * dim, self.cols * dim), dtype=dtype)
        if exact:
            out[:] = Fraction(0)
        eye = np.eye(dim, dtype=int)
        terms = []
        if self.A0 is not None:
            terms.append((self.A0, eye.astype(object) if exact else eye.astype(float)))
        for v, c in zip(self.vars, self.coeffs):
            terms.append((c, subs[v]))
        for mat, X in terms:
            for i in range(self.rows):
                for j in range(self.cols):
                    a = mat[i, j]
                    if a:
                        scal = a if exact else float(a)
                        out[i * dim : (i + 1) * dim, j * dim : (j + 1) * dim] += scal * X
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, LinearMatrixPencil):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.vars == other.vars
            and self.coeffs == other.coeffs
            and self.A0 == other.A0
        )

    def __hash__(self):
        return hash((self.shape, self.vars, self.coeffs, self.A0))

    def __repr__(self) -> str:
        aff = ", affine" if self.is_affine else ""
        return f"LinearMatrixPencil({self.rows}x{self.cols}, vars={list(self.vars)}{aff})"

    def pretty(self) -> str:
        """Entries as linear forms, e.g. ``[[1, x1], [x2, -x1 + 2*x2]]``."""
        rows = []
        for i in range(self.rows):
            cells = []
            for j in range(self.cols):
                parts = []
                if self.A0 is not None and self.A0[i, j]:
                    parts.append(_coef_str(self.A0[i, j], ""))
                for v, c in zip(self.vars, self.coeffs):
                    if c[i, j]:
                        parts.append(_coef_str(c[i, j], v))
                cell = " + ".join(parts).replace("+ -", "- ") if parts else "0"
                cells.append(cell)
            rows.append("[" + ", ".join(cells) + "]")
        return "[" + ", ".join(rows) + "]"


def _coef_str(c: Fraction, var: str) -> str:
    num = str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    if not var:
        return num
    if c == 1:
        return var
    if c == -1:
        return "-" + var
    return f"{num}*{var}"


def affine_to_linear(p: LinearMatrixPencil) -> LinearMatrixPencil:
    """Make the constant term the coefficient of a fresh variable ``x0``.

    A zero or absent constant term is dropped; nc-rank is unchanged either way.
    """
    if not p.is_affine:
        if p.A0 is None:
            return p
        return LinearMatrixPencil(p.coeffs, p.vars, None, shape=p.shape)
    name = AFFINE_VARIABLE
    k = 0
    while name in p.vars:
        name = f"h_{k}"
        k += 1
    return LinearMatrixPencil((p.A0,) + p.coeffs, (name,) + p.vars, None, shape=p.shape)


def _matrix_doc(M: RationalMatrix) -> list:
    return M.to_strings()


def pencil_to_json(p: LinearMatrixPencil) -> dict:
    doc = {
        "n": p.rows if p.is_square else None,
        "vars": list(p.vars),
        "A0": _matrix_doc(p.A0) if p.A0 is not None else None,
        "coeffs": [_matrix_doc(c) for c in p.coeffs],
    }
    if not p.is_square:
        doc["rows"], doc["cols"] = p.rows, p.cols
        del doc["n"]
    return doc


def _parse_matrix(rows, what: str) -> RationalMatrix:
    try:
        return RationalMatrix([[parse_rational(x) for x in row] for row in rows])
    except (ValueError, TypeError) as exc:
        raise PencilFormatError(f"{what}: {exc}") from None


def pencil_from_json(doc) -> LinearMatrixPencil:
    """Parse ``{"n", "vars", "A0", "coeffs"}`` (or ``rows``/``cols`` for rectangular)."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise PencilFormatError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or "coeffs" not in doc:
        raise PencilFormatError('pencil document needs "coeffs"')
    if "n" in doc and doc["n"] is not None:
        shape = (doc["n"], doc["n"])
    elif "rows" in doc and "cols" in doc:
        shape = (doc["rows"], doc["cols"])
    else:
        raise PencilFormatError('pencil document needs "n" (or "rows" and "cols")')
    coeffs = [_parse_matrix(c, f"coefficient {k}") for k, c in enumerate(doc["coeffs"])]
    A0 = _parse_matrix(doc["A0"], "A0") if doc.get("A0") is not None else None
    vars = doc.get("vars")
    try:
        return LinearMatrixPencil(coeffs, vars, A0, shape=shape)
    except (ValueError, DimensionError) as exc:
        raise PencilFormatError(str(exc)) from None


def eliminate_constant_lines(p: LinearMatrixPencil) -> tuple[LinearMatrixPencil | None, int]:
    """Shrink a square pencil without changing whether it is full.

    A row whose variable coefficients all vanish is a constant row. If it is
    zero the pencil is not full. Otherwise constant column operations clear
    it except at one pivot, which splits off a 1 x 1 invertible block, so
    the pencil is full iff the minor without that row and column is full.
    Columns are handled the same way with row operations.

    Returns:
        ``(reduced, removed)`` where ``removed`` counts eliminated pivots;
        ``reduced`` is None when a zero row or column proves the pencil is
        not full.
    """
    n = p.n
    A0 = [list(r) for r in p.A0.tolist()] if p.A0 is not None else [[Fraction(0)] * n for _ in range(n)]
    Cs = [[list(r) for r in c.tolist()] for c in p.coeffs]
    rows, cols = list(range(n)), list(range(n))
    removed = 0
    while rows:
        # a zero line (constant and variable parts) means not full
        for i in rows:
            if not any(A0[i][j] for j in cols) and not any(C[i][j] for C in Cs for j in cols):
                return None, removed
        for j in cols:
            if not any(A0[i][j] for i in rows) and not any(C[i][j] for C in Cs for i in rows):
                return None, removed
        pivot = None
        for i in rows:
            if not any(C[i][j] for C in Cs for j in cols):
                pivot = ("row", i, next(j for j in cols if A0[i][j]))
                break
        if pivot is None:
            for j in cols:
                if not any(C[i][j] for C in Cs for i in rows):
                    pivot = ("col", next(i for i in rows if A0[i][j]), j)
                    break
        if pivot is None:
            break
        kind, pi, pj = pivot
        piv = A0[pi][pj]
        if kind == "row":
            # column ops: col_k -= (A0[pi][k] / piv) col_pj; only row pi was constant
            for k in cols:
                if k != pj and A0[pi][k]:
                    f = A0[pi][k] / piv
                    for M in [A0] + Cs:
                        for i in rows:
                            if M[i][pj]:
                                M[i][k] -= f * M[i][pj]
        else:
            for k in rows:
                if k != pi and A0[k][pj]:
                    f = A0[k][pj] / piv
                    for M in [A0] + Cs:
                        for j in cols:
                            if M[pi][j]:
                                M[k][j] -= f * M[pi][j]
        rows.remove(pi)
        cols.remove(pj)
        removed += 1
    if not rows:
        return LinearMatrixPencil([], [], None, shape=(0, 0)), removed

    def sub(M):
        return RationalMatrix([[M[i][j] for j in cols] for i in rows])

    keep = [k for k, C in enumerate(Cs) if any(C[i][j] for i in rows for j in cols)]
    A0m = sub(A0)
    return (
        LinearMatrixPencil(
            [sub(Cs[k]) for k in keep],
            [p.vars[k] for k in keep],
            None if A0m.is_zero() else A0m,
            shape=(len(rows), len(cols)),
        ),
        removed,
    )
