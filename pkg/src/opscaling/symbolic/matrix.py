"""Matrices of formulas and Higman linearization."""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Sequence

from ..exact_linalg import RationalMatrix
from .formula import (
    Add,
    Const,
    Mul,
    NCFormula,
    Var,
    degree,
    format_formula,
    has_inverse,
    parse_formula,
    variables,
    _var_key,
)
from .pencil import LinearMatrixPencil

__all__ = [
    "UnsupportedEntryError",
    "SymbolicMatrix",
    "higman_linearize",
    "linear_form",
    "symbolic_from_json",
    "symbolic_to_json",
    "symbolic_from_pencil",
]


class UnsupportedEntryError(ValueError):
    """An entry uses inversion where only polynomials are allowed."""


class SymbolicMatrix:
    """Immutable rows x cols matrix of formula entries."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries: Sequence[Sequence]):
        data = tuple(
            tuple(parse_formula(e) if isinstance(e, str) else _coerce(e) for e in row)
            for row in entries
        )
        widths = {len(r) for r in data}
        if len(widths) > 1:
            raise ValueError("ragged rows")
        object.__setattr__(self, "rows", len(data))
        object.__setattr__(self, "cols", widths.pop() if widths else 0)
        object.__setattr__(self, "entries", data)

    def __setattr__(self, name, value):
        raise AttributeError("SymbolicMatrix is immutable")

    def __getitem__(self, idx) -> NCFormula:
        i, j = idx
        return self.entries[i][j]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def division_free(self) -> bool:
        return not any(has_inverse(e) for row in self.entries for e in row)

    def variables(self) -> list[str]:
        names = set()
        for row in self.entries:
            for e in row:
                names.update(variables(e))
        return sorted(names, key=_var_key)

    def substitute(self, values) -> RationalMatrix:
        """Commutative scalar substitution (division-free entries only)."""
        return RationalMatrix([[_scalar_eval(e, values) for e in row] for row in self.entries])

    def __eq__(self, other):
        return isinstance(other, SymbolicMatrix) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self) -> str:
        body = "; ".join(", ".join(format_formula(e) for e in row) for row in self.entries)
        return f"SymbolicMatrix({self.rows}x{self.cols}: [{body}])"


def _coerce(e) -> NCFormula:
    if isinstance(e, NCFormula):
        return e
    return Const(Fraction(e))


def _scalar_eval(f: NCFormula, values) -> Fraction:
    if isinstance(f, Var):
        return Fraction(values[f.name])
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Add):
        return _scalar_eval(f.left, values) + _scalar_eval(f.right, values)
    if isinstance(f, Mul):
        return _scalar_eval(f.left, values) * _scalar_eval(f.right, values)
    return 1 / _scalar_eval(f.child, values)


def _const_value(f: NCFormula) -> Fraction:
    """Value of a degree-0 division-free formula."""
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Add):
        return _const_value(f.left) + _const_value(f.right)
    if isinstance(f, Mul):
        return _const_value(f.left) * _const_value(f.right)
    raise ValueError("not a constant formula")


def linear_form(f: NCFormula) -> dict:
    """``{var_name or None: coefficient}`` of a formula of degree at most one."""
    if isinstance(f, Var):
        return {f.name: Fraction(1)}
    if isinstance(f, Const):
        return {None: f.value} if f.value else {}
    if isinstance(f, Add):
        out = dict(linear_form(f.left))
        for k, v in linear_form(f.right).items():
            out[k] = out.get(k, Fraction(0)) + v
        return {k: v for k, v in out.items() if v}
    if isinstance(f, Mul):
        dl, dr = degree(f.left), degree(f.right)
        if dl == 0:
            c, other = _const_value(f.left), f.right
        elif dr == 0:
            c, other = _const_value(f.right), f.left
        else:
            raise ValueError("formula is not linear")
        return {k: c * v for k, v in linear_form(other).items() if c * v}
    raise UnsupportedEntryError("inverse in a linear entry")


# an entry is kept as a list of (coefficient, node) summands with Add flattened
def _summands(f: NCFormula, coef: Fraction = Fraction(1)) -> list:
    if isinstance(f, Add):
        return _summands(f.left, coef) + _summands(f.right, coef)
    if isinstance(f, Mul):
        if degree(f.left) == 0:
            return _summands(f.right, coef * _const_value(f.left))
        if degree(f.right) == 0:
            return _summands(f.left, coef * _const_value(f.right))
    if isinstance(f, Const):
        return [(coef * f.value, Const(Fraction(1)))] if coef * f.value else []
    return [(coef, f)] if coef else []


def _summand_degree(s) -> int:
    return degree(s[1])


def higman_linearize(A: SymbolicMatrix) -> tuple[LinearMatrixPencil, int]:
    """Linearize a polynomial matrix by repeated bordering.

    Each step takes the first entry (row-major) that still has a summand of
    degree >= 2, writes it as ``a + c*(l*r)`` with ``l`` and ``r`` both
    non-constant, and replaces the m x n matrix by the (m+1) x (n+1) matrix
    with ``a`` in place, ``c*l`` in the new column of that row, ``-r`` in the
    new row under that column, and 1 in the new corner. The Schur complement
    of that corner restores the entry, so the co-rank is unchanged.

    Returns:
        ``(pencil, k)`` where k is the number of borderings performed; the
        pencil is ``(m+k) x (n+k)`` with variables sorted by name.

    Raises:
        UnsupportedEntryError: if any entry contains an inverse.
    """
    if not A.division_free:
        raise UnsupportedEntryError("higman_linearize needs division-free entries")
    rows, cols = A.rows, A.cols
    grid: dict[tuple[int, int], list] = {}
    for i in range(rows):
        for j in range(cols):
            s = _summands(A[i, j])
            if s:
                grid[(i, j)] = s
    k = 0
    while True:
        target = None
        for i in range(rows):
            for j in range(cols):
                for idx, s in enumerate(grid.get((i, j), ())):
                    if _summand_degree(s) >= 2:
                        target = (i, j, idx)
                        break
                if target:
                    break
            if target:
                break
        if target is None:
            break
        i, j, idx = target
        coef, node = grid[(i, j)].pop(idx)
        # node is a Mul whose two factors both have positive degree
        left, right = node.left, node.right
        grid[(i, cols)] = _summands(left, coef)
        grid[(rows, j)] = _summands(right, Fraction(-1))
        grid[(rows, cols)] = [(Fraction(1), Const(Fraction(1)))]
        rows, cols = rows + 1, cols + 1
        k += 1

    names = set()
    for ss in grid.values():
        for _, node in ss:
            names.update(variables(node))
    var_list = sorted(names, key=_var_key)
    pos = {v: t for t, v in enumerate(var_list)}
    A0 = [[Fraction(0)] * cols for _ in range(rows)]
    coeffs = [[[Fraction(0)] * cols for _ in range(rows)] for _ in var_list]
    for (i, j), ss in grid.items():
        for coef, node in ss:
            for var, c in linear_form(node).items():
                if var is None:
                    A0[i][j] += coef * c
                else:
                    coeffs[pos[var]][i][j] += coef * c
    A0m = RationalMatrix(A0, cols=cols)
    pencil = LinearMatrixPencil(
        [RationalMatrix(c, cols=cols) for c in coeffs],
        var_list,
        None if A0m.is_zero() else A0m,
        shape=(rows, cols),
    )
    return pencil, k


def symbolic_from_pencil(p: LinearMatrixPencil) -> SymbolicMatrix:
    """Formula matrix with the same entries as a pencil."""
    out = []
    for i in range(p.rows):
        row = []
        for j in range(p.cols):
            terms: list[NCFormula] = []
            if p.A0 is not None and p.A0[i, j]:
                terms.append(Const(p.A0[i, j]))
            for v, c in zip(p.vars, p.coeffs):
                if c[i, j]:
                    terms.append(Var(v) if c[i, j] == 1 else Mul(Const(c[i, j]), Var(v)))
            node: NCFormula = terms[0] if terms else Const(Fraction(0))
            for t in terms[1:]:
                node = Add(node, t)
            row.append(node)
        out.append(row)
    return SymbolicMatrix(out)


def symbolic_to_json(M: SymbolicMatrix) -> dict:
    return {
        "rows": M.rows,
        "cols": M.cols,
        "entries": [[format_formula(e) for e in row] for row in M.entries],
    }


def symbolic_from_json(doc) -> SymbolicMatrix:
    """Parse ``{"rows", "cols", "entries": [[formula-string, ...], ...]}``."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, dict) or "entries" not in doc:
        raise ValueError('symbolic matrix document needs "entries"')
    M = SymbolicMatrix(doc["entries"])
    if "rows" in doc and "cols" in doc and M.shape != (doc["rows"], doc["cols"]):
        raise ValueError(f"entries have shape {M.shape}, expected {(doc['rows'], doc['cols'])}")
    return M

