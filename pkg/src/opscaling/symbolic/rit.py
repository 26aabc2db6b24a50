"""Formulas to pencils, the inverse-entry border, and rational identity testing.

A formula f is encoded as a triple ``(u, A, v)`` with A an affine pencil
and ``f = u^T A^{-1} v``:

* variable x:  ``A = [[1, -x], [0, 1]]``, ``u = e1``, ``v = e2``
* constant c:  ``A = [1]``, ``u = 1``, ``v = c``
* f + g:       ``A = A_f (+) A_g``, u and v stacked
* f * g:       ``A = [[A_f, -v_f u_g^T], [0, A_g]]``, ``u = (u_f, 0)``, ``v = (0, v_g)``
* inv(f):      ``A = [[A_f, v_f], [u_f^T, 0]]``, ``u = e_last``, ``v = -e_last``

A final permutation, scaling or one-row/column wrap moves the value to the
top-right entry of the inverse. The result has at most twice as many rows as
the formula has nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..exact_linalg import RationalMatrix
from .formula import (
    Add,
    Const,
    Inv,
    Mul,
    NCFormula,
    Var,
    _var_key,
    parse_formula,
    variables,
)
from .pencil import LinearMatrixPencil

__all__ = [
    "EmptyDomainError",
    "NotFullError",
    "formula_to_pencil",
    "inverse_entry_border",
    "rit_test",
    "RITResult",
    "evaluation_verdict",
]


class EmptyDomainError(ValueError):
    """The formula is undefined for every matrix substitution."""


class NotFullError(ValueError):
    """A pencil that must be invertible over the free skew field is not."""


class _Affine:
    """Sparse square affine matrix under construction.

    ``entries[(i, j)]`` maps a variable name (or None for the constant part)
    to its coefficient.
    """

    __slots__ = ("dim", "entries")

    def __init__(self, dim: int, entries: dict | None = None):
        self.dim = dim
        self.entries = entries or {}

    def put(self, i: int, j: int, var, c: Fraction):
        if c:
            cell = self.entries.setdefault((i, j), {})
            cell[var] = cell.get(var, Fraction(0)) + c
            if not cell[var]:
                del cell[var]

    def shifted(self, by: int) -> dict:
        return {(i + by, j + by): dict(cell) for (i, j), cell in self.entries.items()}


@dataclass
class _Triple:
    u: dict  # index -> Fraction (sparse vector)
    A: _Affine
    v: dict


def _shift(vec: dict, by: int) -> dict:
    return {i + by: c for i, c in vec.items()}


def _encode(f: NCFormula) -> _Triple:
    if isinstance(f, Var):
        A = _Affine(2)
        A.put(0, 0, None, Fraction(1))
        A.put(1, 1, None, Fraction(1))
        A.put(0, 1, f.name, Fraction(-1))
        return _Triple({0: Fraction(1)}, A, {1: Fraction(1)})
    if isinstance(f, Const):
        A = _Affine(1)
        A.put(0, 0, None, Fraction(1))
        return _Triple({0: Fraction(1)}, A, {0: f.value} if f.value else {})
    if isinstance(f, (Add, Mul)):
        a, b = _encode(f.left), _encode(f.right)
        d1 = a.A.dim
        A = _Affine(d1 + b.A.dim, {**a.A.entries, **b.A.shifted(d1)})
        if isinstance(f, Add):
            u = {**a.u, **_shift(b.u, d1)}
            v = {**a.v, **_shift(b.v, d1)}
        else:
            for i, vi in a.v.items():
                for j, uj in b.u.items():
                    A.put(i, d1 + j, None, -vi * uj)
            u = dict(a.u)
            v = _shift(b.v, d1)
        return _Triple(u, A, v)
    if isinstance(f, Inv):
        a = _encode(f.child)
        d = a.A.dim
        A = _Affine(d + 1, dict(a.A.entries))
        for i, vi in a.v.items():
            A.put(i, d, None, vi)
        for j, uj in a.u.items():
            A.put(d, j, None, uj)
        return _Triple({d: Fraction(1)}, A, {d: Fraction(-1)})
    raise TypeError(f"not a formula node: {f!r}")


def _unit_index(vec: dict):
    """(index, scale) if vec is a nonzero multiple of a unit vector, else None."""
    nz = [(i, c) for i, c in vec.items() if c]
    return nz[0] if len(nz) == 1 else None


def _to_top_right(t: _Triple) -> _Affine:
    """Affine matrix L with ``(L^{-1})[0, -1] = u^T A^{-1} v``."""
    A, u, v = t.A, t.u, t.v
    d = A.dim
    # a zero u or v falls through to a wrap whose top-right inverse entry is 0
    uu, vv = _unit_index(u), _unit_index(v)
    if uu is not None and vv is not None and uu[0] != vv[0]:
        return _place(A, uu[0], vv[0], uu[1] * vv[1])
    if uu is not None:
        # wrap on the right: [[A, -v], [0, 1]]; column d of the inverse is A^{-1} v
        W = _Affine(d + 1, dict(A.entries))
        for i, c in v.items():
            W.put(i, d, None, -c)
        W.put(d, d, None, Fraction(1))
        return _place(W, uu[0], d, uu[1])
    if vv is not None:
        # wrap on the left: [[1, -u^T], [0, A]]; row 0 of the inverse is u^T A^{-1}
        W = _Affine(d + 1, A.shifted(1))
        for j, c in u.items():
            W.put(0, j + 1, None, -c)
        W.put(0, 0, None, Fraction(1))
        return _place(W, 0, vv[0] + 1, vv[1])
    W = _Affine(d + 2, A.shifted(1))
    W.put(0, 0, None, Fraction(1))
    W.put(d + 1, d + 1, None, Fraction(1))
    for j, c in u.items():
        W.put(0, j + 1, None, -c)
    for i, c in v.items():
        W.put(i + 1, d + 1, None, -c)
    return W


def _place(A: _Affine, k: int, l: int, scale: Fraction) -> _Affine:
    """Permute so that entry (k, l) of the inverse lands at (0, last), times ``scale``."""
    d = A.dim
    order = [k] + [i for i in range(d) if i not in (k, l)] + [l]
    pos = {old: new for new, old in enumerate(order)}
    P = _Affine(d, {(pos[i], pos[j]): dict(c) for (i, j), c in A.entries.items()})
    return _scale_col0(P, scale)


def _scale_col0(A: _Affine, scale: Fraction) -> _Affine:
    """Divide column 0 by ``scale``: row 0 of the inverse gets multiplied by it."""
    if scale == 1:
        return A
    out = _Affine(A.dim)
    for (i, j), cell in A.entries.items():
        for var, c in cell.items():
            out.put(i, j, var, c / scale if j == 0 else c)
    return out


def _to_pencil(A: _Affine) -> LinearMatrixPencil:
    d = A.dim
    names = sorted({v for cell in A.entries.values() for v in cell if v is not None}, key=_var_key)
    pos = {v: t for t, v in enumerate(names)}
    A0 = [[Fraction(0)] * d for _ in range(d)]
    coeffs = [[[Fraction(0)] * d for _ in range(d)] for _ in names]
    for (i, j), cell in A.entries.items():
        for var, c in cell.items():
            if var is None:
                A0[i][j] += c
            else:
                coeffs[pos[var]][i][j] += c
    return LinearMatrixPencil(
        [RationalMatrix(c) for c in coeffs], names, RationalMatrix(A0), shape=(d, d)
    )


def formula_to_pencil(f: NCFormula | str) -> LinearMatrixPencil:
    """Square affine pencil whose inverse has f as its top-right entry.

    For every substitution of d x d matrices in the domain of f, the
    top-right d x d block of the inverse of the substituted pencil equals f
    evaluated at that substitution.
    """
    if isinstance(f, str):
        f = parse_formula(f)
    return _to_pencil(_to_top_right(_encode(f)))


def inverse_entry_border(L: LinearMatrixPencil, check: bool = True, mode=None) -> LinearMatrixPencil:
    """``[[v, L], [0, -u^T]]`` with u = e_1, v = e_n; full iff ``(L^{-1})[0, n-1] != 0``.

    Raises:
        NotFullError: if ``check`` is set and L is not full.
    """
    n = L.n
    if check:
        from ..ncrank import fullness

        if not fullness(L, mode, reduce=True):
            raise NotFullError("the pencil is not invertible over the free skew field")

    def border(M: RationalMatrix | None, const: bool) -> RationalMatrix:
        rows = [[Fraction(0)] * (n + 1) for _ in range(n + 1)]
        if M is not None:
            for i in range(n):
                for j in range(n):
                    rows[i][j + 1] = M[i, j]
        if const:
            rows[n - 1][0] = Fraction(1)
            rows[n][1] = Fraction(-1)
        return RationalMatrix(rows)

    return LinearMatrixPencil(
        [border(c, False) for c in L.coeffs],
        L.vars,
        border(L.A0, True),
        shape=(n + 1, n + 1),
    )


@dataclass(frozen=True)
class RITResult:
    """``verdict`` is "zero" or "nonzero"; ``pencil_dim`` is the size of the encoding."""

    verdict: str
    pencil_dim: int
    formula_size: int

    @property
    def is_zero(self) -> bool:
        return self.verdict == "zero"


def rit_test(f: NCFormula | str, mode=None) -> RITResult:
    """Decide whether f is zero in the free skew field.

    Both fullness checks eliminate constant rows and columns exactly before
    scaling, which shrinks the encoding pencils to a handful of rows.

    Raises:
        EmptyDomainError: some inverted subformula is identically zero, so f
            is defined nowhere.
    """
    from ..ncrank import fullness

    if isinstance(f, str):
        f = parse_formula(f)
    L = formula_to_pencil(f)
    if not fullness(L, mode, reduce=True):
        raise EmptyDomainError("formula is undefined for every matrix substitution")
    M = inverse_entry_border(L, check=False)
    verdict = "nonzero" if fullness(M, mode, reduce=True) else "zero"
    return RITResult(verdict, L.n, f.size)


def evaluation_verdict(
    f: NCFormula | str,
    trials: int = 20,
    dim: int | None = None,
    seed: int = 0,
    tol: float = 1e-7,
) -> str:
    """Randomized cross-check: evaluate f at random Gaussian matrices.

    Draws substitutions of ``dim x dim`` matrices (default
    ``max(2, size of f)``), skipping draws outside the domain, until
    ``trials`` evaluations succeed or ``5 * trials`` draws are spent. A value
    counts as zero when its largest entry is below ``tol`` times the largest
    intermediate entry met while evaluating.

    Returns:
        "zero" if every evaluation vanishes, "nonzero" if one does not,
        "empty" if no draw was in the domain.
    """
    if isinstance(f, str):
        f = parse_formula(f)
    d = dim or max(2, f.size)
    names = variables(f) or ["x1"]
    rng = np.random.default_rng(seed)
    ok = 0
    for _ in range(5 * trials):
        subs = {v: rng.standard_normal((d, d)) for v in names}
        try:
            with np.errstate(all="raise"):
                val, peak = _evaluate_with_peak(f, subs, d)
        except (np.linalg.LinAlgError, FloatingPointError):
            continue
        if float(np.abs(val).max()) > tol * peak:
            return "nonzero"
        ok += 1
        if ok == trials:
            break
    return "zero" if ok else "empty"


def _evaluate_with_peak(f: NCFormula, subs, d: int):
    """Float evaluation plus the largest intermediate entry (at least 1)."""
    peak = 1.0

    def go(g):
        nonlocal peak
        if isinstance(g, Var):
            out = subs[g.name]
        elif isinstance(g, Const):
            out = np.eye(d) * float(g.value)
        elif isinstance(g, Add):
            out = go(g.left) + go(g.right)
        elif isinstance(g, Mul):
            out = go(g.left) @ go(g.right)
        else:
            inner = go(g.child)
            if np.linalg.cond(inner) > 1e12:
                raise np.linalg.LinAlgError("outside the domain")
            out = np.linalg.inv(inner)
        peak = max(peak, float(np.abs(out).max()))
        return out

    return go(f), peak
