"""Exact rational dense linear algebra.

Everything here works over ``fractions.Fraction``. Matrices are immutable
``RationalMatrix`` values; the scaling kernels additionally use a few
integer-only helpers (``bareiss_adjugate``, ``int_matmul``) that operate on
plain lists of Python/GMP integers, which is where the hot loops live.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Iterator, Sequence

import numpy as np

try:  # GMP integers make the certified mode tolerable; plain ints also work.
    from gmpy2 import mpz
except ImportError:  # pragma: no cover
    mpz = int

__all__ = [
    "DimensionError",
    "SingularMatrixError",
    "NumericMode",
    "RationalMatrix",
    "parse_rational",
    "format_rational",
    "det",
    "invert",
    "kron",
    "truncate",
    "truncate_value",
    "rank",
    "ldlt",
    "is_positive_definite",
    "bareiss_det",
    "bareiss_adjugate",
    "int_matmul",
    "lcm_of_denominators",
]


class DimensionError(ValueError):
    """Raised when matrix shapes are incompatible."""


class SingularMatrixError(ArithmeticError):
    """Raised when a matrix that must be invertible is not.

    ``pivot_column`` is the elimination column in which no nonzero pivot
    could be found, which certifies the rank deficiency.
    """

    def __init__(self, message: str, pivot_column: int | None = None):
        super().__init__(message)
        self.pivot_column = pivot_column


_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+))?\s*$")


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse ``"-3/7"``, ``"42"`` (or pass through ints and Fractions)."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int) and not isinstance(text, bool):
        return Fraction(text)
    if not isinstance(text, str):
        raise TypeError(f"cannot parse rational from {type(text).__name__}")
    m = _RATIONAL_RE.match(text.replace("−", "-"))
    if m is None:
        raise ValueError(f"malformed rational literal {text!r}")
    num = int(m.group(1))
    den = int(m.group(2)) if m.group(2) is not None else 1
    if den == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return Fraction(num, den)


def format_rational(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return Fraction(int(x))
    if isinstance(x, str):
        return parse_rational(x)
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))
    # gmpy2 mpz / mpq and friends
    try:
        return Fraction(int(x.numerator), int(x.denominator))
    except AttributeError:
        raise TypeError(f"cannot convert {x!r} to a rational") from None


@dataclass(frozen=True)
class NumericMode:
    """Arithmetic used by the scaling iterations.

    ``kind`` is one of ``"exact-certified"`` (bit budget from the stability
    analysis), ``"exact-capped"`` (fixed bit budget ``bits``) or
    ``"float64"``.
    """

    kind: str
    bits: int | None = None

    KINDS = ("exact-certified", "exact-capped", "float64")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown numeric mode {self.kind!r}")
        if self.kind == "exact-capped":
            if self.bits is None or self.bits < 64:
                raise ValueError("exact-capped mode needs bits >= 64")
        elif self.bits is not None:
            raise ValueError(f"{self.kind} mode takes no bit count")

    @classmethod
    def parse(cls, text: str) -> "NumericMode":
        """Parse the CLI spelling: ``exact``, ``exact-capped:<bits>``, ``float``."""
        text = text.strip().lower()
        if text in ("exact", "exact-certified", "certified"):
            return cls("exact-certified")
        if text in ("float", "float64"):
            return cls("float64")
        if text.startswith("exact-capped"):
            _, _, bits = text.partition(":")
            if not bits:
                raise ValueError("exact-capped needs a bit count, e.g. exact-capped:256")
            return cls("exact-capped", int(bits))
        raise ValueError(f"unknown numeric mode {text!r}")

    @property
    def is_exact(self) -> bool:
        return self.kind != "float64"

    def __str__(self) -> str:
        if self.kind == "exact-capped":
            return f"exact-capped:{self.bits}"
        return self.kind


class RationalMatrix:
    """Immutable dense matrix of ``Fraction`` entries (row-major)."""

    __slots__ = ("rows", "cols", "_data", "_hash")

    def __init__(self, entries: Iterable[Iterable], cols: int | None = None):
        data = tuple(tuple(_as_fraction(x) for x in row) for row in entries)
        rows = len(data)
        if rows:
            widths = {len(r) for r in data}
            if len(widths) != 1:
                raise DimensionError("ragged rows")
            (width,) = widths
            if cols is not None and cols != width:
                raise DimensionError(f"expected {cols} columns, got {width}")
        else:
            width = cols or 0
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", width)
        object.__setattr__(self, "_data", data)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("RationalMatrix is immutable")

    @classmethod
    def _trusted(cls, data: tuple, rows: int, cols: int) -> "RationalMatrix":
        obj = object.__new__(cls)
        object.__setattr__(obj, "rows", rows)
        object.__setattr__(obj, "cols", cols)
        object.__setattr__(obj, "_data", data)
        object.__setattr__(obj, "_hash", None)
        return obj

    # constructors

    @classmethod
    def zeros(cls, rows: int, cols: int | None = None) -> "RationalMatrix":
        cols = rows if cols is None else cols
        z = Fraction(0)
        return cls._trusted(tuple((z,) * cols for _ in range(rows)), rows, cols)

    @classmethod
    def identity(cls, n: int) -> "RationalMatrix":
        one, z = Fraction(1), Fraction(0)
        data = tuple(tuple(one if i == j else z for j in range(n)) for i in range(n))
        return cls._trusted(data, n, n)

    @classmethod
    def unit(cls, n: int, i: int, j: int, cols: int | None = None) -> "RationalMatrix":
        """Matrix unit E_ij (0-based indices)."""
        cols = n if cols is None else cols
        rows = [[0] * cols for _ in range(n)]
        rows[i][j] = 1
        return cls(rows)

    @classmethod
    def diag(cls, values: Sequence) -> "RationalMatrix":
        n = len(values)
        rows = [[0] * n for _ in range(n)]
        for i, v in enumerate(values):
            rows[i][i] = v
        return cls(rows)

    @classmethod
    def from_numpy(cls, arr, limit_denominator: int | None = None) -> "RationalMatrix":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise DimensionError("expected a 2-d array")
        def conv(x):
            if arr.dtype.kind in "iu":
                return Fraction(int(x))
            f = _as_fraction(x)
            return f.limit_denominator(limit_denominator) if limit_denominator else f
        return cls([[conv(x) for x in row] for row in arr])

    @classmethod
    def from_strings(cls, rows: Sequence[Sequence[str]]) -> "RationalMatrix":
        return cls([[parse_rational(x) for x in row] for row in rows])

    @classmethod
    def block(cls, blocks: Sequence[Sequence["RationalMatrix"]]) -> "RationalMatrix":
        """Assemble a block matrix; every block row must share heights."""
        out: list[list[Fraction]] = []
        for brow in blocks:
            heights = {b.rows for b in brow}
            if len(heights) != 1:
                raise DimensionError("block row heights differ")
            (h,) = heights
            for r in range(h):
                line: list[Fraction] = []
                for b in brow:
                    line.extend(b._data[r])
                out.append(line)
        return cls(out)

    @classmethod
    def direct_sum(cls, *mats: "RationalMatrix") -> "RationalMatrix":
        rows = sum(m.rows for m in mats)
        cols = sum(m.cols for m in mats)
        out = [[Fraction(0)] * cols for _ in range(rows)]
        r0 = c0 = 0
        for m in mats:
            for i in range(m.rows):
                for j in range(m.cols):
                    out[r0 + i][c0 + j] = m._data[i][j]
            r0 += m.rows
            c0 += m.cols
        return cls._trusted(tuple(tuple(r) for r in out), rows, cols)

    # access

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def __getitem__(self, idx):
        i, j = idx
        return self._data[i][j]

    def row(self, i: int) -> tuple:
        return self._data[i]

    def tolist(self) -> list[list[Fraction]]:
        return [list(r) for r in self._data]

    def __iter__(self) -> Iterator[tuple]:
        return iter(self._data)

    def entries(self) -> Iterator[Fraction]:
        for r in self._data:
            yield from r

    def to_numpy(self, dtype=float) -> np.ndarray:
        return np.array([[float(x) for x in r] for r in self._data], dtype=dtype).reshape(
            self.rows, self.cols
        )

    def to_strings(self) -> list[list[str]]:
        return [[format_rational(x) for x in r] for r in self._data]

    def is_zero(self) -> bool:
        return all(x == 0 for x in self.entries())

    def is_integer(self) -> bool:
        return all(x.denominator == 1 for x in self.entries())

    def is_symmetric(self) -> bool:
        return self.is_square and all(
            self._data[i][j] == self._data[j][i] for i in range(self.rows) for j in range(i)
        )

    def max_abs(self) -> Fraction:
        return max((abs(x) for x in self.entries()), default=Fraction(0))

    def trace(self) -> Fraction:
        if not self.is_square:
            raise DimensionError("trace of a non-square matrix")
        return sum((self._data[i][i] for i in range(self.rows)), Fraction(0))

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "RationalMatrix":
        return RationalMatrix._trusted(
            tuple(tuple(self._data[i][j] for j in cols) for i in rows), len(rows), len(cols)
        )

    # algebra

    @property
    def T(self) -> "RationalMatrix":
        return RationalMatrix._trusted(
            tuple(zip(*self._data)) if self.rows else (), self.cols, self.rows
        )

    def _check_same(self, other: "RationalMatrix"):
        if self.shape != other.shape:
            raise DimensionError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, other: "RationalMatrix") -> "RationalMatrix":
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        self._check_same(other)
        return RationalMatrix._trusted(
            tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self._data, other._data)),
            self.rows,
            self.cols,
        )

    def __sub__(self, other: "RationalMatrix") -> "RationalMatrix":
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        self._check_same(other)
        return RationalMatrix._trusted(
            tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(self._data, other._data)),
            self.rows,
            self.cols,
        )

    def __neg__(self) -> "RationalMatrix":
        return RationalMatrix._trusted(
            tuple(tuple(-a for a in r) for r in self._data), self.rows, self.cols
        )

    def scale(self, c) -> "RationalMatrix":
        c = _as_fraction(c)
        return RationalMatrix._trusted(
            tuple(tuple(c * a for a in r) for r in self._data), self.rows, self.cols
        )

    def __mul__(self, c) -> "RationalMatrix":
        if isinstance(c, RationalMatrix):
            return NotImplemented
        return self.scale(c)

    __rmul__ = __mul__

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        if self.cols != other.rows:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        cols_of_other = tuple(zip(*other._data)) if other.rows else ((),) * other.cols
        zero = Fraction(0)
        data = tuple(
            tuple(
                sum((a * b for a, b in zip(r, c) if a and b), zero) for c in cols_of_other
            )
            for r in self._data
        )
        return RationalMatrix._trusted(data, self.rows, other.cols)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        return self.shape == other.shape and self._data == other._data

    def __hash__(self) -> int:
        if self._hash is None:
            object.__setattr__(self, "_hash", hash((self.shape, self._data)))
        return self._hash

    def __repr__(self) -> str:
        body = "; ".join(" ".join(format_rational(x) for x in r) for r in self._data)
        return f"RationalMatrix({self.rows}x{self.cols}: [{body}])"

    # convenience wrappers around the module functions

    def det(self) -> Fraction:
        return det(self)

    def inv(self) -> "RationalMatrix":
        return invert(self)


# ---------------------------------------------------------------------------
# integer kernels


def lcm_of_denominators(values: Iterable[Fraction]) -> int:
    return reduce(math.lcm, (v.denominator for v in values), 1)


def _integer_rows(A: RationalMatrix) -> tuple[list[list[int]], int]:
    """Clear denominators: returns (integer rows, scale) with A = rows/scale."""
    g = lcm_of_denominators(A.entries())
    rows = [[int(x.numerator * (g // x.denominator)) for x in r] for r in A]
    return rows, g


def bareiss_det(M: Sequence[Sequence[int]]) -> int:
    """Determinant of an integer matrix by fraction-free elimination."""
    n = len(M)
    if n == 0:
        return 1
    a = [list(r) for r in M]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        pivot = a[k][k]
        rk = a[k]
        for i in range(k + 1, n):
            ri = a[i]
            aik = ri[k]
            for j in range(k + 1, n):
                ri[j] = (pivot * ri[j] - aik * rk[j]) // prev
            ri[k] = 0
        prev = pivot
    return sign * a[n - 1][n - 1]


def bareiss_adjugate(M: Sequence[Sequence[int]], pivoting: bool = True):
    """Fraction-free Gauss-Jordan on ``[M | I]``.

    Returns ``(det, adj)`` with ``adj`` the integer adjugate, so that
    ``M @ adj == det * I``. Returns ``(0, None)`` if ``M`` is singular.
    With ``pivoting=False`` a zero or negative leading pivot also returns
    ``(0, None)``; for symmetric matrices this is exactly a failed positive
    definiteness check via leading principal minors.
    """
    n = len(M)
    if n == 0:
        return 1, []
    a = [list(M[i]) + [1 if j == i else 0 for j in range(n)] for i in range(n)]
    width = 2 * n
    sign = 1
    prev = 1
    for k in range(n):
        if pivoting:
            if a[k][k] == 0:
                for i in range(k + 1, n):
                    if a[i][k] != 0:
                        a[k], a[i] = a[i], a[k]
                        sign = -sign
                        break
                else:
                    return 0, None
        elif a[k][k] <= 0:
            return 0, None
        pivot = a[k][k]
        rk = a[k]
        for i in range(n):
            if i == k:
                continue
            ri = a[i]
            aik = ri[k]
            if aik == 0:
                for j in range(k + 1, width):
                    ri[j] = (pivot * ri[j]) // prev
            else:
                for j in range(k + 1, width):
                    ri[j] = (pivot * ri[j] - aik * rk[j]) // prev
            ri[k] = 0
        prev = pivot
    d = a[n - 1][n - 1]
    # after full Gauss-Jordan every diagonal entry equals det (up to the row-swap sign)
    adj = [row[n:] for row in a]
    if sign < 0:
        d = -d
        adj = [[-x for x in row] for row in adj]
    return d, adj


def int_matmul(A: Sequence[Sequence[int]], B: Sequence[Sequence[int]]) -> list[list[int]]:
    Bt = list(zip(*B))
    return [[sum(x * y for x, y in zip(r, c)) for c in Bt] for r in A]


# ---------------------------------------------------------------------------
# public operations


def det(A: RationalMatrix) -> Fraction:
    """Exact determinant (Bareiss elimination after clearing denominators)."""
    if not A.is_square:
        raise DimensionError(f"determinant of non-square {A.shape} matrix")
    n = A.rows
    if n == 0:
        return Fraction(1)
    rows, g = _integer_rows(A)
    return Fraction(bareiss_det(rows), g**n)


def invert(A: RationalMatrix) -> RationalMatrix:
    """Exact inverse; raises ``SingularMatrixError`` for singular input."""
    if not A.is_square:
        raise DimensionError(f"inverse of non-square {A.shape} matrix")
    n = A.rows
    if n == 0:
        return A
    # Gauss-Jordan over the rationals, remembering where elimination broke down
    a = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(A)]
    for k in range(n):
        p = next((i for i in range(k, n) if a[i][k] != 0), None)
        if p is None:
            raise SingularMatrixError(f"matrix is singular: no pivot in column {k}", k)
        if p != k:
            a[k], a[p] = a[p], a[k]
        piv = a[k][k]
        rk = [x / piv for x in a[k]]
        a[k] = rk
        for i in range(n):
            if i != k and a[i][k] != 0:
                f = a[i][k]
                a[i] = [x - f * y for x, y in zip(a[i], rk)]
    return RationalMatrix._trusted(tuple(tuple(r[n:]) for r in a), n, n)


def kron(A: RationalMatrix, B: RationalMatrix) -> RationalMatrix:
    """Kronecker product; block (i, j) is ``A[i, j] * B``."""
    rows = A.rows * B.rows
    cols = A.cols * B.cols
    data = []
    for i in range(A.rows):
        for k in range(B.rows):
            brow = B.row(k)
            line = []
            for j in range(A.cols):
                a = A[i, j]
                line.extend(a * b for b in brow)
            data.append(tuple(line))
    return RationalMatrix._trusted(tuple(data), rows, cols)


def truncate_value(x: Fraction, bits: int) -> Fraction:
    """``sign(x) * floor(|x| * 2**bits) / 2**bits`` (toward zero)."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    x = _as_fraction(x)
    q = (abs(x.numerator) << bits) // x.denominator
    return Fraction(q if x >= 0 else -q, 1 << bits)


def truncate(A: RationalMatrix, bits: int) -> RationalMatrix:
    if bits < 1:
        raise ValueError("bits must be >= 1")
    return RationalMatrix._trusted(
        tuple(tuple(truncate_value(x, bits) for x in r) for r in A), A.rows, A.cols
    )


def rank(A: RationalMatrix) -> int:
    """Exact rank by fraction-free row reduction."""
    rows, _ = _integer_rows(A) if A.rows and A.cols else ([], 1)
    a = [list(r) for r in rows]
    r = 0
    for c in range(A.cols):
        p = next((i for i in range(r, A.rows) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        piv = a[r][c]
        for i in range(r + 1, A.rows):
            f = a[i][c]
            if f:
                a[i] = [piv * x - f * y for x, y in zip(a[i], a[r])]
        r += 1
        if r == A.rows:
            break
    return r


def ldlt(A: RationalMatrix) -> tuple[RationalMatrix, list[Fraction]] | None:
    """Exact ``A = L D L^T`` without pivoting.

    Returns ``(L, d)`` or ``None`` if a zero pivot is hit.
    """
    if not A.is_symmetric():
        raise ValueError("ldlt needs a symmetric matrix")
    n = A.rows
    L = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    d: list[Fraction] = []
    for j in range(n):
        s = A[j, j] - sum((L[j][k] ** 2 * d[k] for k in range(j)), Fraction(0))
        if s == 0:
            return None
        d.append(s)
        for i in range(j + 1, n):
            t = A[i, j] - sum((L[i][k] * L[j][k] * d[k] for k in range(j)), Fraction(0))
            L[i][j] = t / s
    return RationalMatrix(L), d


def is_positive_definite(A: RationalMatrix) -> bool:
    """Exact PD test: symmetric with all LDL^T pivots positive."""
    if not A.is_symmetric():
        return False
    fac = ldlt(A)
    return fac is not None and all(x > 0 for x in fac[1])
