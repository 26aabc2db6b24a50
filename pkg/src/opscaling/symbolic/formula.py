"""Non-commutative rational formulas: AST, parser, printer, evaluation.

Grammar (whitespace ignored)::

    expr   := term { ("+" | "-") term }
    term   := factor { "*" factor }
    factor := ["-"] ( "inv" "(" expr ")" | "(" expr ")" | var | rational )
    var    := "x" digits
    rational := digits [ "/" digits ]

Subtraction ``a - b`` is stored as ``Add(a, Mul(Const(-1), b))`` and unary
minus as ``Mul(Const(-1), f)`` (folded into the literal for constants), so
the AST only has five node types. The printer inverts both conventions,
which makes ``parse(print(f)) == f`` hold structurally.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "FormulaSyntaxError",
    "NCFormula",
    "Var",
    "Const",
    "Add",
    "Mul",
    "Inv",
    "parse_formula",
    "format_formula",
    "evaluate",
    "variables",
    "formula_size",
    "formula_bits",
    "degree",
    "has_inverse",
]


class FormulaSyntaxError(ValueError):
    """Raised on malformed formula text; ``position`` is a 0-based offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class NCFormula:
    """Base class of formula nodes (immutable, hashable, structurally compared)."""

    __slots__ = ()

    @property
    def size(self) -> int:
        return formula_size(self)

    @property
    def bits(self) -> int:
        return formula_bits(self)

    def __str__(self) -> str:
        return format_formula(self)

    # light operator sugar for building test formulas
    def __add__(self, other: "NCFormula") -> "NCFormula":
        return Add(self, other)

    def __sub__(self, other: "NCFormula") -> "NCFormula":
        return Add(self, Mul(Const(Fraction(-1)), other))

    def __mul__(self, other: "NCFormula") -> "NCFormula":
        return Mul(self, other)


@dataclass(frozen=True, eq=True)
class Var(NCFormula):
    name: str

    @property
    def index(self) -> int:
        m = re.fullmatch(r"x(\d+)", self.name)
        if m is None:
            raise ValueError(f"{self.name!r} is not of the form x<digits>")
        return int(m.group(1))


@dataclass(frozen=True, eq=True)
class Const(NCFormula):
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True, eq=True)
class Add(NCFormula):
    left: NCFormula
    right: NCFormula


@dataclass(frozen=True, eq=True)
class Mul(NCFormula):
    left: NCFormula
    right: NCFormula


@dataclass(frozen=True, eq=True)
class Inv(NCFormula):
    child: NCFormula


def _children(f: NCFormula) -> tuple:
    if isinstance(f, (Add, Mul)):
        return (f.left, f.right)
    if isinstance(f, Inv):
        return (f.child,)
    return ()


def formula_size(f: NCFormula) -> int:
    """Number of nodes in the tree (leaves and gates)."""
    stack, count = [f], 0
    while stack:
        g = stack.pop()
        count += 1
        stack.extend(_children(g))
    return count


def formula_bits(f: NCFormula) -> int:
    """Largest bit length among numerators and denominators of constants."""
    best, stack = 0, [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Const):
            v = g.value
            best = max(best, abs(v.numerator).bit_length(), v.denominator.bit_length())
        stack.extend(_children(g))
    return best


def variables(f: NCFormula) -> list[str]:
    """Variable names sorted by index (then by name)."""
    seen, stack = set(), [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Var):
            seen.add(g.name)
        stack.extend(_children(g))
    return sorted(seen, key=_var_key)


def _var_key(name: str):
    m = re.fullmatch(r"x(\d+)", name)
    return (0, int(m.group(1)), "") if m else (1, 0, name)


def has_inverse(f: NCFormula) -> bool:
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Inv):
            return True
        stack.extend(_children(g))
    return False


def degree(f: NCFormula) -> int:
    """Polynomial degree of a division-free formula (an upper bound; no cancellation)."""
    if isinstance(f, Var):
        return 1
    if isinstance(f, Const):
        return 0
    if isinstance(f, Add):
        return max(degree(f.left), degree(f.right))
    if isinstance(f, Mul):
        return degree(f.left) + degree(f.right)
    raise ValueError("degree is only defined for division-free formulas")


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\s*/\s*\d+)?)|(?P<var>x\d+)|(?P<inv>inv)\b|(?P<op>[-+*()−]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    text_len = len(text)
    while pos < text_len:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        val = m.group(kind)
        if kind == "op" and val == "−":
            val = "-"
        if kind == "num":
            num, _, den = val.partition("/")
            if den and int(den) == 0:
                raise FormulaSyntaxError("zero denominator", start)
        tokens.append((kind, val, start))
        pos = m.end()
    tokens.append(("end", "", text_len))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, val: str):
        kind, v, pos = self.take()
        if v != val:
            raise FormulaSyntaxError(f"expected {val!r}, found {v or 'end of input'!r}", pos)

    def expr(self) -> NCFormula:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Add(node, _negate(rhs))
        return node

    def term(self) -> NCFormula:
        node = self.factor()
        while self.peek() [0] == "op" and self.peek()[1] == "*":
            self.take()
            node = Mul(node, self.factor())
        return node

    def factor(self) -> NCFormula:
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return _negate(self.factor())
        if kind == "inv":
            self.take()
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return Inv(inner)
        if kind == "op" and val == "(":
            self.take()
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "var":
            self.take()
            return Var(val)
        if kind == "num":
            self.take()
            num, _, den = val.replace(" ", "").partition("/")
            return Const(Fraction(int(num), int(den) if den else 1))
        if kind == "end":
            raise FormulaSyntaxError("unexpected end of input", pos)
        raise FormulaSyntaxError(f"unexpected token {val!r}", pos)


def _negate(f: NCFormula) -> NCFormula:
    if isinstance(f, Const) and f.value > 0:
        return Const(-f.value)
    return Mul(Const(Fraction(-1)), f)


def parse_formula(text: str) -> NCFormula:
    """Parse formula text into an AST.

    Raises:
        FormulaSyntaxError: with the offending 0-based position.
    """
    p = _Parser(text)
    node = p.expr()
    kind, val, pos = p.peek()
    if kind != "end":
        raise FormulaSyntaxError(f"unexpected token {val!r}", pos)
    return node


# ---------------------------------------------------------------------------
# printing


def _is_neg_one(f: NCFormula) -> bool:
    return isinstance(f, Const) and f.value == -1


def _const_str(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def format_formula(f: NCFormula) -> str:
    """Canonical text; ``parse_formula(format_formula(f)) == f``."""
    return _fmt(f, 0)


# precedence: 0 = expr, 1 = term, 2 = factor
def _fmt(f: NCFormula, ctx: int) -> str:
    if isinstance(f, Var):
        return f.name
    if isinstance(f, Const):
        v = f.value
        s = _const_str(v)
        if v < 0:
            # "-3" parses back to Const(-3) only in factor position, which is fine
            # as a leading factor; inside products parenthesize for clarity
            return s if ctx <= 1 else f"({s})"
        return s
    if isinstance(f, Inv):
        return f"inv({_fmt(f.child, 0)})"
    if isinstance(f, Add):
        right = f.right
        if isinstance(right, Mul) and _is_neg_one(right.left) and not _folds(right.right):
            s = f"{_fmt(f.left, 0)} - {_fmt(right.right, 1)}"
        else:
            s = f"{_fmt(f.left, 0)} + {_fmt(right, 1)}"
        return s if ctx == 0 else f"({s})"
    if isinstance(f, Mul):
        if _is_neg_one(f.left) and not _folds(f.right):
            s = f"-{_fmt(f.right, 2)}"
            return s if ctx <= 1 else f"({s})"
        s = f"{_fmt(f.left, 1)}*{_fmt(f.right, 2)}"
        return s if ctx <= 1 else f"({s})"
    raise TypeError(f"not a formula node: {f!r}")


def _folds(f: NCFormula) -> bool:
    """A negated positive literal parses back as a negative literal, not a product."""
    return isinstance(f, Const) and f.value > 0


# ---------------------------------------------------------------------------
# evaluation


def evaluate(
    f: NCFormula,
    subs: Mapping[str, np.ndarray],
    dim: int | None = None,
    inverse: Callable | None = None,
):
    """Evaluate under a substitution of square matrices for variables.

    Works for float arrays and for object arrays of ``Fraction`` alike;
    ``inverse`` overrides the matrix inverse (defaults to ``numpy.linalg.inv``
    for float input and exact Gauss-Jordan for object arrays).

    Raises:
        ZeroDivisionError / numpy.linalg.LinAlgError: outside the domain.
    """
    if dim is None:
        dim = next(iter(subs.values())).shape[0] if subs else 1
    sample = next(iter(subs.values())) if subs else np.eye(dim)
    exact = sample.dtype == object
    if inverse is None:
        inverse = _exact_inverse if exact else np.linalg.inv
    eye = _identity(dim, exact)

    def go(g):
        if isinstance(g, Var):
            return subs[g.name]
        if isinstance(g, Const):
            return eye * (g.value if exact else float(g.value))
        if isinstance(g, Add):
            return go(g.left) + go(g.right)
        if isinstance(g, Mul):
            return go(g.left) @ go(g.right)
        return inverse(go(g.child))

    return go(f)


def _identity(d: int, exact: bool):
    if not exact:
        return np.eye(d)
    out = np.empty((d, d), dtype=object)
    for i in range(d):
        for j in range(d):
            out[i, j] = Fraction(int(i == j))
    return out


def _exact_inverse(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    a = [[Fraction(x) for x in A[i]] + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for k in range(n):
        p = next((i for i in range(k, n) if a[i][k] != 0), None)
        if p is None:
            raise ZeroDivisionError("singular matrix in evaluation")
        a[k], a[p] = a[p], a[k]
        piv = a[k][k]
        a[k] = [x / piv for x in a[k]]
        for i in range(n):
            if i != k and a[i][k]:
                c = a[i][k]
                a[i] = [x - c * y for x, y in zip(a[i], a[k])]
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = a[i][n + j]
    return out
