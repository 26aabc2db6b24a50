"""Shared strategies and instance generators."""

import random
from fractions import Fraction

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from opscaling.cp_operator import CPOperator
from opscaling.exact_linalg import RationalMatrix

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

small_fractions = st.fractions(min_value=-5, max_value=5, max_denominator=7)


@st.composite
def rational_matrices(draw, n=None, min_n=1, max_n=4, elements=small_fractions):
    n = n if n is not None else draw(st.integers(min_n, max_n))
    rows = draw(st.lists(st.lists(elements, min_size=n, max_size=n), min_size=n, max_size=n))
    return RationalMatrix(rows)


@st.composite
def operators(draw, min_n=1, max_n=3, max_m=3, lo=-3, hi=3):
    n = draw(st.integers(min_n, max_n))
    m = draw(st.integers(1, max_m))
    ints = st.integers(lo, hi)
    mats = [
        RationalMatrix(draw(st.lists(st.lists(ints, min_size=n, max_size=n), min_size=n, max_size=n)))
        for _ in range(m)
    ]
    return CPOperator(mats)


def gram_pd(rng: random.Random, n: int, lo: int = -4, hi: int = 4) -> RationalMatrix:
    """Random symmetric positive definite rational matrix ``B B^T + I/4``."""
    B = RationalMatrix([[rng.randint(lo, hi) for _ in range(n)] for _ in range(n)])
    return B @ B.T + RationalMatrix.identity(n).scale(Fraction(1, 4))


def random_operator(rng: random.Random, n: int, m: int, lo: int = -3, hi: int = 3) -> CPOperator:
    return CPOperator(
        [RationalMatrix([[rng.randint(lo, hi) for _ in range(n)] for _ in range(n)]) for _ in range(m)]
    )


def unit(n: int, i: int, j: int) -> RationalMatrix:
    """``E_ij`` with 1-based indices."""
    return RationalMatrix.unit(n, i - 1, j - 1)


def skew3_kraus() -> list[RationalMatrix]:
    """Constant, first and second coefficient of the 3x3 skew-symmetric pencil."""
    A0 = unit(3, 2, 3) - unit(3, 3, 2)
    Az = unit(3, 1, 2) - unit(3, 2, 1)
    Aw = unit(3, 1, 3) - unit(3, 3, 1)
    return [A0, Az, Aw]


def shrunk_template() -> CPOperator:
    """3x3 operator mapping span(e1, e2) into span(e1) with T(I), T*(I) nonsingular."""
    return CPOperator([unit(3, 1, 1) + unit(3, 2, 3), unit(3, 1, 2) + unit(3, 3, 3), unit(3, 1, 3)])


def random_invertible(rng: random.Random, n: int) -> RationalMatrix:
    from opscaling.exact_linalg import det

    while True:
        B = RationalMatrix([[rng.randint(-2, 2) for _ in range(n)] for _ in range(n)])
        if det(B) != 0:
            return B


def conjugated(T: CPOperator, B: RationalMatrix, C: RationalMatrix) -> CPOperator:
    """Kraus ``{B A_i C}``: the operator ``X -> B T(C X C^T) B^T``."""
    return CPOperator([B @ a @ C for a in T.kraus])


def random_formula(rng: random.Random, depth: int, nvars: int = 3, inverses: bool = True):
    """Random formula tree over x1..x{nvars} with small integer constants."""
    from opscaling.symbolic import Add, Const, Inv, Mul, Var

    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.8:
            return Var(f"x{rng.randint(1, nvars)}")
        return Const(rng.choice([-2, -1, 1, 2, 3]))
    ops = ["add", "mul", "sub"] + (["inv"] if inverses else [])
    op = rng.choice(ops)
    if op == "inv":
        return Inv(random_formula(rng, depth - 1, nvars, inverses))
    left = random_formula(rng, depth - 1, nvars, inverses)
    right = random_formula(rng, depth - 1, nvars, inverses)
    if op == "add":
        return Add(left, right)
    if op == "mul":
        return Mul(left, right)
    return left - right


def random_symbolic_matrix(rng: random.Random, rows: int, cols: int):
    """Division-free symbolic matrix over at most three variables."""
    from opscaling.symbolic import Const, SymbolicMatrix

    out = []
    for _ in range(rows):
        row = []
        for _ in range(cols):
            r = rng.random()
            if r < 0.2:
                row.append(Const(0))
            elif r < 0.35:
                row.append(Const(rng.randint(-2, 2)))
            else:
                row.append(random_formula(rng, 2, 3, inverses=False))
        out.append(row)
    return SymbolicMatrix(out)


HUA = "inv(x1 + x1*inv(x2)*x1) - (inv(x1) - inv(x1 + x2))"


def random_identity(rng: random.Random, depth: int = 1):
    """A formula equal to zero in the free skew field, built from random parts."""
    from opscaling.symbolic import Const, Inv

    g = random_formula(rng, depth, inverses=False)
    h = random_formula(rng, depth, inverses=False)
    k = random_formula(rng, depth, inverses=False)
    kind = rng.randrange(6)
    if kind == 0:
        return g - g
    if kind == 1:
        return Inv(Inv(g)) - g
    if kind == 2:
        return g * Inv(g) - Const(1)
    if kind == 3:
        return (g + h) * k - (g * k + h * k)
    if kind == 4:
        return Inv(g * h) - Inv(h) * Inv(g)
    return Inv(g + g * Inv(h) * g) - (Inv(g) - Inv(g + h))


def rit_corpus(seed: int, count: int):
    """Alternating random formulas and random identities."""
    rng = random.Random(seed)
    return [random_identity(rng) if k % 2 else random_formula(rng, 3) for k in range(count)]
