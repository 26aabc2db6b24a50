import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import gram_pd, rational_matrices, small_fractions
from opscaling.exact_linalg import (
    DimensionError,
    NumericMode,
    RationalMatrix,
    SingularMatrixError,
    bareiss_adjugate,
    det,
    format_rational,
    invert,
    is_positive_definite,
    kron,
    ldlt,
    parse_rational,
    rank,
    truncate,
    truncate_value,
)
from opscaling.oracles import gauss_det


def RM(rows):
    return RationalMatrix(rows)


class TestDet:
    def test_identity(self):
        assert det(RationalMatrix.identity(2)) == 1

    def test_two_by_two(self):
        assert det(RM([[1, 2], [3, 4]])) == -2

    def test_odd_skew_symmetric_is_zero(self):
        assert det(RM([[0, 1, 1], [-1, 0, 1], [-1, -1, 0]])) == 0

    def test_non_square_raises(self):
        with pytest.raises(DimensionError):
            det(RM([[1, 2, 3], [4, 5, 6]]))

    @given(rational_matrices(max_n=5))
    def test_matches_plain_elimination(self, A):
        assert det(A) == gauss_det(A.tolist())

    @given(st.integers(1, 4).flatmap(lambda n: st.tuples(rational_matrices(n=n), rational_matrices(n=n))))
    def test_multiplicative(self, pair):
        A, B = pair
        assert det(A @ B) == det(A) * det(B)


class TestInvert:
    def test_identity(self):
        assert invert(RationalMatrix.identity(3)) == RationalMatrix.identity(3)

    def test_diagonal(self):
        assert invert(RationalMatrix.diag([2, 4])) == RationalMatrix.diag([Fraction(1, 2), Fraction(1, 4)])

    def test_two_by_two(self):
        assert invert(RM([[2, 1], [1, 1]])) == RM([[1, -1], [-1, 2]])

    def test_singular_carries_pivot(self):
        with pytest.raises(SingularMatrixError) as info:
            invert(RM([[1, 2], [2, 4]]))
        assert info.value.pivot_column == 1

    @given(rational_matrices(max_n=4))
    def test_involution_and_product(self, A):
        assume(det(A) != 0)
        Ai = invert(A)
        assert A @ Ai == RationalMatrix.identity(A.rows)
        assert invert(Ai) == A


class TestKron:
    def test_scalar_one(self):
        B = RM([[1, 2], [3, 4]])
        assert kron(RM([[1]]), B) == B

    def test_shape(self):
        assert kron(RationalMatrix.identity(2), RationalMatrix.identity(3)).shape == (6, 6)

    def test_unit_blocks(self):
        E11 = RationalMatrix.unit(2, 0, 0)
        E22 = RationalMatrix.unit(2, 1, 1)
        K = kron(E11, E22)
        assert [(i, j) for i in range(4) for j in range(4) if K[i, j]] == [(1, 1)]
        assert K[1, 1] == 1

    @given(
        st.integers(2, 3).flatmap(
            lambda a: st.integers(2, 3).flatmap(
                lambda b: st.tuples(rational_matrices(n=a), rational_matrices(n=b))
            )
        )
    )
    def test_det_law(self, pair):
        A, B = pair
        assert det(kron(A, B)) == det(A) ** B.rows * det(B) ** A.rows


class TestTruncate:
    def test_third(self):
        assert truncate_value(Fraction(1, 3), 4) == Fraction(5, 16)

    def test_dyadic_unchanged(self):
        assert truncate_value(Fraction(3, 4), 4) == Fraction(3, 4)

    def test_toward_zero(self):
        assert truncate_value(Fraction(-1, 3), 4) == Fraction(-5, 16)

    @given(rational_matrices(max_n=3, elements=st.fractions(-50, 50, max_denominator=1000)), st.integers(1, 40))
    def test_error_bounds(self, A, bits):
        T = truncate(A, bits)
        for i in range(A.rows):
            for j in range(A.cols):
                a, t = A[i, j], T[i, j]
                assert abs(a - t) <= Fraction(1, 2**bits)
                assert abs(t) <= abs(a)
                assert (t * 2**bits).denominator == 1


class TestRationals:
    @pytest.mark.parametrize("text,value", [("-3/7", Fraction(-3, 7)), ("42", 42), ("6/4", Fraction(3, 2)), ("−2", -2)])
    def test_parse(self, text, value):
        assert parse_rational(text) == value

    @pytest.mark.parametrize("bad", ["1/0", "x", "1.5", "", "2/-3"])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValueError):
            parse_rational(bad)

    @given(small_fractions)
    def test_round_trip(self, x):
        assert parse_rational(format_rational(x)) == x

    def test_lowest_terms(self):
        x = parse_rational("4/6")
        assert (x.numerator, x.denominator) == (2, 3)
        assert parse_rational("0/5").denominator == 1


class TestPositiveDefinite:
    def test_random_gram_agrees_with_eigenvalues(self):
        rng = random.Random(3)
        for _ in range(60):
            n = rng.randint(1, 4)
            A = gram_pd(rng, n)
            if rng.random() < 0.5:
                # push one eigenvalue negative
                A = A - RationalMatrix.identity(n).scale(rng.randint(1, 40))
            eig_pd = bool(np.all(np.linalg.eigvalsh(A.to_numpy()) > 1e-9))
            assert is_positive_definite(A) == eig_pd

    def test_ldlt_reconstructs(self):
        A = gram_pd(random.Random(1), 3)
        L, d = ldlt(A)
        assert L @ RationalMatrix.diag(d) @ L.T == A

    def test_adjugate_without_pivoting_flags_indefinite(self):
        assert bareiss_adjugate([[0, 1], [1, 0]], pivoting=False)[0] == 0
        d, adj = bareiss_adjugate([[2, 1], [1, 2]], pivoting=False)
        assert d == 3 and adj == [[2, -1], [-1, 2]]


def test_rank():
    assert rank(RM([[1, 2], [2, 4]])) == 1
    assert rank(RationalMatrix.zeros(3)) == 0
    assert rank(RationalMatrix.identity(4)) == 4


@pytest.mark.parametrize(
    "text,kind,bits",
    [("exact", "exact-certified", None), ("exact-capped:256", "exact-capped", 256), ("float", "float64", None)],
)
def test_numeric_mode_parse(text, kind, bits):
    m = NumericMode.parse(text)
    assert (m.kind, m.bits) == (kind, bits)


def test_numeric_mode_rejects_small_caps():
    with pytest.raises(ValueError):
        NumericMode.parse("exact-capped:32")


def test_matrix_is_immutable():
    A = RM([[1]])
    with pytest.raises(AttributeError):
        A.rows = 2
