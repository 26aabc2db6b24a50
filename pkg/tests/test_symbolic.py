import json
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import HUA, skew3_kraus, random_formula, random_symbolic_matrix, rit_corpus
from opscaling.exact_linalg import RationalMatrix, rank
from opscaling.ncrank import ncrank_classical, ncrank_quantum
from opscaling.symbolic import (
    Add,
    Const,
    EmptyDomainError,
    FormulaSyntaxError,
    Inv,
    LinearMatrixPencil,
    Mul,
    NotFullError,
    PencilFormatError,
    SymbolicMatrix,
    UnsupportedEntryError,
    Var,
    affine_to_linear,
    eliminate_constant_lines,
    evaluate,
    evaluation_verdict,
    format_formula,
    formula_to_pencil,
    higman_linearize,
    inverse_entry_border,
    parse_formula,
    pencil_from_json,
    pencil_to_json,
    rit_test,
    symbolic_from_json,
    symbolic_to_json,
)

x1, x2, x3 = Var("x1"), Var("x2"), Var("x3")


@st.composite
def formulas(draw, depth=3):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_formula(random.Random(seed), draw(st.integers(0, depth)))


def formula_corpus(seed: int, count: int, depth: int = 3):
    rng = random.Random(seed)
    return [random_formula(rng, depth) for _ in range(count)]


def skew3_pencil() -> LinearMatrixPencil:
    A0, Az, Aw = skew3_kraus()
    return LinearMatrixPencil([Az, Aw], ["x1", "x2"], A0)


class TestParse:
    def test_sum(self):
        f = parse_formula("x1 + x2")
        assert f == Add(x1, x2) and f.size == 3

    def test_inverse(self):
        f = parse_formula("inv(x1)")
        assert f == Inv(x1) and f.size == 2

    def test_nested_size(self):
        f = parse_formula("x1 + x1*inv(x2)*x1")
        assert f == Add(x1, Mul(Mul(x1, Inv(x2)), x1))
        assert f.size == 8  # three leaves, two products, one inverse, one sum

    def test_precedence_and_parentheses(self):
        assert parse_formula("x1 + x2*x3") == Add(x1, Mul(x2, x3))
        assert parse_formula("(x1 + x2)*x3") == Mul(Add(x1, x2), x3)

    def test_minus_signs(self):
        assert parse_formula("x1 - x2") == parse_formula("x1 − x2") == Add(x1, Mul(Const(-1), x2))
        assert parse_formula("-3") == Const(-3)

    def test_rational_constant(self):
        f = parse_formula("2/3*x1")
        assert f == Mul(Const(Fraction(2, 3)), x1) and f.bits >= 2

    @pytest.mark.parametrize("text,pos", [("x1 +", 4), ("y1", 0), ("x1 x2", 3), ("inv x1", 4), ("x1/2", 2)])
    def test_errors_carry_position(self, text, pos):
        with pytest.raises(FormulaSyntaxError) as info:
            parse_formula(text)
        assert info.value.position == pos

    @given(formulas())
    def test_round_trip(self, f):
        assert parse_formula(format_formula(f)) == f

    def test_variable_index(self):
        assert Var("x12").index == 12


class TestHigman:
    def test_worked_example(self):
        M = SymbolicMatrix([["1", "x1"], ["x2", "x3 + x1*x2"]])
        L, k = higman_linearize(M)
        assert k == 1 and L.shape == (3, 3)
        assert L.pretty() == "[[1, x1, 0], [x2, x3, x1], [0, -x2, 1]]"

    def test_linear_input_unchanged(self):
        M = SymbolicMatrix([["x1", "1"], ["0", "x2 + 2"]])
        L, k = higman_linearize(M)
        assert k == 0 and L.pretty() == "[[x1, 1], [0, 2 + x2]]"

    def test_single_product(self):
        L, k = higman_linearize(SymbolicMatrix([["x1*x2"]]))
        assert k == 1 and L.pretty() == "[[0, x1], [-x2, 1]]"
        assert ncrank_quantum(L).ncrank == 2

    def test_rejects_inverse(self):
        with pytest.raises(UnsupportedEntryError):
            higman_linearize(SymbolicMatrix([["inv(x1)"]]))

    def test_corank_preserved(self):
        rng = random.Random(41)
        for t in range(50):
            n = rng.choice([2, 3])
            M = random_symbolic_matrix(rng, n, n)
            L, k = higman_linearize(M)
            assert L.shape == (n + k, n + k)
            names = sorted(set(M.variables()) | set(L.vars))
            r_in = r_out = 0
            for _ in range(4):
                vals = {v: Fraction(rng.randint(-50, 50)) for v in names}
                r_in = max(r_in, rank(M.substitute(vals)))
                r_out = max(r_out, rank(L.substitute(vals)))
            assert r_out == r_in + k
            if t % 5 == 0:
                assert ncrank_quantum(L).ncrank == ncrank_classical(M).ncrank + k


class TestAffine:
    def test_zero_constant_dropped(self):
        p = LinearMatrixPencil([RationalMatrix.identity(2)], ["x1"], RationalMatrix.zeros(2))
        q = affine_to_linear(p)
        assert q.A0 is None and q.coeffs == p.coeffs

    def test_skew3(self):
        q = affine_to_linear(skew3_pencil())
        assert q.vars == ("x0", "x1", "x2") and list(q.coeffs) == skew3_kraus()

    def test_count_grows_by_one(self):
        p = skew3_pencil()
        assert affine_to_linear(p).m == p.m + 1


def top_right_block(L: LinearMatrixPencil, subs, d: int) -> np.ndarray:
    inv = np.linalg.inv(L.evaluate(subs, d))
    return inv[:d, -d:]


class TestFormulaToPencil:
    def test_scalar_variable(self):
        L = formula_to_pencil("x1")
        for v in [3, -2, 7, 0.5, 11]:
            assert top_right_block(L, {"x1": np.array([[float(v)]])}, 1)[0, 0] == pytest.approx(v)

    def test_dimension_bound_and_evaluation_contract(self):
        rng = np.random.default_rng(0)
        corpus = formula_corpus(3, 30) + rit_corpus(4, 30) + [parse_formula(HUA), parse_formula("x1*x2 - x2*x1")]
        checked = 0
        for f in corpus:
            L = formula_to_pencil(f)
            assert L.n <= 2 * f.size
            names = sorted(set(L.vars) | {"x1", "x2", "x3"})
            for _ in range(3):
                d = 3
                subs = {v: rng.standard_normal((d, d)) for v in names}
                try:
                    with np.errstate(all="raise"):
                        want = evaluate(f, subs, d)
                except (np.linalg.LinAlgError, FloatingPointError):
                    continue
                got = top_right_block(L, subs, d)
                assert np.allclose(got, want, rtol=1e-6, atol=1e-6 * max(1.0, np.abs(want).max()))
                checked += 1
        assert checked > 100

    def test_exact_evaluation_contract(self):
        f = parse_formula("inv(x1 + x2*x1) + 2*x2")
        L = formula_to_pencil(f)
        subs = {
            "x1": np.array([[Fraction(1), Fraction(2)], [Fraction(0), Fraction(3)]], dtype=object),
            "x2": np.array([[Fraction(1), Fraction(0)], [Fraction(1), Fraction(1)]], dtype=object),
        }
        from opscaling.exact_linalg import invert

        big = RationalMatrix(L.evaluate(subs, 2).tolist())
        inv = invert(big)
        block = [[inv[i, big.cols - 2 + j] for j in range(2)] for i in range(2)]
        assert block == evaluate(f, subs, 2).tolist()


class TestInverseEntryBorder:
    def test_identity_has_zero_corner(self):
        L = LinearMatrixPencil([], [], RationalMatrix.identity(2), shape=(2, 2))
        M = inverse_entry_border(L)
        assert M.shape == (3, 3)
        assert rank(M.substitute({})) < 3

    def test_swap_has_unit_corner(self):
        L = LinearMatrixPencil([], [], RationalMatrix([[0, 1], [1, 0]]), shape=(2, 2))
        M = inverse_entry_border(L)
        assert rank(M.substitute({})) == 3

    def test_requires_full(self):
        L = LinearMatrixPencil([RationalMatrix.unit(2, 0, 0), RationalMatrix.unit(2, 0, 1)], ["x1", "x2"])
        with pytest.raises(NotFullError):
            inverse_entry_border(L)

    def test_shape(self):
        assert inverse_entry_border(skew3_pencil()).shape == (4, 4)


class TestRIT:
    @pytest.mark.parametrize(
        "text,verdict",
        [("x1 - x1", "zero"), ("x1*x2 - x2*x1", "nonzero"), (HUA, "zero"), ("x1*inv(x1) - 1", "zero"), ("x1 + x2", "nonzero")],
    )
    def test_examples(self, text, verdict):
        res = rit_test(text)
        assert res.verdict == verdict and res.is_zero == (verdict == "zero")

    def test_empty_domain(self):
        with pytest.raises(EmptyDomainError):
            rit_test("inv(x1 - x1)")

    def test_agrees_with_evaluation(self):
        seen = set()
        for f in rit_corpus(11, 60):
            ev = evaluation_verdict(f)
            seen.add(ev)
            try:
                res = rit_test(f)
            except EmptyDomainError:
                assert ev == "empty"
                continue
            assert res.verdict == ev, format_formula(f)
        assert seen == {"zero", "nonzero", "empty"}


class TestEliminateConstantLines:
    def test_reduces_constant_rows(self):
        L = formula_to_pencil("x1*x2")
        R, removed = eliminate_constant_lines(L)
        assert removed > 0 and R.n == L.n - removed

    def test_zero_line_proves_not_full(self):
        p = LinearMatrixPencil([RationalMatrix([[1, 0], [0, 0]])], ["x1"], RationalMatrix([[0, 0], [0, 0]]))
        assert eliminate_constant_lines(p)[0] is None

    def test_constant_invertible(self):
        p = LinearMatrixPencil([], [], RationalMatrix([[1, 2], [3, 4]]), shape=(2, 2))
        R, removed = eliminate_constant_lines(p)
        assert R.n == 0 and removed == 2


class TestJson:
    def test_pencil_round_trip(self):
        p = skew3_pencil()
        assert pencil_from_json(json.dumps(pencil_to_json(p))) == p

    def test_rectangular_pencil(self):
        p = LinearMatrixPencil([RationalMatrix([[1, 0, 2]])], ["x1"])
        doc = pencil_to_json(p)
        assert "n" not in doc and pencil_from_json(doc) == p

    @pytest.mark.parametrize("doc", ["[]", '{"coeffs": []}', '{"n": 2, "coeffs": [[["1"]]]}', '{"n": 1, "coeffs": [[["z"]]]}'])
    def test_pencil_rejects(self, doc):
        with pytest.raises(PencilFormatError):
            pencil_from_json(doc)

    def test_symbolic_round_trip(self):
        M = SymbolicMatrix([["1", "x1"], ["x2", "x3 + x1*x2"]])
        assert symbolic_from_json(symbolic_to_json(M)) == M
