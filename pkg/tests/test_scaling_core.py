import io
import json
import math
import random
from fractions import Fraction

import numpy as np
import pytest

from conftest import conjugated, skew3_kraus, random_invertible, random_operator, shrunk_template, unit
from opscaling.cp_operator import CPOperator, apply, dual_apply
from opscaling.exact_linalg import NumericMode, RationalMatrix, det, invert
from opscaling.oracles import blowup_singularity_oracle, brute_force_capacity
from opscaling.scaling_core import (
    PrecisionExhausted,
    ScalingConfig,
    approx_capacity,
    capacity_bracket_from_fixed_point,
    capacity_lower_bound,
    eps_sequence,
    iteration_bound,
    run_fullness_test,
    scaling_sequence,
    square_capacity_lower_bound,
    truncation_bits,
    write_trace,
)

FLOAT = ScalingConfig(mode="float")


def alpha(T: CPOperator) -> int:
    return (T.max_entry**2 * T.n**2 * T.m) ** (T.n - 1)


def decision_corpus(seed: int, count: int):
    """Mix of random (mostly full) and conjugated shrunk (rank-decreasing) operators."""
    rng = random.Random(seed)
    out = []
    for k in range(count):
        if k % 3 == 2:
            out.append(conjugated(shrunk_template(), random_invertible(rng, 3), random_invertible(rng, 3)))
        else:
            n = rng.randint(2, 3)
            out.append(random_operator(rng, n, rng.randint(1, 3), -2, 2))
    return out


class TestBounds:
    def test_iteration_bound(self):
        assert iteration_bound(2, 2, 1) == 2 + math.ceil(576 * math.log(4)) == 801
        assert iteration_bound(1, 1, 1) == 2
        assert iteration_bound(3, 2, 5) > iteration_bound(2, 2, 5)

    def test_truncation_bits(self):
        assert truncation_bits(1, 1, 1) == 64
        assert truncation_bits(2, 2, 1, 801) == math.ceil(10 * 801**2 * math.log2(16)) + 64 == 25_664_104

    def test_truncation_bits_monotone(self):
        base = truncation_bits(2, 2, 2, 100)
        assert truncation_bits(3, 2, 2, 100) >= base
        assert truncation_bits(2, 3, 2, 100) >= base
        assert truncation_bits(2, 2, 3, 100) >= base
        assert truncation_bits(2, 2, 2, 101) >= base

    def test_capacity_lower_bound(self):
        assert capacity_lower_bound(2, 2, 1) == Fraction(1, 4**8)
        assert float(capacity_lower_bound(2, 2, 1)) == pytest.approx(1.526e-5, rel=1e-3)
        assert capacity_lower_bound(1, 1, 1) == 1
        assert square_capacity_lower_bound(3) == Fraction(1, 729)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [{"truncation_bits": 32}, {"ds_threshold": 0}, {"epsilon": 0.7}, {"max_iterations": 0}, {"mode": "float", "idealized": True}],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            ScalingConfig(**kwargs)

    def test_parses_mode_string(self):
        assert ScalingConfig(mode="exact-capped:128").mode == NumericMode("exact-capped", 128)


class TestFullness:
    def test_identity(self):
        run = run_fullness_test(CPOperator([RationalMatrix.identity(3)]))
        assert run.full and run.first_hit == 1 and run.eps_trace[0] == 0

    def test_unit_pair_singular_at_step_one(self):
        run = run_fullness_test(CPOperator([unit(2, 1, 1), unit(2, 1, 2)]))
        assert not run.full and run.reason == "T(I) or T*(I) singular"

    @pytest.mark.parametrize("mode", ["exact-capped:256", "exact", "float"])
    def test_skew_symmetric_example_is_full(self, mode):
        assert run_fullness_test(CPOperator(skew3_kraus()), ScalingConfig(mode=mode)).full

    @pytest.mark.parametrize("mode", ["exact-capped:256", "float"])
    def test_shrunk_template_is_rank_decreasing(self, mode):
        assert not run_fullness_test(shrunk_template(), ScalingConfig(mode=mode)).full

    def test_without_early_exit_runs_to_bound(self):
        cfg = ScalingConfig(mode="float", early_exit=False, max_iterations=300)
        run = run_fullness_test(shrunk_template(), cfg)
        assert not run.full and run.reason == "iteration bound reached"
        assert run.min_eps > Fraction(1, 18)

    def test_capped_precision_exhaustion(self):
        cfg = ScalingConfig(mode=NumericMode("exact-capped", 64), early_exit=False, max_iterations=5000)
        with pytest.raises(PrecisionExhausted) as info:
            run_fullness_test(shrunk_template(), cfg)
        assert info.value.step is not None

    def test_scalar_cases(self):
        assert run_fullness_test(CPOperator([[[3]], [[0]]])).full
        assert not run_fullness_test(CPOperator([[[0]]])).full

    def test_modes_agree(self):
        for T in decision_corpus(21, 24):
            verdicts = {run_fullness_test(T, ScalingConfig(mode=m)).full for m in ["exact-capped:256", "float"]}
            assert len(verdicts) == 1

    def test_decision_soundness(self):
        for T in decision_corpus(5, 30):
            run = run_fullness_test(T)
            oracle = blowup_singularity_oracle(list(T.kraus), dim=T.n - 1)
            if run.full:
                assert not oracle.singular
            else:
                assert all(d == 0 for d in oracle.dets)


class TestSequence:
    def test_recursion_is_exact(self):
        T = random_operator(random.Random(1), 2, 2)
        seq = scaling_sequence(T, 6)
        assert seq[1] == dual_apply(T, RationalMatrix.identity(2))
        for j in range(1, 7):
            prev = invert(seq[j])
            step = apply(T, prev) if j % 2 else dual_apply(T, prev)
            assert seq[j + 1] == step

    def test_eps_is_one_sided_ds_of_normalized_operator(self):
        T = random_operator(random.Random(2), 2, 3)
        seq = scaling_sequence(T, 5)
        eps = eps_sequence(seq)
        A = T.to_numpy()
        for j in range(1, 6):
            S_prev = seq[j].to_numpy()  # S_{j-1}
            S_prev2 = seq[j - 1].to_numpy()  # S_{j-2}
            Cr = np.linalg.cholesky(np.linalg.inv(S_prev))
            Cl = np.linalg.cholesky(S_prev2)
            if j % 2:
                K = [np.linalg.solve(Cl, a) @ Cr for a in A]
                side = sum(k @ k.T for k in K)
            else:
                K = [np.linalg.solve(Cl, a.T) @ Cr for a in A]
                side = sum(k @ k.T for k in K)
            Dm = side - np.eye(2)
            assert float(eps[j - 1]) == pytest.approx(float(np.sum(Dm * Dm)), rel=1e-8, abs=1e-12)

    def test_telescoping(self):
        for seed in range(5):
            T = random_operator(random.Random(seed), 2, 2)
            seq = scaling_sequence(T, 8)
            dets = {j - 1: det(S) for j, S in enumerate(seq)}  # index by j: seq[0] is S_{-1}
            dets[-2] = Fraction(1)
            for r in range(1, 8):
                prod = Fraction(1)
                for j in range(1, r + 1):
                    prod *= dets[j - 3] / dets[j - 1]
                assert dets[r - 2] * dets[r - 1] * prod == 1

    def test_eigenvalue_envelope(self):
        rng = random.Random(3)
        for _ in range(6):
            T = random_operator(rng, 2, rng.randint(1, 3), -2, 2)
            try:
                seq = scaling_sequence(T, 10)
            except PrecisionExhausted:
                continue
            a = alpha(T)
            for j, S in enumerate(seq[1:]):
                ev = np.linalg.eigvalsh(S.to_numpy())
                assert ev.min() >= a ** -(j + 1) / 2
                assert ev.max() <= 2 * a ** (j + 1)

    def test_truncation_drift(self):
        rng = random.Random(4)
        checked = 0
        for _ in range(10):
            T = random_operator(rng, 2, 2, -2, 2)
            exact = scaling_sequence(T, 6)
            try:
                coarse = scaling_sequence(T, 6, bits=8)
            except PrecisionExhausted:
                continue
            a, delta = alpha(T), Fraction(1, 2**8)
            for j in range(len(exact)):
                drift = (exact[j] - coarse[j]).max_abs()
                jj = max(j - 1, 0)
                assert drift <= (2 * a) ** ((2 * jj + 1) * (jj + 1)) * delta
            checked += 1
        assert checked > 0

    def test_potential_never_increases(self):
        # Det S_j / Det S_{j-2} is det of the normalized operator's free side, at most 1
        for seed in range(5):
            seq = scaling_sequence(random_operator(random.Random(seed), 3, 2), 8)
            dets = [det(S) for S in seq]
            for k in range(2, len(dets)):
                assert dets[k] <= dets[k - 2]

    def test_bits_validation(self):
        with pytest.raises(ValueError):
            scaling_sequence(CPOperator([RationalMatrix.identity(2)]), 2, bits=0)


class TestProgress:
    def test_progress_bound_on_float_runs(self):
        seen = 0
        for T in decision_corpus(8, 30) + [CPOperator(skew3_kraus())]:
            run = run_fullness_test(T, FLOAT)
            for gap, d in run.progress:
                assert d <= 1 + 1e-9
                if gap <= 1:
                    assert d <= math.exp(-gap / 6) * (1 + 1e-9)
                    seen += 1
        assert seen > 0


class TestCapacity:
    def test_identity_exact(self):
        val, run = approx_capacity(CPOperator([RationalMatrix.identity(3)]), 0.1, ScalingConfig(mode="exact"))
        assert val == 1 and run.first_hit == 0

    def test_identity_float(self):
        val, run = approx_capacity(CPOperator([RationalMatrix.identity(3)]), 0.1)
        assert val == 1.0 and run.bracket == (1.0, 1.0)

    def test_scalar(self):
        val, _ = approx_capacity(CPOperator([[[2]], [[3]]]), 0.1, ScalingConfig(mode="exact"))
        assert val == 13

    @pytest.mark.parametrize("mode", ["float", "exact-capped:256"])
    def test_diagonal_pair(self, mode):
        T = CPOperator([unit(2, 1, 1), unit(2, 2, 2)])
        val, _ = approx_capacity(T, 0.1, ScalingConfig(mode=mode))
        assert abs(float(val) - 1) <= 0.1

    def test_rank_decreasing_gives_zero(self):
        val, _ = approx_capacity(CPOperator([unit(2, 1, 1), unit(2, 1, 2)]), 0.1)
        assert val == 0

    def test_against_oracle_and_bracket(self):
        rng = random.Random(6)
        for _ in range(8):
            T = random_operator(rng, 2, rng.randint(2, 3), -3, 3)
            if not run_fullness_test(T).full:
                continue
            val, run = approx_capacity(T, 0.1)
            ref = brute_force_capacity(T)
            assert abs(val - ref) <= 0.1 * ref
            lo, hi = run.bracket
            assert lo <= ref * (1 + 1e-6) and ref <= hi * (1 + 1e-6)

    def test_rational_input_is_rescaled(self):
        T = CPOperator([[[Fraction(1, 2), 0], [0, Fraction(1, 3)]]])
        val, _ = approx_capacity(T, 0.1, ScalingConfig(mode="exact"))
        assert abs(float(val) - 1 / 36) <= 0.1 / 36

    def test_scaling_law(self):
        rng = random.Random(7)
        for _ in range(4):
            T = random_operator(rng, 2, 2, -3, 3)
            base = brute_force_capacity(T)
            if base < 1e-6:
                continue
            B, C = random_invertible(rng, 2), random_invertible(rng, 2)
            ratio = brute_force_capacity(conjugated(T, B, C)) / base
            law = float(det(B) ** 2 * det(C) ** 2)
            assert abs(ratio - law) <= 1e-3 * law

    def test_eps_validation(self):
        with pytest.raises(ValueError):
            approx_capacity(CPOperator([RationalMatrix.identity(2)]), 0.0)


class TestBracket:
    def test_identity(self):
        res = capacity_bracket_from_fixed_point(CPOperator([RationalMatrix.identity(3)]), RationalMatrix.identity(3))
        assert res.accepted and res.eps == 0 and (res.lower, res.upper) == (1, 1)

    def test_scalar(self):
        res = capacity_bracket_from_fixed_point(CPOperator([[[2]]]), RationalMatrix([[1]]))
        assert res.eps == 0 and (res.lower, res.upper) == (4, 4)

    def test_diagonal_pair(self):
        T = CPOperator([unit(2, 1, 1), unit(2, 2, 2)])
        res = capacity_bracket_from_fixed_point(T, RationalMatrix.identity(2))
        assert (res.lower, res.upper) == (1, 1)
        assert brute_force_capacity(T) == pytest.approx(1, abs=1e-9)

    def test_exact_fixed_point_of_diagonal_operator(self):
        res = capacity_bracket_from_fixed_point(CPOperator([RationalMatrix.diag([1, 5])]), RationalMatrix.identity(2))
        assert res.accepted and res.eps == 0 and res.upper == 25

    def test_rejects_singular_image(self):
        T = CPOperator([unit(2, 1, 1), unit(2, 1, 2)])
        res = capacity_bracket_from_fixed_point(T, RationalMatrix.identity(2))
        assert not res.accepted and "singular" in res.reason

    def test_rejects_far_point(self):
        T = CPOperator([RationalMatrix.identity(2)])
        res = capacity_bracket_from_fixed_point(T, RationalMatrix.diag([1, 9]))
        assert res.accepted
        T = CPOperator([unit(2, 1, 1), unit(2, 1, 2), unit(2, 2, 2)])
        res = capacity_bracket_from_fixed_point(T, RationalMatrix.identity(2))
        assert not res.accepted and res.eps == Fraction(1, 2)

    def test_non_pd(self):
        with pytest.raises(ValueError):
            capacity_bracket_from_fixed_point(CPOperator([RationalMatrix.identity(2)]), RationalMatrix.diag([1, -1]))


def test_trace_export():
    run = run_fullness_test(CPOperator(skew3_kraus()))
    buf = io.StringIO()
    write_trace(run, buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == run.iterations
    recs = [json.loads(line) for line in lines]
    assert [r["j"] for r in recs] == run.steps
    assert all(set(r) == {"j", "eps_j", "log_det_accumulator"} for r in recs)
    assert Fraction(recs[-1]["eps_j"]) <= Fraction(1, 18)
