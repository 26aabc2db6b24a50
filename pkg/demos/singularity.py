"""Deciding non-commutative singularity by operator scaling.

A square matrix of linear forms L = x1*A1 + ... + xm*Am is full (invertible
over the free skew field) exactly when the completely positive map with
Kraus operators A1..Am is rank non-decreasing. Alternating left and right
normalization drives a full operator towards doubly stochastic; a
rank-decreasing one never gets there.
"""

from opscaling.cp_operator import CPOperator, ds
from opscaling.exact_linalg import RationalMatrix
from opscaling.scaling_core import ScalingConfig, iteration_bound, run_fullness_test

# the 3x3 skew-symmetric pencil [[0, x, y], [-x, 0, 1], [-y, -1, 0]] written as Kraus matrices
A0 = RationalMatrix([[0, 0, 0], [0, 0, 1], [0, -1, 0]])
Ax = RationalMatrix([[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
Ay = RationalMatrix([[0, 0, 1], [0, 0, 0], [-1, 0, 0]])
skew = CPOperator([A0, Ax, Ay])

print("distance from doubly stochastic before scaling:", ds(skew).ds_value)
print("worst-case step budget:", iteration_bound(skew.n, skew.m, skew.max_entry))

run = run_fullness_test(skew)
print(f"verdict {run.verdict} after {run.iterations} steps ({run.mode})")
for j, eps in zip(run.steps, run.eps_trace):
    print(f"  step {j}: eps = {float(eps):.3e}")

# here every Kraus matrix sends span(e1, e2) into span(e1), so the operator
# shrinks a 2-dimensional subspace and cannot be scaled
E = lambda i, j: RationalMatrix.unit(3, i, j)  # noqa: E731
shrunk = CPOperator([E(0, 0) + E(1, 2), E(0, 1) + E(2, 2), E(0, 2)])
run = run_fullness_test(shrunk)
print(f"shrunk template: verdict {run.verdict} ({run.reason}) at step {run.iterations}")

# the float engine gives the same verdicts, much faster on large inputs
for T in (skew, shrunk):
    print("float64:", run_fullness_test(T, ScalingConfig(mode="float")).verdict)
