"""The commutative special case: bipartite matching and Sinkhorn scaling.

A pencil whose coefficients are single matrix units E_ij is full exactly when
the bipartite graph of its entries has a perfect matching. For nonnegative
matrices, alternating row and column normalization (Sinkhorn) decides
whether the permanent is positive.
"""

from opscaling.exact_linalg import RationalMatrix
from opscaling.matrix_scaling import NonnegMatrix, permanent_positive, sinkhorn_scale
from opscaling.ncrank import fullness
from opscaling.oracles import BipartiteGraph, brute_force_permanent, perfect_matching_exists
from opscaling.symbolic import LinearMatrixPencil

patterns = {
    "cycle": [(0, 1), (1, 2), (2, 0)],
    "two rows share one column": [(0, 0), (1, 0), (2, 1), (2, 2)],
}
for label, edges in patterns.items():
    pencil = LinearMatrixPencil(
        [RationalMatrix.unit(3, i, j) for i, j in edges], [f"x{k + 1}" for k in range(len(edges))]
    )
    graph = BipartiteGraph(3, [(i + 1, j + 1) for i, j in edges])
    print(f"{label}: full {fullness(pencil)}, perfect matching {perfect_matching_exists(graph)}")

rows = [[1, 1, 0], [0, 1, 1], [1, 0, 1]]
A = NonnegMatrix(rows)
print("permanent", brute_force_permanent(rows), "positive by Sinkhorn:", permanent_positive(A))
scaled, trace = sinkhorn_scale(A, 10, exact=False)
print("after scaling:\n", scaled)
print("distance from doubly stochastic per step:", trace[:4])
