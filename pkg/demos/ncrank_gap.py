"""Non-commutative rank versus commutative rank.

The skew-symmetric 3x3 pencil has determinant zero over any field (odd
skew-symmetric), so its commutative rank is 2, yet it is invertible over the
free skew field. Taking r block copies widens the gap to 3r against 2r.
"""

from opscaling.exact_linalg import RationalMatrix
from opscaling.ncrank import ncrank_classical, ncrank_quantum
from opscaling.symbolic import LinearMatrixPencil

A0 = RationalMatrix([[0, 0, 0], [0, 0, 1], [0, -1, 0]])
Ax = RationalMatrix([[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
Ay = RationalMatrix([[0, 0, 1], [0, 0, 0], [-1, 0, 0]])

for r in (1, 2, 3):
    blocks = [RationalMatrix.direct_sum(*[m] * r) for m in (A0, Ax, Ay)]
    pencil = LinearMatrixPencil(blocks[1:], ["x1", "x2"], blocks[0])
    quantum = ncrank_quantum(pencil)
    classical = ncrank_classical(pencil)
    print(
        f"r={r}: size {pencil.n}, nc-rank {quantum.ncrank} (classical {classical.ncrank}),"
        f" commutative rank estimate {quantum.commutative_rank_estimate}"
    )
