"""Testing rational identities in non-commuting variables.

A formula with inverses is encoded as a pencil whose inverse carries the
formula's value in its top-right corner. Bordering that pencil turns "the
formula is zero" into "the bordered pencil is singular", which scaling
decides deterministically. Random matrix evaluation is the cross-check.
"""

from opscaling.symbolic import evaluation_verdict, formula_to_pencil, parse_formula, rit_test

hua = "x1 - inv(inv(x1) + inv(inv(x2) - x1)) - x1*x2*x1"
cases = {
    "Hua's identity": hua,
    "commutator": "x1*x2 - x2*x1",
    "inverse of a product": "inv(x1*x2) - inv(x2)*inv(x1)",
    "wrong order": "inv(x1*x2) - inv(x1)*inv(x2)",
}
for label, text in cases.items():
    f = parse_formula(text)
    result = rit_test(f)
    print(
        f"{label:22s} size {f.size:2d}, pencil {result.pencil_dim:2d}x{result.pencil_dim:<2d}"
        f" -> {result.verdict} (evaluation says {evaluation_verdict(f)})"
    )

print()
print(formula_to_pencil("x1 + x1*inv(x2)*x1").pretty())
