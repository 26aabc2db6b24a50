"""Command-line interface: ``opscaling <subcommand> [options]``.

Subcommands::

    singular <operator.json>                  fullness verdict of an operator
    ncrank <pencil.json|symbolic.json>        non-commutative rank
    capacity <operator.json> --eps E          capacity within a factor 1 +- E
    scale <operator.json> --iters T --trace F run T scaling steps, write a trace
    matscale <matrix.json>                    permanent positivity via Sinkhorn
    rit --formula "<expr>"                    rational identity test

Exit codes: 0 and 1 encode the verdict (0 = full / positive / identity
holds), 2 means the input could not be parsed or failed its schema, 3 means
the truncated iterates ran out of precision.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction
from importlib import resources

import jsonschema

from .cp_operator import CPOperator, OperatorFormatError, operator_from_json
from .exact_linalg import NumericMode, format_rational
from .matrix_scaling import NonTrivialityError, matrix_from_json, permanent_positive
from .ncrank import DEFAULT_DECISION_MODE, fullness_run, ncrank
from .oracles import (
    BipartiteGraph,
    blowup_singularity_oracle,
    brute_force_capacity,
    brute_force_permanent,
    perfect_matching_exists,
)
from .scaling_core import (
    PrecisionExhausted,
    ScalingConfig,
    approx_capacity,
    run_fullness_test,
    write_trace,
)
from .symbolic.formula import FormulaSyntaxError, parse_formula
from .symbolic.matrix import SymbolicMatrix, higman_linearize, symbolic_from_json
from .symbolic.pencil import LinearMatrixPencil, PencilFormatError, pencil_from_json
from .symbolic.rit import EmptyDomainError, evaluation_verdict, rit_test

__all__ = ["main", "build_parser", "load_schema", "EXIT_OK", "EXIT_NEGATIVE", "EXIT_INPUT", "EXIT_PRECISION"]

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2
EXIT_PRECISION = 3

# oracles are exponential or cubic in n; beyond these sizes --verify reports "skipped"
BLOWUP_MAX_N = 8
CAPACITY_ORACLE_MAX_N = 4
PERMANENT_ORACLE_MAX_N = 8


class InputError(Exception):
    """Unreadable, malformed or schema-invalid input (exit code 2)."""


def load_schema(name: str) -> dict:
    """Shipped JSON schema ``<name>.schema.json``."""
    text = resources.files("opscaling").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _validate(doc, schema: str):
    try:
        jsonschema.validate(doc, load_schema(schema))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"{schema} schema violation at {where}: {exc.message}") from None


def _read_json(path: str) -> tuple[object, bytes]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(raw), raw
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _digest(raw: bytes) -> str:
    return "sha256:" + hashlib.sha256(raw).hexdigest()


def _load_operator(path: str) -> tuple[CPOperator, bytes]:
    doc, raw = _read_json(path)
    _validate(doc, "operator")
    try:
        return operator_from_json(doc), raw
    except OperatorFormatError as exc:
        raise InputError(str(exc)) from None


def _mode(args, default: NumericMode) -> tuple[NumericMode, bool]:
    """The requested mode and whether it was given explicitly."""
    if args.mode is None:
        return default, False
    try:
        return NumericMode.parse(args.mode), True
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _report(args, digest: str, verdict: str, value, iterations, mode, details, verify=None) -> dict:
    return {
        "command": list(args.argv),
        "input_digest": digest,
        "verdict": verdict,
        "value": value,
        "iterations": iterations,
        "mode": str(mode),
        "wall_time": None,
        "verify": verify,
        "details": details,
    }


def _skipped(oracle: str, why: str) -> dict:
    return {"oracle": oracle, "verdict": f"skipped ({why})", "agree": None}


def _number(x):
    """JSON-friendly number: ints stay ints, Fractions become floats."""
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else float(x)
    return x


# ---------------------------------------------------------------------------
# subcommands; each returns (report, text lines, exit code)


def _edge_pattern(T: CPOperator):
    """Edges (1-based) if every Kraus matrix is a single unit entry, else None."""
    edges = []
    for A in T.kraus:
        nz = [(i, j, A[i, j]) for i in range(A.rows) for j in range(A.cols) if A[i, j]]
        if len(nz) != 1 or nz[0][2] != 1:
            return None
        edges.append((nz[0][0] + 1, nz[0][1] + 1))
    return edges


def cmd_singular(args):
    T, raw = _load_operator(args.operator)
    mode, explicit = _mode(args, DEFAULT_DECISION_MODE)
    cfg = ScalingConfig(mode=mode)
    if explicit:
        run = run_fullness_test(T, cfg)
    else:
        p = LinearMatrixPencil(list(T.kraus))
        run = fullness_run(p, mode, escalate=True)
    full = run.full
    verify = None
    if args.verify:
        edges = _edge_pattern(T)
        if edges is not None:
            ok = perfect_matching_exists(BipartiteGraph(T.n, edges))
            verify = {"oracle": "perfect-matching", "verdict": "matching" if ok else "no matching", "agree": ok == full}
        elif T.n <= BLOWUP_MAX_N:
            res = blowup_singularity_oracle(list(T.kraus), seed=args.seed)
            verify = {"oracle": "blow-up", "verdict": res.verdict, "agree": res.singular != full}
        else:
            verify = _skipped("blow-up", f"n > {BLOWUP_MAX_N}")
    verdict = "full" if full else "singular"
    text = "FULL (rank non-decreasing)" if full else "SINGULAR (rank decreasing)"
    details = {"n": T.n, "m": T.m, "reason": run.reason, "first_hit": run.first_hit, "mode_used": run.mode}
    rep = _report(args, _digest(raw), verdict, None, run.iterations, mode, details, verify)
    return rep, [text, f"  {run.reason}; {run.iterations} iterations, {run.mode}"], EXIT_OK if full else EXIT_NEGATIVE


def _load_rank_input(path: str):
    doc, raw = _read_json(path)
    if isinstance(doc, dict) and "coeffs" in doc:
        _validate(doc, "pencil")
        try:
            return pencil_from_json(doc), raw
        except PencilFormatError as exc:
            raise InputError(str(exc)) from None
    _validate(doc, "symbolic")
    try:
        return symbolic_from_json(doc), raw
    except (FormulaSyntaxError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_ncrank(args):
    M, raw = _load_rank_input(args.input)
    mode, _ = _mode(args, DEFAULT_DECISION_MODE)
    try:
        rep = ncrank(M, method=args.method, mode=mode, seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    rows, cols = M.shape
    full = rep.ncrank == min(rows, cols)
    verify = None
    if args.verify:
        if rows != cols:
            verify = _skipped("blow-up", "rectangular input")
        else:
            if isinstance(M, SymbolicMatrix):
                L, _ = higman_linearize(M)
            else:
                L = M
            if L.n > BLOWUP_MAX_N:
                verify = _skipped("blow-up", f"n > {BLOWUP_MAX_N}")
            else:
                res = blowup_singularity_oracle(L, seed=args.seed)
                verify = {"oracle": "blow-up", "verdict": res.verdict, "agree": res.singular != (rep.ncrank == rows)}
    details = {"rows": rows, "cols": cols, "rank_report": rep.to_json()}
    iters = sum(int(s.get("iterations", 0)) for s in rep.subverdicts)
    report = _report(args, _digest(raw), f"ncrank={rep.ncrank}", rep.ncrank, iters, mode, details, verify)
    text = [
        f"NCRANK {rep.ncrank} of {min(rows, cols)} ({rep.method})",
        f"  commutative rank estimate {rep.commutative_rank_estimate} from {rep.trials} trials",
    ]
    return report, text, EXIT_OK if full else EXIT_NEGATIVE


def cmd_capacity(args):
    T, raw = _load_operator(args.operator)
    if args.certified and args.mode is not None:
        raise InputError("--certified and --mode are mutually exclusive")
    if args.certified:
        mode = NumericMode("exact-certified")
    else:
        mode, _ = _mode(args, NumericMode("float64"))
    if not 0 < args.eps <= 0.5:
        raise InputError("--eps must lie in (0, 1/2]")
    value, run = approx_capacity(T, args.eps, ScalingConfig(mode=mode))
    val = _number(value) if value is not None else 0.0
    details = {
        "n": T.n,
        "m": T.m,
        "eps": args.eps,
        "threshold": format_rational(run.threshold) if isinstance(run.threshold, Fraction) else run.threshold,
        "reason": run.reason,
        "first_hit": run.first_hit,
        "bracket": list(run.bracket) if run.bracket else None,
    }
    if isinstance(value, Fraction):
        details["value_exact"] = format_rational(value)
    verify = None
    if args.verify:
        if T.n > CAPACITY_ORACLE_MAX_N:
            verify = _skipped("brute-force-capacity", f"n > {CAPACITY_ORACLE_MAX_N}")
        else:
            ref = brute_force_capacity(T, seed=args.seed)
            agree = abs(float(val) - ref) <= 0.15 * max(ref, 1e-12) if ref > 1e-9 else float(val) <= 1e-9
            verify = {"oracle": "brute-force-capacity", "verdict": repr(ref), "agree": agree}
    positive = float(val) > 0
    report = _report(args, _digest(raw), "positive" if positive else "zero", val, run.iterations, mode, details, verify)
    text = [f"CAPACITY {float(val):.6g}"]
    if run.bracket:
        text.append(f"  bracket [{run.bracket[0]:.6g}, {run.bracket[1]:.6g}]")
    text.append(f"  {run.reason}; {run.iterations} iterations, {run.mode}")
    return report, text, EXIT_OK if positive else EXIT_NEGATIVE


def cmd_scale(args):
    T, raw = _load_operator(args.operator)
    mode, _ = _mode(args, DEFAULT_DECISION_MODE)
    if args.iters < 1:
        raise InputError("--iters must be >= 1")
    run = run_fullness_test(T, ScalingConfig(mode=mode, max_iterations=args.iters, early_exit=False))
    if args.trace:
        try:
            with open(args.trace, "w") as fh:
                write_trace(run, fh)
        except OSError as exc:
            raise InputError(f"cannot write {args.trace}: {exc.strerror}") from None
    hit = run.first_hit is not None
    min_eps = run.min_eps
    details = {
        "n": T.n,
        "m": T.m,
        "threshold": format_rational(run.threshold) if isinstance(run.threshold, Fraction) else run.threshold,
        "first_hit": run.first_hit,
        "min_eps": float(min_eps) if min_eps is not None else None,
        "trace": args.trace,
        "records": len(run.steps),
    }
    verdict = "threshold-reached" if hit else "threshold-not-reached"
    report = _report(args, _digest(raw), verdict, details["min_eps"], run.iterations, mode, details)
    text = [
        f"THRESHOLD REACHED at step {run.first_hit}" if hit else f"THRESHOLD NOT REACHED in {args.iters} steps",
        f"  min eps {details['min_eps']}; {len(run.steps)} trace records",
    ]
    return report, text, EXIT_OK if hit else EXIT_NEGATIVE


def cmd_matscale(args):
    doc, raw = _read_json(args.matrix)
    _validate(doc, "matrix")
    try:
        A = matrix_from_json(doc)
    except (ValueError, NonTrivialityError) as exc:
        raise InputError(str(exc)) from None
    mode, _ = _mode(args, NumericMode("float64"))
    positive = permanent_positive(A, exact=mode.is_exact)
    verify = None
    if args.verify:
        if A.n <= PERMANENT_ORACLE_MAX_N:
            per = brute_force_permanent(A)
            verify = {"oracle": "brute-force-permanent", "verdict": format_rational(per), "agree": (per > 0) == positive}
        else:
            ok = perfect_matching_exists(BipartiteGraph(A.n, [(i + 1, j + 1) for i, j in A.support()]))
            verify = {"oracle": "perfect-matching", "verdict": "matching" if ok else "no matching", "agree": ok == positive}
    report = _report(args, _digest(raw), "positive" if positive else "zero", None, None, mode, {"n": A.n}, verify)
    text = ["PERMANENT POSITIVE" if positive else "PERMANENT ZERO"]
    return report, text, EXIT_OK if positive else EXIT_NEGATIVE


def cmd_rit(args):
    raw = args.formula.encode()
    try:
        f = parse_formula(args.formula)
    except FormulaSyntaxError as exc:
        raise InputError(f"formula syntax error: {exc}") from None
    mode, _ = _mode(args, DEFAULT_DECISION_MODE)
    try:
        res = rit_test(f, mode)
    except EmptyDomainError as exc:
        raise InputError(f"formula has empty domain: {exc}") from None
    verify = None
    if args.verify:
        ev = evaluation_verdict(f, seed=args.seed)
        verify = {"oracle": "matrix-evaluation", "verdict": ev, "agree": ev == res.verdict}
    details = {"formula_size": res.formula_size, "pencil_dim": res.pencil_dim}
    report = _report(args, _digest(raw), res.verdict, None, None, mode, details, verify)
    return report, ["ZERO" if res.is_zero else "NONZERO"], EXIT_OK if res.is_zero else EXIT_NEGATIVE


# ---------------------------------------------------------------------------
# parser and entry point


def _global_flags(parser: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--mode", default=d, help="exact | exact-capped:<bits> | float")
    parser.add_argument("--json", action="store_true", default=d if suppress else False, help="print a JSON report")
    parser.add_argument(
        "--verify", action="store_true", default=d if suppress else False, help="cross-check with an oracle"
    )
    parser.add_argument("--seed", type=int, default=d if suppress else 0, help="seed for randomized steps")
    parser.add_argument(
        "--timing", action="store_true", default=d if suppress else False,
        help="record wall time (reports are then no longer byte-identical)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opscaling", description="Operator scaling toolkit.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("singular", cmd_singular, "fullness verdict of an operator")
    p.add_argument("operator")
    p = add("ncrank", cmd_ncrank, "non-commutative rank of a pencil or symbolic matrix")
    p.add_argument("input")
    p.add_argument("--method", choices=["quantum", "classical"], default="quantum")
    p = add("capacity", cmd_capacity, "capacity within a factor 1 +- eps")
    p.add_argument("operator")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--certified", action="store_true", help="exact arithmetic with the certified bit budget")
    p = add("scale", cmd_scale, "run scaling steps and write a JSON-lines trace")
    p.add_argument("operator")
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--trace")
    p = add("matscale", cmd_matscale, "permanent positivity of a nonnegative matrix")
    p.add_argument("matrix")
    p = add("rit", cmd_rit, "rational identity test of a formula")
    p.add_argument("--formula", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    args.argv = argv
    start = time.perf_counter()
    try:
        report, text, code = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PrecisionExhausted as exc:
        print(f"error: precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    if args.timing:
        report["wall_time"] = round(time.perf_counter() - start, 6)
    if args.json:
        print(json.dumps(report, sort_keys=True, indent=2))
    else:
        print("\n".join(text))
        if report["verify"] is not None:
            v = report["verify"]
            agree = {True: "agrees", False: "DISAGREES", None: "n/a"}[v["agree"]]
            print(f"  verify: {v['oracle']} says {v['verdict']} ({agree})")
        if args.timing:
            print(f"  wall time {report['wall_time']:.3f} s")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
