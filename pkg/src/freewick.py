#!/usr/bin/env python3
"""
Command-line driver: exact moments, configuration counts, Wick decomposition checks,
permuted-product norm bounds, Monte Carlo norms and strong-convergence experiments.
Reports go to stdout (table, json or csv); logs go to stderr.

Exit codes: 0 pass, 1 failed assertion (JSON witness on stdout), 2 usage error.
"""

import argparse
import json
import logging
import re
import sys
from datetime import datetime
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import linalg

from src.bounds import (
    MAX_EVAL_DIM,
    PermutationSpec,
    coefficient_recovery,
    evaluate_on_free_system,
    recovery_constant,
    masterineq_check,
    masterineq_lhs,
    masterineq_lp,
    masterineq_lp_bruteforce,
)
from src.combin import CONFIG_N_CAP, catalan, configuration_to_json, enumerate_configurations, extremal_configuration, verify_bounds
from src.errors import BoundViolation, ConsistencyError, FreewickError
from src.fock import CovarianceSpec, build_basis
from src.ncalg import (
    Alphabet,
    CoeffAlgebra,
    NcPoly,
    Word,
    format_poly,
    infer_alphabet,
    parse_poly,
    poly_from_json,
    poly_pow,
    poly_to_json,
    random_poly,
)
from src.report import FORMATS, emit, render
from src.rmt import (
    MOMENT_FIELDS,
    RngSpec,
    expansion_coefficients,
    gue_exact_mixed_moment,
    harer_zagier_polynomials,
    lp_growth_fit,
    lp_norm_trend,
    mc_moment,
    strong_convergence_experiment,
    tail_check,
)
from src.wick import edgtn_report, free_trace, hkz_route, random_psd_covariance

logger = logging.getLogger("src.freewick")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class AssertionFailed(Exception):
    """A check ran to completion and failed; carries the report as witness."""

    def __init__(self, message: str, report: dict):
        super().__init__(message)
        self.report = report


def _ts():
    return f"[{datetime.now().strftime('%H:%M:%S')}] "


def _configure_logging(quiet: bool, verbose: bool) -> None:
    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="[%(asctime)s] %(name)s: %(message)s",
        datefmt="%H:%M:%S",
        stream=sys.stderr,
        force=True,
    )


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def split_top_level(text: str) -> list[str]:
    """Split on commas that are not inside parentheses or brackets."""
    parts, depth, start = [], 0, 0
    for pos, ch in enumerate(text):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:pos])
            start = pos + 1
    parts.append(text[start:])
    return [p.strip() for p in parts if p.strip()]


def parse_monomial(text: str) -> Word:
    """A DSL monomial with coefficient 1, e.g. X1X2 or X1*X2^2; "1" is the empty word."""
    P = parse_poly(text)
    if len(P) != 1:
        raise ValueError(f"{text!r} is not a single monomial")
    (w, a), = P.items()
    if a[0, 0] != 1:
        raise ValueError(f"{text!r} must have coefficient 1")
    w.x_indices()
    return w


def parse_matrix(text: str, c: float | None = None) -> np.ndarray:
    """diag(a,b,...) or a JSON matrix; a bare symbol c is replaced by the given value."""
    if c is not None:
        text = re.sub(r"(?<![A-Za-z0-9_.])c(?![A-Za-z0-9_])", repr(float(c)), text)
    m = re.fullmatch(r"\s*diag\((.*)\)\s*", text)
    try:
        if m:
            return np.diag([complex(v.strip().replace("i", "j")) for v in m.group(1).split(",")])
        return np.array(json.loads(text), dtype=complex)
    except (ValueError, json.JSONDecodeError) as e:
        raise ValueError(f"Cannot read matrix {text!r}: {e}") from None


def _poly_arg(text: str | None, json_path: str | None) -> NcPoly:
    if json_path:
        raw = sys.stdin.read() if json_path == "-" else Path(json_path).read_text()
        return poly_from_json(json.loads(raw))
    if text is None:
        raise ValueError("Give a polynomial with --poly or --poly-json")
    return parse_poly(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _exact_sum(Pk: NcPoly, N: int):
    """Exact moment of a scalar polynomial: a Fraction when every coefficient is an integer."""
    total = Fraction(0)
    numeric = 0j
    integral = True
    for w, a in Pk.items():
        value = gue_exact_mixed_moment(w, N)
        c = complex(a[0, 0])
        numeric += c * float(value)
        if c.imag == 0 and c.real == int(c.real):
            total += int(c.real) * value
        else:
            integral = False
    return total if integral else numeric


def cmd_moments(args) -> dict:
    P = parse_poly(args.word)
    if P.uses_deterministic() or not P.algebra.is_scalar:
        raise ValueError("moments takes scalar polynomials in X generators")
    Pk = poly_pow(P, args.k)
    p_max = int(max(Pk.degree, 0)) // 4 if args.p_max is None else args.p_max
    coeffs = [0j] * (p_max + 1)
    for w, a in Pk.items():
        for p, c in enumerate(expansion_coefficients(w, p_max)):
            coeffs[p] += complex(a[0, 0]) * c
    report = {
        "poly": format_poly(P),
        "k": args.k,
        "free_trace": free_trace(Pk).real,
        "coefficients": [c.real if c.imag == 0 else c for c in coeffs],
        "rows": [],
    }
    failed = False
    for N in args.N or []:
        if args.mc:
            row = mc_moment(P, args.k, N, args.mc, args.seed, args.threads)
            record = row.as_record()
            record["exact"] = _plain_exact(_exact_sum(Pk, N))
            failed |= not row.within(args.nsigma)
        else:
            record = {f: None for f in MOMENT_FIELDS}
            record.update(key=f"({report['poly']})^{args.k}", N=N, k=args.k, exact=_plain_exact(_exact_sum(Pk, N)), free=report["free_trace"])
        report["rows"].append(record)
    if failed:
        raise AssertionFailed(f"Monte Carlo mean outside {args.nsigma} standard errors", report)
    return report


def _plain_exact(value):
    return str(value) if isinstance(value, Fraction) else value


def cmd_configs(args) -> dict:
    report = verify_bounds(args.n, cap=args.cap)
    if args.check_remark:
        K = extremal_configuration(args.n)
        report["extremal"] = configuration_to_json(K)["chords"]
        report["extremal_attains"] = K.c_K == 4 * args.n - 6
    if args.json:
        report["rows"] = [configuration_to_json(K) for K in enumerate_configurations(args.n, args.cap)]
    return report


def _wick_case(words: list[Word], kappa: CovarianceSpec, tol: float, hkz: bool, audit: bool) -> dict:
    rep = edgtn_report(words, kappa, tol)
    if hkz:
        rep["hkz"] = hkz_route(words, kappa)
        rep["pass"] = rep["pass"] and abs(rep["hkz"] - rep["lhs"]) <= tol
    if not audit:
        rep.pop("terms")
    return rep


def cmd_wick_verify(args) -> dict:
    if args.random:
        rows = []
        for t in range(args.trials):
            rng = RngSpec(args.seed, t).generator()
            kappa = random_psd_covariance(args.n, rng)
            words = [
                Word.semicircular(int(u) for u in rng.integers(1, args.d + 1, size=int(rng.integers(1, args.maxdeg + 1))))
                for _ in range(args.n)
            ]
            rows.append(_wick_case(words, kappa, args.tol, args.hkz, audit=False))
        report = {"trials": args.trials, "seed": args.seed, "pass": all(r["pass"] for r in rows), "rows": rows}
    else:
        if not args.words:
            raise ValueError("Give --words or --random")
        words = [parse_monomial(t) for t in split_top_level(args.words)]
        kappa = CovarianceSpec(parse_matrix(args.kappa, args.c).real) if args.kappa else CovarianceSpec.identity(len(words))
        report = _wick_case(words, kappa, args.tol, args.hkz, audit=True)
        report["rows"] = report.pop("terms")
    if not report["pass"]:
        raise AssertionFailed("Configuration sum differs from the trace", report)
    return report


def _masterineq_case(polys: list[NcPoly], sigma: PermutationSpec, depth: int | None, max_dim: int) -> dict:
    rep = masterineq_check(polys, sigma, depth, max_dim)
    log_opt, _ = masterineq_lp(rep["profiles"])
    brute = masterineq_lp_bruteforce(rep["profiles"])
    rep["lp_gap"] = 0.0 if log_opt == brute else abs(log_opt - brute)
    rep["pass"] = rep["pass"] and rep["lp_gap"] <= 1e-9
    return rep


def cmd_masterineq(args) -> dict:
    if args.random:
        rows = []
        for t in range(args.trials):
            rng = RngSpec(args.seed, t).generator()
            n = int(rng.integers(1, args.n + 1))
            alphabet, algebra = Alphabet(args.d), CoeffAlgebra(args.m)
            polys = [random_poly(alphabet, args.maxdeg, rng, algebra) for _ in range(n)]
            sigma = PermutationSpec(tuple(int(s) + 1 for s in rng.permutation(n)))
            rep = _masterineq_case(polys, sigma, args.depth, args.max_dim)
            rows.append({k: rep[k] for k in ("n", "sigma", "depth", "lhs", "rhs", "lp_gap", "pass")})
        report = {"trials": args.trials, "seed": args.seed, "pass": all(r["pass"] for r in rows), "rows": rows}
    else:
        texts = split_top_level(args.polys)
        alphabet = Alphabet(max(infer_alphabet(t).d for t in texts))
        polys = [parse_poly(t, alphabet) for t in texts]
        sigma = PermutationSpec.parse(args.sigma) if args.sigma else PermutationSpec.identity(len(polys))
        report = _masterineq_case(polys, sigma, args.depth, args.max_dim)
        report["polys"] = [format_poly(P) for P in polys]
    if not report["pass"]:
        raise AssertionFailed("Permuted product norm exceeds the derivative bound", report)
    return report


def cmd_mc(args) -> dict:
    P = parse_poly(args.poly)
    trend = lp_norm_trend(P, args.k, args.N, args.samples, args.seed, args.threads)
    rows = []
    for row, ratio in zip(trend["rows"], trend["ratios"]):
        rec = row.as_record()
        rec["ratio"] = ratio
        rows.append(rec)
    report = {"poly": format_poly(P), "k": args.k, "non_increasing": trend["non_increasing"], "rows": rows}
    if P.degree == 1 and len(P) == 1:
        fit = lp_growth_fit([(args.k, r["N"], r["mc_mean"]) for r in rows])
        report["c_fit"] = fit["c_fit"]
        report["c_max"] = fit["c_max"]
    if not report["non_increasing"]:
        raise AssertionFailed("Lp norm ratios increase in N", report)
    return report


def cmd_strongconv(args) -> dict:
    P = parse_poly(args.poly)
    ys = [parse_matrix(y) for y in args.Y or []]
    return strong_convergence_experiment(P, args.N, ys, args.k, args.samples, args.seed, args.threads)


def cmd_hz(args) -> dict:
    polys = harer_zagier_polynomials(args.k_max)
    rows = []
    for k, coeffs in enumerate(polys):
        if coeffs[0] != catalan(k):
            raise ConsistencyError(f"Leading coefficient {coeffs[0]} at k={k} is not Catalan({k})", {"k": k})
        row = {"k": k, "coefficients": [str(c) for c in coeffs], "catalan": catalan(k)}
        if args.N:
            value = sum((c / Fraction(args.N) ** (2 * g) for g, c in enumerate(coeffs)), Fraction(0))
            row["exact"] = str(value)
            row["value"] = float(value)
        rows.append(row)
    return {"k_max": args.k_max, "N": args.N, "rows": rows}


def cmd_tail(args) -> dict:
    report = tail_check(args.N, args.samples, args.seed, confidence=args.confidence, threads=args.threads)
    rows = []
    for r in report.pop("rows"):
        for t in r["tails"]:
            rows.append({"N": r["N"], "median": r["median"], **t})
    report["rows"] = rows
    if not report["decay_in_N"]:
        raise AssertionFailed("Exceedance frequencies do not decay in N", report)
    return report


def cmd_recover(args) -> dict:
    P = _poly_arg(args.poly, args.poly_json)
    if P.uses_deterministic():
        raise ValueError("recover takes polynomials in X generators")
    degree = int(max(P.degree, 0))
    d = P.alphabet.d
    basis = build_basis(d, max(degree, args.depth or 0))
    T = evaluate_on_free_system(P, basis)
    R = coefficient_recovery(T, degree, d, args.tol)
    norm, kept = masterineq_lhs([P], PermutationSpec.identity(1), max_dim=args.max_dim)
    top = max((float(linalg.norm(a, 2)) for _, a in R.items()), default=0.0)
    C = recovery_constant(degree, d)
    report = {
        "degree": degree,
        "d": d,
        "roundtrip": R.isclose(P, args.tol),
        "max_coeff_norm": top,
        "norm_lower": norm,
        "norm_depth": kept,
        "C_n": C,
        "bound_ok": top <= C * norm + args.tol,
        "recovered": poly_to_json(R),
    }
    report["pass"] = report["roundtrip"] and report["bound_ok"]
    if not report["pass"]:
        raise AssertionFailed("Coefficient recovery round trip failed", report)
    return report


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS, default="table", help="Report format (default table)")
    common.add_argument("--threads", type=int, default=None, metavar="N", help="Worker threads (default: cores; FREEWICK_THREADS overrides)")
    common.add_argument("-q", "--quiet", action="store_true", help="Only warnings on stderr")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="freewick", description="Free-probability and random-matrix toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", parents=[common], help="Exact GUE moments, genus coefficients and free trace")
    p.add_argument("--word", required=True, help="Word or polynomial in X generators, e.g. X1^4 or X1X2X1X2")
    p.add_argument("--k", type=int, default=1, help="Power of the polynomial (default 1)")
    p.add_argument("--N", type=_int_list, default=None, metavar="N[,N...]", help="Matrix sizes for exact values")
    p.add_argument("--mc", type=int, default=0, metavar="SAMPLES", help="Add Monte Carlo columns with SAMPLES draws (default off)")
    p.add_argument("--seed", type=int, default=0, help="Random seed (default 0)")
    p.add_argument("--p-max", type=int, default=None, help="Highest 1/N^2 power listed (default: maximal genus)")
    p.add_argument("--nsigma", type=float, default=4.0, help="Monte Carlo tolerance in standard errors (default 4)")
    p.set_defaults(func=cmd_moments, rows="rows", columns=MOMENT_FIELDS)

    p = sub.add_parser("configs", parents=[common], help="Enumerate configurations and check c_K and count bounds")
    p.add_argument("--n", type=int, required=True, help="Circle size, 2..7")
    p.add_argument("--check-remark", action="store_true", help="Also report the extremal fan configuration")
    p.add_argument("--json", action="store_true", help="Include every configuration in the report")
    p.add_argument("--cap", type=int, default=CONFIG_N_CAP, help=f"Largest admissible n (default {CONFIG_N_CAP})")
    p.set_defaults(func=cmd_configs, rows="rows", columns=None)

    p = sub.add_parser("wick-verify", parents=[common], help="Compare the trace with its configuration decomposition")
    p.add_argument("--words", default=None, help="Comma-separated monomials, one per family, e.g. X1X1,X1X1")
    p.add_argument("--kappa", default=None, help="JSON correlation matrix; the symbol c is replaced by --c")
    p.add_argument("--c", type=float, default=None, help="Value substituted for c in --kappa")
    p.add_argument("--random", action="store_true", help="Random words and correlation matrices")
    p.add_argument("--n", type=int, default=3, help="Families in random mode (default 3)")
    p.add_argument("--d", type=int, default=2, help="Slots in random mode (default 2)")
    p.add_argument("--maxdeg", type=int, default=3, help="Max word length in random mode (default 3)")
    p.add_argument("--trials", type=int, default=20, help="Random trials (default 20)")
    p.add_argument("--seed", type=int, default=0, help="Random seed (default 0)")
    p.add_argument("--tol", type=float, default=1e-8, help="Agreement tolerance (default 1e-8)")
    p.add_argument("--hkz", action="store_true", help="Also evaluate the derivative form")
    p.set_defaults(func=cmd_wick_verify, rows="rows", columns=None)

    p = sub.add_parser("masterineq", parents=[common], help="Permuted product norm against the derivative bound")
    p.add_argument("--polys", default=None, help='Comma-separated polynomials, e.g. "X1*X2,X2"')
    p.add_argument("--sigma", default=None, help="Permutation images, e.g. 2,1 (default identity)")
    p.add_argument("--depth", type=int, default=None, help="Kept Fock depth (default: deepest within --max-dim)")
    p.add_argument("--max-dim", type=int, default=MAX_EVAL_DIM, help=f"Evaluation dimension cap (default {MAX_EVAL_DIM})")
    p.add_argument("--random", action="store_true", help="Random polynomial tuples")
    p.add_argument("--n", type=int, default=3, help="Max tuple size in random mode (default 3)")
    p.add_argument("--d", type=int, default=2, help="Semicircular generators in random mode (default 2)")
    p.add_argument("--m", type=int, default=1, help="Coefficient matrix size in random mode (default 1)")
    p.add_argument("--maxdeg", type=int, default=3, help="Max degree in random mode (default 3)")
    p.add_argument("--trials", type=int, default=20, help="Random trials (default 20)")
    p.add_argument("--seed", type=int, default=0, help="Random seed (default 0)")
    p.set_defaults(func=cmd_masterineq, rows="rows", columns=None)

    p = sub.add_parser("mc", parents=[common], help="Monte Carlo L^{2k} norms across N")
    p.add_argument("--poly", required=True, help="Polynomial in X generators")
    p.add_argument("--N", type=_int_list, default=[64, 128, 256], metavar="N[,N...]", help="Matrix sizes (default 64,128,256)")
    p.add_argument("--k", type=int, default=2, help="Norm index: L^{2k} (default 2)")
    p.add_argument("--samples", type=int, default=1000, help="Draws per N (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="Random seed (default 0)")
    p.set_defaults(func=cmd_mc, rows="rows", columns=("key", "N", "k", "free", "mc_mean", "mc_stderr", "ratio", "samples", "seed"))

    p = sub.add_parser("strongconv", parents=[common], help="Random-matrix norms against the free-side norm")
    p.add_argument("--poly", required=True, help="Polynomial in X and Y generators, e.g. X1 + Y1")
    p.add_argument("--Y", action="append", default=None, help='Deterministic matrix, "diag(1,-1)" or JSON; repeat for Y2, Y3, ...')
    p.add_argument("--N", type=_int_list, default=[64, 128, 256], metavar="N[,N...]", help="Matrix sizes (default 64,128,256)")
    p.add_argument("--k", type=int, default=2, help="Norm index for the L^{2k} column (default 2)")
    p.add_argument("--samples", type=int, default=20, help="Draws per N (default 20)")
    p.add_argument("--seed", type=int, default=0, help="Random seed (default 0)")
    p.set_defaults(func=cmd_strongconv, rows="rows", columns=None)

    p = sub.add_parser("hz", parents=[common], help="Exact E[ts_N X^{2k}] from the three-term recursion")
    p.add_argument("--k-max", type=int, default=10, help="Largest k (default 10, at most 30)")
    p.add_argument("--N", type=int, default=None, help="Evaluate at this N")
    p.set_defaults(func=cmd_hz, rows="rows", columns=None)

    p = sub.add_parser("tail", parents=[common], help="Exceedance frequencies of the GUE norm")
    p.add_argument("--N", type=_int_list, default=[32, 64, 128], metavar="N[,N...]", help="Matrix sizes (default 32,64,128)")
    p.add_argument("--samples", type=int, default=1000, help="Draws per N (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="Random seed (default 0)")
    p.add_argument("--confidence", type=float, default=0.95, help="Wilson interval level (default 0.95)")
    p.set_defaults(func=cmd_tail, rows="rows", columns=None)

    p = sub.add_parser("recover", parents=[common], help="Read coefficients back off P(x) and check the norm bound")
    p.add_argument("--poly", default=None, help="Polynomial in X generators")
    p.add_argument("--poly-json", default=None, metavar="PATH", help="Polynomial JSON file (matrix coefficients); - for stdin")
    p.add_argument("--depth", type=int, default=None, help="Fock depth (default: the degree)")
    p.add_argument("--max-dim", type=int, default=MAX_EVAL_DIM, help=f"Norm evaluation cap (default {MAX_EVAL_DIM})")
    p.add_argument("--tol", type=float, default=1e-8, help="Recovery tolerance (default 1e-8)")
    p.set_defaults(func=cmd_recover, rows=None, columns=None)
    return parser


def _run(args) -> int:
    try:
        report = args.func(args)
    except AssertionFailed as e:
        print(_ts() + f"FAIL: {e}", file=sys.stderr)
        emit(render(e.report, "json"))
        return EXIT_FAIL
    except (BoundViolation, ConsistencyError) as e:
        print(_ts() + f"FAIL: {e}", file=sys.stderr)
        emit(render({"error": str(e), "witness": e.witness}, "json"))
        return EXIT_FAIL
    except (FreewickError, ValueError, OSError) as e:
        print(_ts() + f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logger.debug("%s finished", args.command)
    emit(render(report, args.format, args.rows, args.columns))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.quiet, args.verbose)
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
