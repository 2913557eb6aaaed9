"""Command-line front end.

Every subcommand prints one JSON document to stdout (``sort_keys``, so
identical inputs give identical bytes).  Exact numbers are emitted as
``{"exact": "p/q", "approx": float}``.

Exit codes: 0 ok, 1 runtime failure, 2 config or argument error, 3 type
Unknown, 4 type mismatch between the two systems, 5 verification failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from finitary_oe import __version__
from finitary_oe.config import ConfigError, load_system, parse_word
from finitary_oe.cylinder import CylinderError
from finitary_oe.exact import RationalParseError, dual, fmt, parse_rational
from finitary_oe.krieger import UNKNOWN, check_special, classify, example_1_6, special_measure
from finitary_oe.odometer import rn_derivative

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_UNKNOWN, EXIT_MISMATCH, EXIT_VERIFY = 0, 1, 2, 3, 4, 5


class UsageError(Exception):
    pass


def _emit(doc: dict, out: str | None = None) -> None:
    text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _rationals(text: str | None, what: str) -> list | None:
    if text is None:
        return None
    try:
        return [parse_rational(t.strip()) for t in text.split(",") if t.strip()]
    except RationalParseError as e:
        raise UsageError(f"--{what}: {e}") from None


def _system(path: str):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"{path}: {e.strerror}") from None
    try:
        return load_system(text)
    except ConfigError as e:
        raise UsageError(f"{path}: {e}") from None


# -- subcommands -------------------------------------------------------------------


_SUMMARY = {
    "TypeIIILambda": "III_lambda",
    "MeasurePreserving": "measure-preserving",
    "TypeIII1Candidate": "III_1 candidate",
    "Unknown": "unknown",
}


def cmd_classify(args) -> int:
    label = classify(_system(args.config))
    doc = label.to_json()
    doc["seed"] = args.seed
    doc["summary"] = _SUMMARY.get(label.kind, label.kind) + (f" lambda={fmt(label.lam)}" if label.lam is not None else "")
    _emit(doc, args.out)
    return EXIT_UNKNOWN if label.kind == UNKNOWN else EXIT_OK


def cmd_special_measure(args) -> int:
    sys_ = _system(args.config)
    etas = _rationals(args.etas, "etas") or [Fraction(1, 2 ** (i + 1)) for i in range(4)]
    tr = special_measure(sys_, etas)
    ok, bad = check_special(sys_.with_measure(tr.final_measure), tr.lam)
    doc = tr.to_json()
    doc["seed"] = args.seed
    doc["check_special"] = {"ok": ok, "violations": [[list(w), dual(q)] for w, q in bad]}
    _emit(doc, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_cocycle(args) -> int:
    sys_ = _system(args.config)
    try:
        w = parse_word(args.word)
    except ValueError as e:
        raise UsageError(str(e)) from None
    cv = rn_derivative(sys_, w, args.power)
    if args.out:
        _emit({"seed": args.seed, "word": list(cv.word), "image": list(cv.image), "power": cv.power, "ratio": dual(cv.ratio)}, args.out)
    print(fmt(cv.ratio))
    return EXIT_OK


def cmd_example_1_6(args) -> int:
    lam, alpha = parse_rational(args.lam), parse_rational(args.alpha)
    if args.even_levels:
        levels = [int(t) for t in args.even_levels.split(",")]
    else:
        levels = [n * n + 2 for n in range(1, args.depth // 2 + 1)]
    doc = example_1_6(lam, alpha, levels)
    doc["seed"] = args.seed
    _emit(doc, args.out)
    return EXIT_OK


def cmd_build_oe(args) -> int:
    from finitary_oe.equivalence.diagram import TypeMismatch, build_diagram
    from finitary_oe.equivalence.verify import dumps_artifact

    sa, sb = _system(args.config_a), _system(args.config_b)
    depth = args.depth if args.depth is not None else 4
    eps = _rationals(args.eps, "eps")
    tol = parse_rational(args.budget) if args.budget else Fraction(1, 4096)
    mode = {"lambda": "lambda", "iii1": "III1", None: None}[args.mode]
    try:
        oe = build_diagram(sa, sb, depth=depth, eps=eps, tol=tol, mode=mode)
    except TypeMismatch as e:
        print(f"refused: {e}", file=sys.stderr)
        return EXIT_MISMATCH
    art = oe.to_json()
    art["seed"] = args.seed
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(dumps_artifact(art))
    if depth == 0:
        print("warning: depth 0 gives an empty artifact", file=sys.stderr)
    b = art["budgets"]
    summary = {
        "seed": args.seed,
        "mode": art["mode"],
        "lambda": art["lambda"],
        "depth": depth,
        "atoms": len(art["atoms"]),
        "coverage": b["coverage"],
        "budget_total": b["total"],
        "discrepancy": b["discrepancy"],
        "ratio": b["ratio"],
        "coverage_bound": "coverage >= 1 - sum(2 eps_n) - defect",
        "preview_ok": all(c["triangle"] and c["diamond"] for c in oe.checks["castle"])
        and all(c["ok"] for c in oe.checks.get("a_n", [])),
        "artifact": args.out,
    }
    _emit(summary)
    return EXIT_OK


def cmd_verify_oe(args) -> int:
    from finitary_oe.equivalence.verify import load_artifact, verify_oe

    try:
        art = load_artifact(args.artifact)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"{args.artifact}: {e}") from None
    rep = verify_oe(art)
    doc = rep.to_json()
    doc["seed"] = art.get("seed")
    _emit(doc, args.out)
    return EXIT_OK if rep.ok else EXIT_VERIFY


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finitary-oe", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="recorded in every output (default 0)")
    common.add_argument("--out", metavar="FILE", help="write the JSON output here")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", parents=[common], help="Krieger type of one system")
    c.add_argument("config")
    c.set_defaults(func=cmd_classify)

    c = sub.add_parser("special-measure", parents=[common], help="staged lambda-special measure")
    c.add_argument("config")
    c.add_argument("--etas", help='comma list, e.g. "1/2,1/4,1/8,1/16" (default)')
    c.set_defaults(func=cmd_special_measure)

    c = sub.add_parser("cocycle", parents=[common], help="d(mu o T^n)/d mu on a cylinder")
    c.add_argument("config")
    c.add_argument("--word", required=True, help='letters joined by ".", e.g. 1.1.0')
    c.add_argument("--power", type=int, default=1)
    c.set_defaults(func=cmd_cocycle)

    c = sub.add_parser("example-1-6", parents=[common], help="the two-parameter counterexample")
    c.add_argument("--lam", default="1/2")
    c.add_argument("--alpha", default="1/3")
    c.add_argument("--depth", type=int, default=6, help="truncation depth (even); ignored with --even-levels")
    c.add_argument("--even-levels", help="explicit even-level sizes, e.g. 3,6,11")
    c.set_defaults(func=cmd_example_1_6)

    c = sub.add_parser("build-oe", parents=[common], help="build a finite-depth orbit equivalence")
    c.add_argument("config_a")
    c.add_argument("config_b")
    c.add_argument("--depth", type=int, default=None, help="number of levels (default 4)")
    c.add_argument("--eps", help="comma list of eps_n (default 2^-n-1)")
    c.add_argument("--budget", help="packing tolerance (default 1/4096)")
    c.add_argument("--mode", choices=["lambda", "iii1"], help="default: from the classification")
    c.set_defaults(func=cmd_build_oe)

    c = sub.add_parser("verify-oe", parents=[common], help="replay an artifact")
    c.add_argument("artifact")
    c.set_defaults(func=cmd_verify_oe)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, RationalParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CylinderError as e:
        print(f"failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
