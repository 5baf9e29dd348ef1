"""Command-line front door: ``randbound verify|gap|bound``.

Exit codes: 0 every row passes, 1 some row fails, 2 usage or parse error,
3 the engine rejected the request (contract error).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from typing import List, Optional, Sequence

from .estimators import CONSTANTS, estimate_constant
from .spaces import ContractError, DomainError, ShapeError, loads_family
from .suites import SUITES, SuiteOptions, floor_increasing, gap_rows, row_passes

SCHEMA_VERSION = 1
CSV_COLUMNS = ("case", "lower", "upper", "ci_halfwidth", "pass", "elapsed_ms")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONTRACT = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> List[float]:
    try:
        vals = [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("coefficients must be finite and nonempty")
    return vals


def _confidence(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("confidence must lie in (0, 1)")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--samples", type=lambda t: max(2, _positive(t)), default=100_000)
    common.add_argument("--confidence", type=_confidence, default=0.99)
    common.add_argument("--budget", type=_positive, default=64, help="search restarts")
    common.add_argument("--out", default=None, help="report path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit the timestamp and timings so reports are byte-reproducible")

    p = argparse.ArgumentParser(prog="randbound", description="Randomized boundedness constants of operator families.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("suite", choices=sorted(SUITES))
    v.add_argument("--n", type=_int_list, default=None, help="sizes for sudakov / expsup")
    v.add_argument("--a", type=_float_list, action="append", default=None,
                   help="diagonal coefficients for diag-exact (repeatable)")
    v.add_argument("--cases", type=_positive, default=None, help="random cases for randomized suites")

    g = sub.add_parser("gap", parents=[common], help="coordinate-family R versus gamma scan")
    g.add_argument("N", nargs="*", type=_int_list, help="values of N (comma lists allowed)")
    g.add_argument("--N", dest="N_opt", type=_int_list, default=None)

    b = sub.add_parser("bound", parents=[common], help="bracket one constant of a family file")
    b.add_argument("family")
    b.add_argument("constant", nargs="?", choices=CONSTANTS)
    b.add_argument("--constant", dest="constant_opt", choices=CONSTANTS, default=None)
    return p


def _options(args) -> SuiteOptions:
    return SuiteOptions(seed=args.seed, samples=args.samples, confidence=args.confidence,
                        budget=args.budget, timing=not args.no_timestamp)


def _report(args, command: str, rows: list, extra: Optional[dict] = None) -> dict:
    rep = {
        "schemaVersion": SCHEMA_VERSION,
        "command": command,
        "config": {"seed": args.seed, "samples": args.samples, "confidence": args.confidence,
                   "budget": args.budget},
        "rows": rows,
        "pass": all(r["pass"] for r in rows),
    }
    if extra:
        rep.update(extra)
        rep["pass"] = rep["pass"] and extra.get("checks_pass", True)
    if not args.no_timestamp:
        rep["timestamp"] = datetime.now(timezone.utc).isoformat()
    return rep


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_COLUMNS)
    for r in report["rows"]:
        w.writerow([r["case"], repr(r["lower"]) if isinstance(r["lower"], float) else r["lower"],
                    repr(r["upper"]) if isinstance(r["upper"], float) else r["upper"],
                    repr(r["ci_halfwidth"]) if isinstance(r["ci_halfwidth"], float) else r["ci_halfwidth"],
                    "true" if r["pass"] else "false", r["elapsed_ms"]])
    return buf.getvalue()


def _write(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _cmd_verify(args) -> dict:
    opts = _options(args)
    opts.cases, opts.n, opts.a = args.cases, args.n, args.a
    if args.n is not None and any(n < 1 for n in args.n):
        raise UsageError("--n values must be positive")
    rows = SUITES[args.suite](opts)
    return _report(args, "verify", rows, {"suite": args.suite})


def _cmd_gap(args) -> dict:
    Ns = [n for chunk in args.N for n in chunk] + (args.N_opt or [])
    if not Ns:
        Ns = [2, 8, 64, 1024]
    if any(n < 2 for n in Ns):
        raise UsageError("gap scan needs every N >= 2")
    rows = gap_rows(Ns, _options(args))
    inc = floor_increasing(rows)
    return _report(args, "gap", rows, {"ratio_floor_increasing": inc, "checks_pass": inc})


def _cmd_bound(args) -> dict:
    constant = args.constant_opt or args.constant
    if constant is None:
        raise UsageError("bound needs a constant: " + ", ".join(CONSTANTS))
    try:
        with open(args.family, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.family}: {exc.strerror}")
    try:
        family = loads_family(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.family}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    except (ShapeError, DomainError, ValueError) as exc:
        raise UsageError(f"{args.family}: invalid family: {exc}")
    opts = _options(args)
    est = estimate_constant(family, constant, opts.search, opts.mc)
    d = est.to_dict()
    row = {
        "case": constant,
        "invariant": "experiments-cli/bound",
        "rule": "le",
        "lower": d["lower"],
        "upper": d["upper"],
        "ci_halfwidth": d.get("ci", {}).get("half_width", 0.0),
        "elapsed_ms": 0.0,
        "upper_source": est.upper_source,
        "certificate": d["certificate"],
        "degenerate": est.degenerate,
        "meta": _jsonable(d["meta"]),
    }
    row["pass"] = row_passes(row)
    return _report(args, "bound", [row], {"family": family.name or args.family, "constant": constant})


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if hasattr(x, "item"):
        return _jsonable(x.item())
    return x


_COMMANDS = {"verify": _cmd_verify, "gap": _cmd_gap, "bound": _cmd_bound}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        report = _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"randbound: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ContractError as exc:
        print(f"randbound: contract error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    _write(render(report, args.format), args.out)
    return EXIT_OK if report["pass"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
