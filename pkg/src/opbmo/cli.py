"""Command-line interface: ``opbmo {verify,norms,family,search,growth}``.

Exit codes: 0 success, 1 computation failure (or failed checks), 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys

from .dyadic import adjoint
from .hardy import ExpansionMismatch
from .linalg import ConvergenceError
from .norms import NORM_NAMES, SBMO_RTOL, CrossCheckError, compute_norms
from .operators import AssemblyMismatch
from .serialize import FORMAT, dumps, load_json, report_to_json, symbol_from_json, symbol_to_json
from .verify import verify_suite
from .witness import (
    FAMILY_KINDS,
    GROWTH_COLUMNS,
    DegenerateSearch,
    FamilySpec,
    SearchConfig,
    family,
    growth_curve,
    ratio_search,
)

COMPUTATION_ERRORS = (ConvergenceError, CrossCheckError, AssemblyMismatch, ExpansionMismatch, DegenerateSearch)
GROWTH_MODES = ("search", "rank_one_rademacher", "carleson_diagonal")


class UsageError(Exception):
    pass


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row[k]) for k in columns})
    return buf.getvalue()


def _read_symbol(path):
    if path is None:
        raise UsageError("--in is required")
    return symbol_from_json(load_json(path))


# -- subcommands ----------------------------------------------------------------

def cmd_verify(a):
    res = verify_suite(a.seed, a.samples, a.dim or 4, a.depth or 4,
                       1e-10 if a.tol is None else a.tol, a.workers)
    return dumps(res.to_json()), 0 if res.passed else 1


def _parse_names(spec):
    if spec == "all":
        return list(NORM_NAMES)
    names = [s.strip() for s in spec.split(",") if s.strip()]
    bad = [s for s in names if s not in NORM_NAMES]
    if bad or not names:
        raise UsageError(f"unknown norm(s) {bad}; choose 'all' or from {', '.join(NORM_NAMES)}")
    return names


def cmd_norms(a):
    B = _read_symbol(a.inp)
    names = _parse_names(a.norm)
    rtol = SBMO_RTOL if a.tol is None else a.tol
    rep = compute_norms(B, names, seed=a.seed, sbmo_rtol=rtol)
    if not a.no_adjoint:
        adj = compute_norms(adjoint(B), names, seed=a.seed, sbmo_rtol=rtol)
        for k, v in adj.values.items():
            rep.values["adj:" + k] = v
        for k, d in adj.diagnostics.items():
            rep.diagnostics["adj:" + k] = d
    if a.format == "csv":
        keys = sorted(rep.values)
        return _csv([rep.values], keys), 0
    return dumps(report_to_json(rep, B)), 0


def _read_scalars(path):
    if path is None:
        raise UsageError("diagonal_scalar needs --in with a list of scalar symbols")
    obj = load_json(path)
    if isinstance(obj, dict):
        obj = obj.get("symbols")
    if not isinstance(obj, list):
        raise UsageError("expected a JSON list of symbols or {\"symbols\": [...]}")
    return tuple(symbol_from_json(s) for s in obj)


def cmd_family(a):
    scalars = _read_scalars(a.inp) if a.kind == "diagonal_scalar" else ()
    fam = family(FamilySpec(a.kind, a.N, a.depth, a.dim, scalars))
    out = symbol_to_json(fam.symbol)
    out["family"] = {"kind": a.kind, "N": a.N, "expected": fam.expected}
    return dumps(out), 0


def _need(a, *names):
    missing = [n for n in names if getattr(a, n) is None]
    if missing:
        raise UsageError("missing required flag(s): " + ", ".join("--" + m for m in missing))


def cmd_search(a):
    _need(a, "numerator", "denominator")
    seed_symbol = _read_symbol(a.inp) if a.inp else None
    n = a.dim if a.dim is not None else (seed_symbol.n if seed_symbol else 2)
    K = a.depth if a.depth is not None else (seed_symbol.depth if seed_symbol else 3)
    cfg = SearchConfig(a.numerator, a.denominator, n, K, restarts=a.restarts, steps=a.steps, seed=a.seed)
    res = ratio_search(cfg, seed_symbol, a.workers)
    if a.format == "csv":
        row = {"n": n, "depth": K, "seed": a.seed, "numerator": a.numerator,
               "denominator": a.denominator, "ratio": res.ratio}
        return _csv([row], GROWTH_COLUMNS), 0
    out = {"format": FORMAT, "kind": "search", "n": n, "depth": K, "seed": a.seed,
           "numerator": a.numerator, "denominator": a.denominator, "restarts": a.restarts,
           "steps": a.steps, "ratio": res.ratio, "restart": res.restart,
           "restart_best": res.restart_best, "trace": res.trace, "symbol": symbol_to_json(res.symbol)}
    return dumps(out), 0


def _parse_dims(text):
    try:
        ns = [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--dim must be an integer or comma-separated list, got {text!r}") from None
    if not ns or min(ns) < 1:
        raise UsageError("--dim values must be >= 1")
    return ns


def cmd_growth(a):
    _need(a, "numerator", "denominator")
    mode = a.kind or "search"
    if mode not in GROWTH_MODES:
        raise UsageError(f"growth --kind must be one of {GROWTH_MODES}")
    ns = _parse_dims(a.dims if a.dims is not None else "1,2,3,4")
    rows = growth_curve(a.numerator, a.denominator, ns, a.depth or 3, mode,
                        restarts=a.restarts, steps=a.steps, seed=a.seed, workers=a.workers)
    if a.format == "json":
        return dumps({"format": FORMAT, "kind": "growth", "rows": rows}), 0
    return _csv(rows, GROWTH_COLUMNS), 0


COMMANDS = {"verify": cmd_verify, "norms": cmd_norms, "family": cmd_family,
            "search": cmd_search, "growth": cmd_growth}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opbmo", description="Operator-valued dyadic BMO norms at finite depth.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=None):
        sp.add_argument("--out", help="output file (default: standard output)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=1, help="worker threads; never changes results")
        if fmt:
            sp.add_argument("--format", choices=("json", "csv"), default=fmt)

    v = sub.add_parser("verify", help="run the identity and inequality suite")
    common(v)
    v.add_argument("--samples", type=int, default=200)
    v.add_argument("--dim", type=int, help="largest n in the ensemble (default 4)")
    v.add_argument("--depth", type=int, help="largest depth in the ensemble (default 4)")
    v.add_argument("--tol", type=float, help="identity tolerance (default 1e-10)")

    nm = sub.add_parser("norms", help="compute norms of a symbol")
    common(nm, "json")
    nm.add_argument("--in", dest="inp", help="symbol JSON")
    nm.add_argument("--norm", default="all", help="'all' or comma-separated: " + ", ".join(NORM_NAMES))
    nm.add_argument("--tol", type=float, help="relative tolerance of the SBMO cross-check")
    nm.add_argument("--no-adjoint", action="store_true", help="skip the adj:* values")

    fm = sub.add_parser("family", help="write a witness family symbol")
    common(fm)
    fm.add_argument("--kind", required=True, choices=FAMILY_KINDS)
    fm.add_argument("--N", type=int)
    fm.add_argument("--depth", type=int)
    fm.add_argument("--dim", type=int)
    fm.add_argument("--in", dest="inp", help="scalar symbols for diagonal_scalar")

    for name, fmt in (("search", "json"), ("growth", "csv")):
        sp = sub.add_parser(name, help="ratio search" if name == "search" else "ratio growth in n")
        common(sp, fmt)
        sp.add_argument("--numerator", help="norm expression, e.g. adj:sbmo")
        sp.add_argument("--denominator", help="norm expression, e.g. adj:wbmo")
        sp.add_argument("--depth", type=int)
        sp.add_argument("--restarts", type=int, default=4)
        sp.add_argument("--steps", type=int, default=100 if name == "search" else 50)
        if name == "search":
            sp.add_argument("--dim", type=int)
            sp.add_argument("--in", dest="inp", help="seed symbol for restart 0")
        else:
            sp.add_argument("--dim", dest="dims", help="comma-separated list of n")
            sp.add_argument("--kind", help="search, rank_one_rademacher or carleson_diagonal")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        text, code = COMMANDS[a.command](a)
    except COMPUTATION_ERRORS as exc:
        print(f"opbmo {a.command}: computation failed: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ValueError, OSError) as exc:
        print(f"opbmo {a.command}: {exc}", file=sys.stderr)
        return 2
    if a.out:
        with open(a.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())

