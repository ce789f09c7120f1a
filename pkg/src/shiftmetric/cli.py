"""Command-line interface.

Exit codes: 0 success, 1 numerical failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys

import numpy as np

from .errors import ShiftMetricError
from .polydyn import Polynomial, critical_heights, critical_points, is_shift_locus

__all__ = ["main", "build_parser", "parse_lengths", "UsageError"]


class UsageError(Exception):
    """Bad command-line input (exit code 2)."""


_LOG = re.compile(r"^log\(?([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\)?$")


def _token(tok: str) -> float:
    tok = tok.strip()
    low = tok.lower()
    if low in ("inf", "+inf", "infinity"):
        return math.inf
    m = _LOG.match(low)
    if m:
        return math.log(float(m.group(1)))
    try:
        return float(tok)
    except ValueError:
        raise UsageError(f"cannot parse number {tok!r}") from None


def parse_lengths(text: str) -> np.ndarray:
    """Comma list of floats, ``inf`` and ``logN`` tokens, or a JSON array."""
    text = text.strip()
    if text.startswith("["):
        try:
            items = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed JSON array: {exc}") from None
        return np.array([_token(str(x)) for x in items], dtype=float)
    if not text:
        raise UsageError("empty list")
    return np.array([_token(t) for t in text.split(",")], dtype=float)


def _load_json(text: str):
    if text.startswith("@"):
        try:
            with open(text[1:], encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(str(exc)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON: {exc}") from None


def _fmt(x: float):
    """JSON-safe number: floats stay floats, infinities become strings."""
    return float(x) if math.isfinite(x) else str(float(x))


def _g17(x: float) -> str:
    return f"{float(x):.17g}"


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_heights(args) -> int:
    obj = _load_json(args.coeffs)
    try:
        f = Polynomial.from_json(obj)
    except (ShiftMetricError, TypeError, ValueError) as exc:
        raise UsageError(f"bad polynomial: {exc}") from None
    h = critical_heights(f, tol=args.tol)
    crit = critical_points(f)
    out = {
        "degree": f.degree,
        "heights": list(h.values),
        "critical_points": [[c.real, c.imag] for c in crit],
        "shift_locus": is_shift_locus(h),
    }
    if not out["shift_locus"]:
        out["note"] = "not shift locus"
    _emit(args, json.dumps(out) + "\n")
    return 0


def cmd_entropy(args) -> int:
    from .rosemetric import ENTROPY_METHODS, entropy

    L = parse_lengths(args.lengths)
    primary = args.method or "spectral"
    if primary not in ENTROPY_METHODS:
        raise UsageError(f"unknown method {primary!r}")
    values = {m: entropy(L, method=m, tol=args.tol * 1e-1, max_iter=args.max_iter) for m in ENTROPY_METHODS}
    spread = max(values.values()) - min(values.values())
    if spread > 1e-6 * max(1.0, abs(values[primary])):
        diag = {"error": "entropy methods disagree", "lengths": [_fmt(x) for x in L],
                "values": values, "spread": spread}
        sys.stderr.write(json.dumps(diag) + "\n")
        return 1
    _emit(args, _g17(values[primary]) + "\n")
    return 0


def cmd_norm(args) -> int:
    from .rosemetric import entropy_norm_sq, normalize_unit_entropy, project_tangent

    L = normalize_unit_entropy(parse_lengths(args.lengths))
    if args.vector:
        v = parse_lengths(args.vector)
    else:
        v = np.random.default_rng(args.seed).standard_normal(L.size)
    if v.size != L.size:
        raise UsageError("vector and lengths differ in size")
    vt = project_tangent(L, v)
    method = args.method or "closed"
    n2 = entropy_norm_sq(L, vt, method=method)
    out = {"basepoint": [_fmt(x) for x in L], "vector": vt.tolist(), "norm_sq": n2,
           "norm": math.sqrt(max(n2, 0.0)), "projected": bool(np.abs(vt - v).max() > 1e-12)}
    _emit(args, json.dumps(out) + "\n")
    return 0


def cmd_distance(args) -> int:
    from .rosemetric import distance_upper
    from .shiftlocus import rho_upper

    if args.heights_a is not None:
        if args.heights_b is None:
            raise UsageError("--heights-a needs --heights-b")
        tA = parse_lengths(args.twist_a) if args.twist_a else None
        tB = parse_lengths(args.twist_b) if args.twist_b else None
        res = rho_upper(parse_lengths(args.heights_a), parse_lengths(args.heights_b), tA, tB,
                        levels=args.refine, max_iter=args.max_iter)
        kind = "shift-locus"
    elif args.lengths_a is not None and args.lengths_b is not None:
        res = distance_upper(parse_lengths(args.lengths_a), parse_lengths(args.lengths_b),
                             levels=args.refine, max_iter=args.max_iter)
        kind = "rose"
    else:
        raise UsageError("give --heights-a/--heights-b or --lengths-a/--lengths-b")
    out = {"distance": res.value, "tag": "upper-bound", "kind": kind,
           "history": list(res.history), "stagnated": res.stagnated}
    _emit(args, json.dumps(out) + "\n")
    return 0


def cmd_sweep_s2(args) -> int:
    from .experiments import sweep_s2

    levels = parse_lengths(args.levels)
    if (levels <= 0).any() or not np.isfinite(levels).all():
        raise UsageError("levels must be positive and finite")
    if args.samples < 2:
        raise UsageError("need at least 2 samples per level")
    rows = sweep_s2(levels, args.samples)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["h", "length", "samples"])
    for r in rows:
        w.writerow([_g17(r.h), _g17(r.length), r.samples])
    _emit(args, buf.getvalue())
    for r in rows:
        if r.failed:
            sys.stderr.write(f"level {r.h}: {r.failed} samples failed to trace\n")
    return 0


def cmd_regimes(args) -> int:
    from .experiments import parallel_map, regimes_report
    from .shiftlocus import BUILTIN_FAMILIES, SequenceFamily

    specs = []
    for item in args.family:
        if item in BUILTIN_FAMILIES:
            specs.append(BUILTIN_FAMILIES[item])
        elif item == "all":
            specs.extend(BUILTIN_FAMILIES.values())
        else:
            try:
                specs.append(SequenceFamily.from_json(_load_json(item)))
            except (TypeError, ValueError) as exc:
                if isinstance(exc, ShiftMetricError):
                    raise
                raise UsageError(f"bad family: {exc}") from None
    k = parse_lengths(args.k_grid) if args.k_grid else None
    results = parallel_map(lambda fam: regimes_report(fam, k), specs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["family", "k", "entropy", "entropy_ratio", "leg", "tail_sum"])
    summaries = []
    for fam, (rows, summary) in zip(specs, results):
        name = fam.name or ";".join(fam.exprs)
        for r in rows:
            w.writerow([name, _g17(r["k"]), _g17(r["entropy"]), _g17(r["entropy_ratio"]),
                        _g17(r["leg"]), _g17(r["tail_sum"])])
        summaries.append(summary)
    if args.out:
        _emit(args, buf.getvalue())
        sys.stdout.write(json.dumps(summaries, default=float) + "\n")
    else:
        sys.stdout.write(buf.getvalue())
        sys.stderr.write(json.dumps(summaries, default=float) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-12, help="numerical tolerance")
    common.add_argument("--max-iter", type=int, default=200, help="iteration cap")
    common.add_argument("--method", default=None, help="algorithm choice where applicable")
    common.add_argument("--out", default=None, help="write the main output here")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized inputs")
    common.add_argument("--refine", type=int, default=2, help="path refinement levels")

    p = argparse.ArgumentParser(prog="shiftmetric", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("heights", parents=[common], help="critical heights of a polynomial")
    s.add_argument("coeffs", help='JSON {"degree": D, "coeffs": [[re, im], ...]} or @file')
    s.set_defaults(func=cmd_heights)

    s = sub.add_parser("entropy", parents=[common], help="entropy of a rose length function")
    s.add_argument("--lengths", required=True, help="e.g. 1,2,inf or log3,log3")
    s.set_defaults(func=cmd_entropy)

    s = sub.add_parser("norm", parents=[common], help="entropy norm of a tangent vector")
    s.add_argument("--lengths", required=True)
    s.add_argument("--vector", default=None, help="defaults to a seeded random vector")
    s.set_defaults(func=cmd_norm)

    s = sub.add_parser("distance", parents=[common], help="distance upper bound")
    s.add_argument("--heights-a")
    s.add_argument("--heights-b")
    s.add_argument("--twist-a")
    s.add_argument("--twist-b")
    s.add_argument("--lengths-a")
    s.add_argument("--lengths-b")
    s.set_defaults(func=cmd_distance)

    s = sub.add_parser("sweep-s2", parents=[common], help="level-curve lengths, quadratic family")
    s.add_argument("--levels", default="0.05,1,20")
    s.add_argument("--samples", type=int, default=256)
    s.set_defaults(func=cmd_sweep_s2)

    s = sub.add_parser("regimes", parents=[common], help="classify height families")
    s.add_argument("family", nargs="+", help="built-in name, 'all', or family JSON (or @file)")
    s.add_argument("--k-grid", default=None, help="comma list overriding the family grid")
    s.set_defaults(func=cmd_regimes)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name in ("tol",):
        if getattr(args, name) <= 0:
            sys.stderr.write("error: --tol must be positive\n")
            return 2
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except ShiftMetricError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
