"""Command line front end: ``heavywigner {moments,series,sd,simulate,verify,graph}``.

Exit codes: 0 success, 2 parse or domain error, 3 resource cap, 4 failed
verification or engine disagreement.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from fractions import Fraction
from typing import Sequence

from .errors import DomainError, HeavyWignerError, ParseError, ResourceError
from .graphs import (
    DEFAULT_PARTITION_CAP,
    StarTestGraph,
    fat_tree_profile,
    is_cyclic,
    is_free_product,
    limit_injective_trace,
    two_edge_structure,
)
from .matrix_lab import EnsembleSpec, ensemble_parameter, simulate_phi
from .moment_engine import phi_k
from .params import DEFAULT_KMAX, HeavyParams
from .partition_oracle import phi_bruteforce_k
from .polynomial import MomentPolynomial, format_fraction, to_fraction
from .sd_solver import SDSolver, series_g, series_vs_sd_report
from .verify import run_verification
from .words import YModel, as_interleaved

EXIT_OK, EXIT_DOMAIN, EXIT_RESOURCE, EXIT_VERIFY = 0, 2, 3, 4
HELP_WIDTH = 88

_FLOAT_MARK = "\x00f:"


class CommandFailed(Exception):
    def __init__(self, code: int, payload: dict):
        self.code = code
        self.payload = payload


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _mark_floats(obj):
    if isinstance(obj, float):
        return _FLOAT_MARK + ("NaN" if math.isnan(obj) else f"{obj:.17g}")
    if isinstance(obj, dict):
        return {k: _mark_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_mark_floats(v) for v in obj]
    return obj


def dumps(obj, indent: int | None = None) -> str:
    """Deterministic JSON: keys sorted, floats with 17 significant digits."""
    text = json.dumps(_mark_floats(obj), sort_keys=True, indent=indent, ensure_ascii=False)
    return re.sub(r'"\\u0000f:([^"]*)"', lambda m: "null" if m.group(1) == "NaN" else m.group(1), text)


def _emit(payload: dict, fmt: str, pretty: str | None = None, csv_rows: list[list] | None = None) -> None:
    if fmt == "json":
        print(dumps(payload))
    elif fmt == "csv" and csv_rows is not None:
        for row in csv_rows:
            print(",".join(str(c) for c in row))
    elif pretty is not None:
        print(pretty)
    else:
        print(dumps(payload, indent=2))


# ---------------------------------------------------------------------------
# parameters and y-models
# ---------------------------------------------------------------------------

def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc.msg}", exc.pos) from exc


def _parse_value(text: str):
    text = text.strip()
    if text in ("", "?", "null"):
        return None
    try:
        return to_fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad parameter value {text!r}") from exc


def _param_spec(arg: str | None) -> dict:
    """Turn ``--param`` into {"matrices": {color: [values]}, "default": ..., "y": ...}."""
    if not arg:
        return {"matrices": {}, "default": None, "y": None}
    if os.path.exists(arg) or arg.endswith(".json"):
        data = _load_json(arg)
        mats = {}
        for m in data.get("matrices", []):
            name = str(m.get("name", ""))
            if not re.fullmatch(r"x\d+", name):
                raise ParseError(f"matrix name {name!r} must look like x<j>")
            mats[int(name[1:])] = [None if v is None else _parse_value(str(v)) for v in m.get("a", [])]
        return {"matrices": mats, "default": None, "y": data.get("y")}
    m = re.fullmatch(r"(trivial|const):(.+)", arg)
    if m:
        return {"matrices": {}, "default": (m.group(1), _parse_value(m.group(2))), "y": None}
    mats = {}
    for part in arg.split(";"):
        mm = re.fullmatch(r"\s*x(\d+)\s*=\s*(.+)", part)
        if not mm:
            raise ParseError(f"cannot parse parameter {part!r}; use x1=1,1/3,... or trivial:a or const:a")
        mats[int(mm.group(1))] = [_parse_value(v) for v in mm.group(2).split(",")]
    return {"matrices": mats, "default": None, "y": None}


def build_params(arg: str | None, colors: Sequence[int], k_max: int, symbolic: bool) -> HeavyParams:
    """Parameters for every color in ``colors``; unspecified colors stay symbolic."""
    spec = _param_spec(None if symbolic else arg)
    colors = sorted(set(colors) | set(spec["matrices"])) or [1]
    table = {}
    for c in colors:
        if c in spec["matrices"]:
            seq = spec["matrices"][c]
            if len(seq) > k_max:
                seq = seq[:k_max]
            table[c] = seq + [Fraction(0)] * (k_max - len(seq))
        elif spec["default"] is not None:
            kind, a = spec["default"]
            table[c] = [a] + [Fraction(0) if kind == "trivial" else a] * (k_max - 1)
        else:
            table[c] = [None] * k_max
    return HeavyParams.build(table, k_max)


def build_y(arg: str | None, param_arg: str | None) -> YModel:
    data = None
    if arg in (None, ""):
        if param_arg and (os.path.exists(param_arg) or param_arg.endswith(".json")):
            data = _param_spec(param_arg)["y"]
        if data is None:
            return YModel.diagonal()
    elif arg in ("none", "diagonal"):
        return YModel.none() if arg == "none" else YModel.diagonal()
    else:
        data = _load_json(arg)
        data = data.get("y", data)
    kind = data.get("kind")
    if kind == "diagonal":
        moments = data.get("moments", [])
        if isinstance(moments, list):
            return YModel.diagonal_power_moments([_parse_value(str(v)) for v in moments], data.get("letter", "y1"))
        return YModel.diagonal({k: _parse_value(str(v)) for k, v in moments.items()})
    if kind == "none":
        return YModel.none()
    if kind == "heavy":
        seq = [_parse_value(str(v)) for v in data.get("a", [])]
        if not seq or any(v is None for v in seq):
            raise ParseError("a heavy y-model needs numeric parameters 'a'")
        letter = str(data.get("letter", "y1"))
        color = int(letter[1:]) + 1000  # internal color, kept apart from the x colors
        params = HeavyParams.build({color: seq})
        return YModel.heavy(params, {letter: color})
    raise ParseError(f"unknown y-model kind {kind!r}")


def _word_colors(words) -> list[int]:
    return sorted({c for w in words for c in as_interleaved(w).colors})


def _poly_payload(p: MomentPolynomial) -> dict:
    out = {"polynomial": str(p), "terms": p.to_json()["terms"]}
    if p.is_constant():
        out["value"] = format_fraction(p.constant_value())
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_moments(args) -> int:
    words = args.word
    parsed = [as_interleaved(w) for w in words]
    params = build_params(args.param, _word_colors(parsed), args.kmax, args.symbolic)
    y = build_y(args.y, args.param)
    engines = ["tree", "partition", "sd"] if args.engine == "all" else [args.engine]
    results = {}
    for eng in engines:
        if eng == "tree":
            results[eng] = phi_k(parsed, params, y, workers=args.threads)
        elif eng == "partition":
            results[eng] = phi_bruteforce_k(parsed, params, y, cap=args.partition_cap)
        else:
            results[eng] = SDSolver(params, y).phi_k(parsed)
    first = results[engines[0]]
    agree = all(v == first for v in results.values())
    payload = {"words": [str(w) for w in parsed], "engines": {k: str(v) for k, v in results.items()},
               "agree": agree, **_poly_payload(first)}
    if not agree:
        raise CommandFailed(EXIT_VERIFY, payload)
    pretty = str(first)
    _emit(payload, args.format, pretty)
    return EXIT_OK


def cmd_sd(args) -> int:
    args.engine = "sd"
    return cmd_moments(args)


def cmd_series(args) -> int:
    k_trunc = max(1, args.order // 2)
    params = build_params(args.param, [args.color], k_trunc, args.symbolic)
    table = series_g(params, args.kmax, args.order, args.color)
    payload: dict = {"color": args.color, "order": args.order, "series": table.to_json()}
    rows = [["K", "m", "value"]] + [[K, m, str(table.c(K, m))]
                                    for K in range(1, args.kmax + 1) for m in range(args.order + 1)]
    code = EXIT_OK
    if args.check:
        report = series_vs_sd_report(params, args.order, max(1, args.kmax), args.color)
        payload["check"] = report.to_json()
        if not report.ok:
            raise CommandFailed(EXIT_VERIFY, payload)
    pretty = "\n".join(f"c_{K}[{m}] = {table.c(K, m)}" for K in range(1, args.kmax + 1) for m in range(args.order + 1))
    _emit(payload, args.format, pretty, rows)
    return code


def _ensemble(args) -> EnsembleSpec:
    if args.ensemble_file:
        return EnsembleSpec.from_json(_load_json(args.ensemble_file))
    kind = args.ensemble.replace("-", "_")
    if kind in ("erdos_renyi", "network"):
        return EnsembleSpec(kind, alpha=args.alpha, weight=args.weight)
    if kind == "truncated_levy":
        return EnsembleSpec(kind, alpha_stable=args.alpha_stable, cutoff=args.cutoff)
    raise ParseError(f"unknown ensemble {args.ensemble!r}")


def cmd_simulate(args) -> int:
    spec = _ensemble(args)
    words = [as_interleaved(w) for w in args.word]
    colors = _word_colors(words)
    if colors != [1]:
        raise DomainError("simulate supports words in the single heavy letter x1")
    if any(w.has_y() for w in words):
        raise DomainError("simulate supports pure heavy words")
    degree = sum(w.length for w in words)
    params = ensemble_parameter(spec, max(1, degree // 2))
    predicted = phi_k(words, params)
    result = simulate_phi(spec, [w.letters() for w in words], args.n, args.reps, args.seed, threads=args.threads)
    pred = float(predicted.constant_value())
    allowance = args.allowance / args.n
    z = (result.mean - pred) / result.stderr if result.stderr > 0 else math.nan
    excess = max(0.0, abs(result.mean - pred) - allowance)
    z_adj = excess / result.stderr if result.stderr > 0 else math.nan
    payload = {**result.to_json(), "ensemble": spec.to_json(), "words": [str(w) for w in words],
               "predicted": pred, "predicted_exact": format_fraction(predicted.constant_value()),
               "z": z, "allowance": allowance, "z_adjusted": z_adj}
    rows = [["mean", "stderr", "replicates", "N", "seed", "predicted", "z", "z_adjusted"],
            [f"{result.mean:.17g}", f"{result.stderr:.17g}", result.replicates, result.N, result.seed,
             f"{pred:.17g}", f"{z:.17g}", f"{z_adj:.17g}"]]
    _emit(payload, args.format, None, rows)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.degree > 10:
        raise DomainError("verify supports degree <= 10")
    colors = [1, 2] if args.colors == 2 else [1]
    params = build_params(args.param, colors, max(1, args.degree // 2), args.symbolic)
    report = run_verification(params, args.degree)
    payload = report.to_json()
    if not report.ok:
        raise CommandFailed(EXIT_VERIFY, payload)
    _emit(payload, args.format)
    return EXIT_OK


def _families(arg: str | None, labels) -> dict:
    if not arg:
        return {lab: lab for lab in labels}
    if os.path.exists(arg):
        return {str(k): v for k, v in _load_json(arg).items()}
    out = {}
    for part in arg.split(","):
        if ":" not in part:
            raise ParseError(f"family entries look like x1:A, got {part!r}")
        k, v = part.split(":", 1)
        out[k.strip()] = v.strip()
    return out


def cmd_graph(args) -> int:
    try:
        T = StarTestGraph.from_json(_load_json(args.graph))
    except DomainError as exc:
        if "connected" in str(exc):
            raise DomainError("graph rejected: test graphs must be connected") from exc
        raise
    colors = sorted({int(l[1:]) for l in T.labels() if re.fullmatch(r"x\d+", l)})
    params = build_params(args.param, colors, args.kmax, args.symbolic)
    ts = two_edge_structure(T)
    profile = fat_tree_profile(T)
    fams = _families(args.family, T.labels())
    payload = {
        "cyclic": is_cyclic(T),
        "fat_tree": profile is not None,
        "profile": None if profile is None else [
            {"edge": [fe.u, fe.v], "multiplicity": fe.multiplicity, "labels": list(fe.labels)} for fe in profile.edges],
        "type": list(profile.type()) if profile is not None and profile.is_regular() else None,
        "r": ts.leaf_count,
        "bridges": list(ts.bridges),
        "components": [list(c) for c in ts.components],
        "free_product": is_free_product(T, fams),
        "limit": str(limit_injective_trace(T, params)) if all(re.fullmatch(r"x\d+", l) for l in T.labels()) else None,
    }
    _emit(payload, args.format)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _formatter(prog):
    return argparse.HelpFormatter(prog, width=HELP_WIDTH, max_help_position=32)


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _shared(p: argparse.ArgumentParser, kmax_help: str = "truncation order k_max of the parameters") -> None:
    p.add_argument("--param", metavar="FILE|INLINE",
                   help="parameter JSON file, or inline 'trivial:a', 'const:a', 'x1=1,1/3,1/5;x2=...'")
    p.add_argument("--y", metavar="FILE|KIND", help="y-model: 'none', 'diagonal' (symbolic) or a JSON file")
    p.add_argument("--symbolic", action="store_true", help="ignore numeric parameters and keep a[j,k] symbolic")
    p.add_argument("--format", choices=["pretty", "json", "csv"], default="pretty", help="output format")
    p.add_argument("--threads", type=_positive, default=os.cpu_count() or 1, help="worker count (default: all cores)")
    p.add_argument("--kmax", type=_positive, default=DEFAULT_KMAX, help=kmax_help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heavywigner", formatter_class=_formatter,
                                     description="Limiting moments of heavy Wigner matrices: tree enumeration, "
                                                 "partition oracle, Schwinger-Dyson recursion and Monte Carlo.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    for name, helptext in (("moments", "exact moment Phi or Phi^(K) of words"),
                           ("sd", "moments by the Schwinger-Dyson recursion")):
        p = sub.add_parser(name, help=helptext, formatter_class=_formatter, description=helptext)
        p.add_argument("--word", action="append", required=True,
                       help="word such as 'x1^2 y1 x1'; repeat for Hadamard products Phi^(K)")
        if name == "moments":
            p.add_argument("--engine", choices=["tree", "partition", "sd", "all"], default="tree",
                           help="engine to run; 'all' runs the three and compares")
        p.add_argument("--partition-cap", type=_positive, default=DEFAULT_PARTITION_CAP,
                       help="largest number of partitions the partition engine may visit")
        _shared(p)
        p.set_defaults(func=cmd_moments if name == "moments" else cmd_sd)

    p = sub.add_parser("series", help="coefficients c_K[m] of the series G(K)", formatter_class=_formatter,
                       description="coefficients c_K[m] of the series G(K)")
    p.add_argument("--order", type=int, default=8, help="largest m")
    p.add_argument("--color", type=_positive, default=1, help="heavy letter whose parameter is used")
    p.add_argument("--check", action="store_true", help="compare with the Schwinger-Dyson solver")
    _shared(p, "largest K of the table")
    p.set_defaults(func=cmd_series, kmax=1)

    p = sub.add_parser("simulate", help="Monte Carlo estimate of a moment", formatter_class=_formatter,
                       description="Monte Carlo estimate of a moment")
    p.add_argument("--ensemble", default="erdos-renyi", choices=["erdos-renyi", "network", "truncated-levy"],
                   help="ensemble kind")
    p.add_argument("--ensemble-file", metavar="FILE", help="ensemble JSON file (overrides --ensemble)")
    p.add_argument("--alpha", type=float, default=1.0, help="mean degree alpha (erdos-renyi, network)")
    p.add_argument("--weight", default="rademacher", help="network weight law: rademacher, gaussian, uniform")
    p.add_argument("--alpha-stable", type=float, default=1.0, help="tail index (truncated-levy)")
    p.add_argument("--cutoff", type=float, default=1.0, help="truncation level B (truncated-levy)")
    p.add_argument("--n", type=_positive, default=1000, help="matrix size N")
    p.add_argument("--reps", type=_positive, default=100, help="number of replicates")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--word", action="append", required=True, help="word in x1; repeat for Hadamard products")
    p.add_argument("--allowance", type=float, default=0.0, help="finite-size allowance c (deviation c/N is free)")
    p.add_argument("--format", choices=["pretty", "json", "csv"], default="pretty", help="output format")
    p.add_argument("--threads", type=_positive, default=os.cpu_count() or 1, help="worker threads")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="cross-engine verification suite", formatter_class=_formatter,
                       description="cross-engine verification suite")
    p.add_argument("--degree", type=int, default=8, help="largest word degree (at most 10)")
    p.add_argument("--colors", type=int, choices=[1, 2], default=2, help="number of heavy letters")
    _shared(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("graph", help="analyse a test graph", formatter_class=_formatter,
                       description="analyse a test graph")
    p.add_argument("--graph", required=True, metavar="FILE", help="graph JSON {'vertices': n, 'edges': [...]}")
    p.add_argument("--family", metavar="FILE|INLINE", help="label families, e.g. 'x1:A,x2:B' (default: one per label)")
    _shared(p)
    p.set_defaults(func=cmd_graph)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CommandFailed as exc:
        print(dumps(exc.payload, indent=None if getattr(args, "format", "") == "json" else 2))
        return exc.code
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (HeavyWignerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
