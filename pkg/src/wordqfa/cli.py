"""Command-line front end: build and certify representation families, assemble
and run machines, and execute the verification suites."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

import mpmath

from .analysis import runtime_profile
from .analytic import AnalysisUnavailable, analyze_acceptance
from .assemble import (assemble_exp_machine, assemble_poly_machine, assemble_unbounded_machine,
                       build_mo1qfa, transform_overgroup)
from .dfr import (DEFAULT_RADII, CertificationError, Dfr, build_named_dfr, certify_and_calibrate,
                  certify_dfr, machine_ready)
from .groups import build_coset_table
from .linalg import ToleranceProfile
from .machine import QcfaMachine
from .montecarlo import DEFAULT_STEP_LIMIT, run_montecarlo, set_threads
from .verify import SUITES, run_suite

EXIT_OK, EXIT_USAGE, EXIT_CERTIFICATION, EXIT_ANALYSIS, EXIT_VERIFY = 0, 1, 2, 3, 4

FAMILIES = {
    "trivial": "Trivial", "zm": "Zm", "zalg": "ZAlgebraic", "zalgebraic": "ZAlgebraic",
    "znonalg": "ZNonAlgebraic", "znonalgebraic": "ZNonAlgebraic", "f2": "F2", "fr": "Fr",
    "abelian-alg": "AbelianAlgebraic", "abelian-nonalg": "AbelianNonAlgebraic",
    "dpf": "DirectProductOfFrees", "tan": "TanZr", "shalen": "ShalenZFreeZr",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class CliConfig:
    precision_bits: int = 256
    eps_num: float | None = None
    seed: int = 0
    trials: int = 10000
    step_limit: int = DEFAULT_STEP_LIMIT
    format: str = "pretty"
    threads: int | None = None

    def validate(self) -> None:
        if self.precision_bits < 64:
            raise UsageError("precision must be at least 64 bits")
        if self.trials < 1:
            raise UsageError("trials must be at least 1")
        if self.step_limit < 1:
            raise UsageError("step_limit must be positive")
        if self.format not in ("json", "csv", "pretty"):
            raise UsageError("format must be json, csv or pretty")

    @property
    def tolerance(self) -> ToleranceProfile:
        return ToleranceProfile(self.precision_bits, self.eps_num)


def read_config_file(path: str) -> dict:
    """key=value lines; blank lines and lines starting with # are ignored."""
    out = {}
    for num, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{num}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_config(args) -> CliConfig:
    cfg = CliConfig()
    types = {f.name: f.type for f in fields(CliConfig)}
    layers = [read_config_file(args.config)] if args.config else []
    layers.append({k: getattr(args, k) for k in types if getattr(args, k, None) is not None})
    for layer in layers:
        for key, value in layer.items():
            if key not in types:
                raise UsageError(f"unknown configuration key {key!r}")
            current = getattr(cfg, key)
            if isinstance(value, str) and key != "format":
                value = float(value) if key == "eps_num" else int(value)
            setattr(cfg, key, value if value is not None else current)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# output


def emit(payload, cfg: CliConfig, out=None) -> None:
    out = out or sys.stdout
    if cfg.format == "json":
        out.write(json.dumps(payload, indent=2, default=str) + "\n")
    elif cfg.format == "csv":
        out.write(_to_csv(payload))
    else:
        out.write(_pretty(payload))


def _flatten(payload, prefix=""):
    if isinstance(payload, dict):
        for k, v in payload.items():
            yield from _flatten(v, f"{prefix}{k}.")
    elif isinstance(payload, list) and payload and isinstance(payload[0], dict):
        for i, v in enumerate(payload):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], payload


def _to_csv(payload) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    if isinstance(payload, list) and payload and isinstance(payload[0], dict):
        keys = list(payload[0])
        w.writerow(keys)
        for row in payload:
            w.writerow([json.dumps(row[k], default=str) if isinstance(row[k], (dict, list))
                        else row[k] for k in keys])
    else:
        w.writerow(["key", "value"])
        for k, v in _flatten(payload):
            w.writerow([k, json.dumps(v, default=str) if isinstance(v, (dict, list)) else v])
    return buf.getvalue()


def _pretty(payload) -> str:
    return "".join(f"{k}: {v}\n" for k, v in _flatten(payload))


def write_json(path: str, data: dict) -> None:
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


# ---------------------------------------------------------------------------
# dfr


def _family_params(args) -> dict:
    params = {}
    if args.m is not None:
        params["m"] = args.m
    if args.r is not None:
        params["r"] = args.r
    for item in args.param or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        params[key] = json.loads(value) if value[:1] in "[{0123456789-." else value
    return params


def cmd_dfr_build(args, cfg: CliConfig) -> int:
    family = FAMILIES.get(args.family.lower(), args.family)
    try:
        f = build_named_dfr(family, **_family_params(args))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid family specification: {exc}") from None
    data = f.to_json()
    if args.output:
        write_json(args.output, data)
    emit({"label": f.label, "k": f.k, "d": f.d, "tau": f.tau.describe(),
          "output": args.output}, cfg)
    return EXIT_OK


def cmd_dfr_certify(args, cfg: CliConfig) -> int:
    f = Dfr.from_json(load_json(args.file))
    radius = args.radius or DEFAULT_RADII.get(f.label.split("(")[0], 6)
    tol = cfg.tolerance
    report = certify_dfr(f, radius, tol)
    emit(report.to_json(f.group), cfg)
    if not report.passed:
        witness = report.failure_witness or report.violations[0][0]
        print(f"certification failed; witness: {f.group.format_word(witness) or 'e'}",
              file=sys.stderr)
        return EXIT_CERTIFICATION
    try:
        certified, _ = certify_and_calibrate(f, radius, tol)
    except CertificationError as exc:
        print(f"certification failed: {exc}; witness: {f.group.format_word(exc.witness)}",
              file=sys.stderr)
        return EXIT_CERTIFICATION
    write_json(args.output or args.file, certified.to_json())
    return EXIT_OK


# ---------------------------------------------------------------------------
# machine


def _load_machine(path: str) -> QcfaMachine:
    return QcfaMachine.from_json(load_json(path))


def _eps(text: str) -> Fraction:
    try:
        return Fraction(text)
    except ValueError:
        raise UsageError(f"invalid epsilon {text!r}") from None


def cmd_machine_build(args, cfg: CliConfig) -> int:
    f = Dfr.from_json(load_json(args.dfr))
    if args.mode != "mo1qfa" and not machine_ready(f):
        raise UsageError("the DFR must be certified first (dfr certify)")
    table = None
    if args.overgroup:
        spec = load_json(args.overgroup) if args.overgroup.endswith(".json") else args.overgroup
        table = build_coset_table(f.group, spec)
    if args.mode in ("poly", "exp") and args.eps is None:
        raise UsageError(f"--eps is required for mode {args.mode}")
    if args.mode == "poly":
        m = assemble_poly_machine(f, _eps(args.eps))
    elif args.mode == "exp":
        m = assemble_exp_machine(f, _eps(args.eps), reading=args.reading)
    elif args.mode == "unbounded":
        m = assemble_unbounded_machine(f)
    else:
        if table is not None:
            raise UsageError("the one-way machine has no overgroup variant")
        m = build_mo1qfa(f)
    if table is not None:
        m = transform_overgroup(m, table)
    data = m.to_json()
    if args.output:
        write_json(args.output, data)
    emit({"label": m.label, "classical_states": len(m.states), "d": m.d,
          "unitaries": len(m.unitaries), "group": m.group.name, "output": args.output}, cfg)
    return EXIT_OK


def cmd_machine_run(args, cfg: CliConfig) -> int:
    m = _load_machine(args.file)
    word = m.group.parse_word(args.word)
    stats = run_montecarlo(m, word, cfg.trials, cfg.seed, cfg.step_limit)
    if cfg.format == "csv":
        sys.stdout.write(stats.to_csv())
    else:
        emit(stats.to_json(), cfg)
    return EXIT_OK


def cmd_machine_analyze(args, cfg: CliConfig) -> int:
    m = _load_machine(args.file)
    word = m.group.parse_word(args.word)
    try:
        a = analyze_acceptance(m, word)
    except AnalysisUnavailable as exc:
        print(f"analysis unavailable: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    emit(a.to_json(), cfg)
    return EXIT_OK


def cmd_machine_profile(args, cfg: CliConfig) -> int:
    m = _load_machine(args.file)
    try:
        lengths = [int(x) for x in args.lengths.split(",") if x.strip()]
    except ValueError:
        raise UsageError("--lengths expects comma-separated integers") from None
    words = None
    if args.word:
        pieces = [m.group.parse_word(w) for w in args.word]
        words = lambda n: [p for p in pieces if len(p) == n] or [pieces[0]]  # noqa: E731
    prof = runtime_profile(m, lengths, words, claim=args.claim, trials=cfg.trials,
                           seed=cfg.seed, step_limit=cfg.step_limit)
    if cfg.format == "csv":
        sys.stdout.write(prof.to_csv())
    else:
        emit(prof.to_json(), cfg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args, cfg: CliConfig) -> int:
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    results = run_suite(args.suite, quick=args.quick,
                        progress=(lambda r: print(r.line(), file=sys.stderr, flush=True))
                        if cfg.format != "pretty" else (lambda r: print(r.line(), flush=True)))
    failed = [r.key for r in results if not r.passed]
    summary = {"suite": args.suite, "quick": args.quick, "passed": not failed,
               "failed": failed, "results": [r.to_json() for r in results]}
    if cfg.format == "json":
        emit(summary, cfg)
    elif cfg.format == "csv":
        emit([{k: v for k, v in r.to_json().items() if k != "data"} for r in results], cfg)
    if failed:
        print("failing criteria: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p) -> None:
    p.add_argument("--config", help="key=value configuration file (flags override it)")
    p.add_argument("--precision", dest="precision_bits", type=int, help="BigFloat bits")
    p.add_argument("--eps-num", dest="eps_num", type=float, help="numeric tolerance override")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--step-limit", dest="step_limit", type=int)
    p.add_argument("--format", choices=("json", "csv", "pretty"))
    p.add_argument("--threads", type=int, help="cap on Monte Carlo worker threads")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wordqfa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    dfr = sub.add_parser("dfr", help="build or certify representation families")
    dsub = dfr.add_subparsers(dest="action", required=True, parser_class=_Parser)
    b = dsub.add_parser("build")
    b.add_argument("--family", required=True, help=", ".join(sorted(FAMILIES)))
    b.add_argument("--m", type=int)
    b.add_argument("--r", type=int)
    b.add_argument("--param", action="append", help="extra family parameter key=value")
    b.add_argument("-o", "--output")
    _common(b)
    b.set_defaults(handler=cmd_dfr_build)
    c = dsub.add_parser("certify")
    c.add_argument("file")
    c.add_argument("--radius", type=int)
    c.add_argument("-o", "--output", help="defaults to rewriting the input file")
    _common(c)
    c.set_defaults(handler=cmd_dfr_certify)

    mach = sub.add_parser("machine", help="assemble, run, analyze or profile machines")
    msub = mach.add_subparsers(dest="action", required=True, parser_class=_Parser)
    mb = msub.add_parser("build")
    mb.add_argument("--dfr", required=True)
    mb.add_argument("--mode", required=True, choices=("poly", "exp", "unbounded", "mo1qfa"))
    mb.add_argument("--eps")
    mb.add_argument("--reading", choices=("square", "base"), default="square")
    mb.add_argument("--overgroup", help="coset table name (2Z_in_Z, Z_in_Dinf) or JSON file")
    mb.add_argument("-o", "--output")
    _common(mb)
    mb.set_defaults(handler=cmd_machine_build)
    for name, handler in (("run", cmd_machine_run), ("analyze", cmd_machine_analyze)):
        p = msub.add_parser(name)
        p.add_argument("file")
        p.add_argument("--word", required=True, help='comma-separated letters, e.g. "a,-a,b"')
        _common(p)
        p.set_defaults(handler=handler)
    mp = msub.add_parser("profile")
    mp.add_argument("file")
    mp.add_argument("--lengths", required=True, help="comma-separated word lengths")
    mp.add_argument("--claim", choices=("poly", "exp"), default="poly")
    mp.add_argument("--word", action="append", help="word to use at its length (repeatable)")
    _common(mp)
    mp.set_defaults(handler=cmd_machine_profile)

    v = sub.add_parser("verify", help="run acceptance suites")
    v.add_argument("suite", help=", ".join(SUITES))
    v.add_argument("--quick", action="store_true", help="reduced radii and trial counts")
    _common(v)
    v.set_defaults(handler=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        if cfg.threads:
            set_threads(cfg.threads)
        with mpmath.workprec(cfg.precision_bits):
            return args.handler(args, cfg)
    except UsageError as exc:
        print(f"wordqfa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"wordqfa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
