"""``tsopt`` command line.

Exit codes: 0 success, 1 usage error, 2 diagnostics (or a failed check),
3 null circuit.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import classical, fileformat, metrics, oracle
from .circuit import evaluate
from .linalg import EPS_HERM, EPS_PROB, EPS_PSD, StructuralError
from .operations import NULL_EPS, is_standard
from .symmetry import STable, reverse_circuit

EXIT_OK, EXIT_USAGE, EXIT_DIAG, EXIT_NULL = 0, 1, 2, 3
DEFAULT_SEED = 0
DEFAULT_TOL = 1e-9


@dataclass
class RunConfig:
    command: str
    inputs: list = field(default_factory=list)
    seed: int = DEFAULT_SEED
    json: bool = False
    tol: float = DEFAULT_TOL
    s_matrix: str | None = None
    transpose: bool = False

    def tolerances(self) -> dict:
        return {"tol": self.tol, "hermitian": EPS_HERM, "psd": EPS_PSD,
                "probability": EPS_PROB, "null_eps": NULL_EPS}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=DEFAULT_SEED)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL)

    p = _Parser(prog="tsopt", description="Generalized operational circuits with time-symmetric rules.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, helptext in (("eval", "print the joint outcome distribution"),
                           ("check", "report diagnostics only"),
                           ("classify", "standard / non-standard per operation, null per circuit"),
                           ("oracle-check", "compare the engine against brute-force enumeration")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("file")
    r = sub.add_parser("reverse", parents=[common], help="emit the time-reversed circuit document")
    r.add_argument("file")
    r.add_argument("--s-matrix", dest="s_matrix")
    r.add_argument("--transpose", action="store_true")
    d = sub.add_parser("distance", parents=[common], help="distance between two states or effects")
    d.add_argument("file")
    c = sub.add_parser("classical-demo", parents=[common], help="random-bit example")
    c.add_argument("--p", type=float, required=True)
    c.add_argument("--q", type=float, required=True)
    return p


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _diagnose(exc: fileformat.CircuitParseError, cfg: RunConfig, out) -> int:
    if cfg.json:
        print(_dump({"diagnostics": [d.to_dict() for d in exc.diagnostics], "tolerances": cfg.tolerances()}), file=out)
    else:
        for d in exc.diagnostics:
            print(f"{cfg.inputs[0]}:{d}", file=out)
    return EXIT_DIAG


def _distribution_doc(dist, cfg) -> dict:
    return {"nodes": list(dist.nodes), "outcomes": [[str(o) for o in os] for os in dist.outcomes],
            "null": dist.null, "table": np.asarray(dist.table).tolist(), "tolerances": cfg.tolerances()}


def _table_text(dist) -> list[str]:
    lines = ["  ".join(dist.nodes) + "  p"]
    for labels, p in dist.items():
        lines.append("  ".join(str(l) for l in labels) + "  " + _fmt(p))
    return lines


def cmd_eval(cfg, circuit, out) -> int:
    dist = evaluate(circuit)
    if cfg.json:
        print(_dump(_distribution_doc(dist, cfg)), file=out)
    else:
        print("null circuit" if dist.null else "\n".join(_table_text(dist)), file=out)
    return EXIT_NULL if dist.null else EXIT_OK


def cmd_check(cfg, circuit, out) -> int:
    if cfg.json:
        print(_dump({"diagnostics": [], "tolerances": cfg.tolerances()}), file=out)
    else:
        print(f"{cfg.inputs[0]}: ok", file=out)
    return EXIT_OK


def cmd_classify(cfg, circuit, out) -> int:
    per_op = {n.name: ("standard" if is_standard(n.operation, cfg.tol) else "non-standard") for n in circuit.nodes}
    null = evaluate(circuit).null
    if cfg.json:
        print(_dump({"operations": per_op, "circuit": "null" if null else "ok", "tolerances": cfg.tolerances()}),
              file=out)
    else:
        for name, verdict in per_op.items():
            print(f"{name}: {verdict}", file=out)
        print(f"circuit: {'null' if null else 'ok'}", file=out)
    return EXIT_NULL if null else EXIT_OK


def cmd_reverse(cfg, circuit, out) -> int:
    table = STable(transpose=cfg.transpose)
    if cfg.s_matrix:
        sdoc = fileformat.parse_s_matrix(_read(cfg.s_matrix))
        if sdoc["kind"] != "II":
            raise StructuralError("time reversal needs a Type II S-matrix document")
        transpose = cfg.transpose or bool(sdoc["transpose"])
        table = STable(sdoc["matrices"], sdoc["bases"], transpose)
    print(fileformat.serialize_circuit(reverse_circuit(circuit, table)), end="", file=out)
    return EXIT_OK


def cmd_oracle_check(cfg, circuit, out) -> int:
    dist = evaluate(circuit)
    ref = oracle.enumerate_circuit(circuit)
    dev = oracle.max_deviation(ref, dist.table)
    agree = dev <= cfg.tol and ref.null == dist.null
    if cfg.json:
        print(_dump({"max_deviation": dev, "engine_null": dist.null, "oracle_null": ref.null,
                     "agree": agree, "tolerances": cfg.tolerances()}), file=out)
    else:
        print(f"max deviation: {dev:.3e}", file=out)
        print(f"null: engine={dist.null} oracle={ref.null}", file=out)
        print("agree" if agree else "DISAGREE", file=out)
    return EXIT_OK if agree else EXIT_DIAG


def cmd_distance(cfg, out) -> int:
    kind, (a, b) = fileformat.parse_pairs(_read(cfg.inputs[0]))
    sc = metrics.SearchConfig(seed=cfg.seed)
    rep = (metrics.state_distance if kind == "state" else metrics.effect_distance)(a, b, sc)
    doc = {"kind": kind, **rep.to_dict(), "tolerances": cfg.tolerances(),
           "search": {"restarts": sc.restarts, "iterations": sc.iterations, "seed": sc.seed}}
    if cfg.json:
        print(_dump(doc), file=out)
    else:
        label = "distance" if rep.exact else "distance lower bound"
        print(f"{label}: {_fmt(rep.lower_bound)} ({rep.method})", file=out)
    return EXIT_OK


def cmd_classical(cfg, p, q, out) -> int:
    joint = classical.bit_joint(p, q)
    bits = classical.bit_distribution(p, q)
    doc = {"p": p, "q": q, "joint": joint.tolist(), "bit_distribution": list(bits),
           "tolerances": cfg.tolerances()}
    report = None
    if 0 < p < 1:
        report = classical.bayes_update_scenario(p, q)
        doc["bayes"] = {"three_outcome_table": report.joint_three.tolist(),
                        "updated_table": report.updated_joint.tolist(),
                        "checks": report.checks, "tol": report.tol}
    if cfg.json:
        print(_dump(doc), file=out)
        return EXIT_OK
    print("joint p(i, j)", file=out)
    for i, row in enumerate(joint):
        print(f"  i={i}  " + "  ".join(f"{v:>14.12f}" for v in row), file=out)
    print(f"p(X=0) = {bits[0]:.12f}   p(X=1) = {bits[1]:.12f}", file=out)
    if report is not None:
        print("three-outcome table p(i, k)", file=out)
        for i, row in enumerate(report.joint_three):
            print(f"  i={i}  " + "  ".join(f"{v:>14.12f}" for v in row), file=out)
        for name, ok in report.checks.items():
            print(f"  {name:<22} {'pass' if ok else 'FAIL'}", file=out)
    return EXIT_OK


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = RunConfig(args.command, [getattr(args, "file", None)] if hasattr(args, "file") else [],
                    args.seed, args.json, args.tol, getattr(args, "s_matrix", None),
                    getattr(args, "transpose", False))
    try:
        if cfg.command == "classical-demo":
            return cmd_classical(cfg, args.p, args.q, out)
        if cfg.command == "distance":
            return cmd_distance(cfg, out)
        circuit = fileformat.parse_circuit(_read(cfg.inputs[0]))
        handler = {"eval": cmd_eval, "check": cmd_check, "classify": cmd_classify,
                   "reverse": cmd_reverse, "oracle-check": cmd_oracle_check}[cfg.command]
        return handler(cfg, circuit, out)
    except fileformat.CircuitParseError as exc:
        return _diagnose(exc, cfg, out)
    except OSError as exc:
        print(f"tsopt: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StructuralError, ValueError, oracle.OracleRefusal) as exc:
        print(f"tsopt: {exc}", file=sys.stderr)
        return EXIT_DIAG


def main() -> None:
    sys.exit(run())
