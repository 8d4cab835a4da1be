"""Command-line front end.

Subcommands::

    qudcomp synth UNITARY.json --d 3 --method hybrid --epsilon 0.05 -o circuit.json
    qudcomp compile CIRCUIT.json --method csd -o compiled.json
    qudcomp map CIRCUIT.json --target-dim 2 -o mapped.json
    qudcomp simulate CIRCUIT.json --shots 10000 --seed 7 -o counts.json
    qudcomp bench BENCH.json -o bench.csv

Exit codes: 0 on success, 1 when synthesis or a numerical contract fails,
2 for bad input (flags, unreadable files, schema violations).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time

import numpy as np

from .config import resolve
from .errors import NumericalError, QudcompError, SchemaError, SizeGuardError
from .ir import Circuit
from .linalg import matrix_from_json, random_unitary
from .pipeline import CSV_HEADER, CompileOptions, Method, compile_circuit, compile_unitary, retarget_circuit
from .sim import distribution, run_statevector, sample
from .synth_csd import csd_qudit
from .synth_sk import ApproximationTable, default_table

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad flags or unreadable input; maps to exit code 2."""


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (np.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _int_at_least(lo):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"expected an integer >= {lo}, got {v}")
        return v

    return parse


def _add_compile_flags(p, default_method="hybrid"):
    p.add_argument("--method", choices=[m.value for m in Method], default=default_method)
    p.add_argument("--epsilon", type=_positive_float, default=0.05)
    p.add_argument("--sk-depth", type=_int_at_least(0), default=8)
    p.add_argument("--table", help="SK table file (.npz); loaded when present, written otherwise")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qudcomp", description="Qudit circuit compiler")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a circuit from a unitary")
    p.add_argument("unitary", help='JSON file {"dim", "re", "im"} (row-major)')
    p.add_argument("--d", type=_int_at_least(2), required=True, help="qudit dimension")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--report", help="write the compile report here (default: stdout)")
    p.add_argument("--dump-ir", action="store_true", help="include the raw CSD factor list in the report")
    _add_compile_flags(p)

    p = sub.add_parser("compile", help="compile every gate of a circuit")
    p.add_argument("circuit")
    p.add_argument("-o", "--output", required=True)
    _add_compile_flags(p)

    p = sub.add_parser("map", help="retarget a circuit to another qudit dimension")
    p.add_argument("circuit")
    p.add_argument("--target-dim", type=_int_at_least(2), required=True)
    p.add_argument("--placement", choices=["leading", "trailing"], default="leading")
    p.add_argument("-o", "--output", required=True)
    _add_compile_flags(p)

    p = sub.add_parser("simulate", help="sample measurement counts")
    p.add_argument("circuit")
    p.add_argument("--shots", type=_int_at_least(1), default=1024)
    p.add_argument("--seed", type=_int_at_least(0), default=0)
    p.add_argument("-o", "--output", help="counts JSON (default: stdout)")

    p = sub.add_parser("bench", help="time synthesis methods on random unitaries")
    p.add_argument("config", help='JSON {"d", "n", "methods", "trials", "seed", "epsilon"}')
    p.add_argument("-o", "--output", help="CSV file (default: stdout)")
    p.add_argument("--sk-depth", type=_int_at_least(0), default=8)
    return parser


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _write_text(path, text):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1) + "\n"


def _load_table(path, d):
    if path is None:
        return None
    if os.path.exists(path):
        try:
            table = ApproximationTable.load(path)
        except (OSError, ValueError, KeyError) as exc:
            raise InputError(f"cannot load table {path}: {exc}") from None
        if table.dims != (d,):
            raise InputError(f"table {path} is for dims {table.dims}, need ({d},)")
        return table
    return None


def _table_for(args, d):
    table = _load_table(args.table, d)
    if table is None and args.table is not None and args.method != "csd":
        table = default_table(d)
        table.save(args.table)
    return table


def _options(args, table=None) -> CompileOptions:
    return CompileOptions(method=args.method, epsilon=args.epsilon, sk_depth=args.sk_depth, table=table)


def cmd_synth(args) -> int:
    U = matrix_from_json(_read_json(args.unitary), "$")
    table = _table_for(args, args.d)
    circuit, report = compile_unitary(U, args.d, _options(args, table))
    out = report.to_json()
    if args.dump_ir:
        out["factors"] = [f.to_json() for f in csd_qudit(U, args.d, resolve(None))]
    _write_text(args.output, _dump(circuit.to_json()))
    _write_text(args.report, _dump(out))
    return EXIT_OK


def _single_dim(circuit: Circuit) -> int | None:
    dims = set(circuit.dims)
    return dims.pop() if len(dims) == 1 else None


def cmd_compile(args) -> int:
    circuit = Circuit.from_json(_read_json(args.circuit))
    d = _single_dim(circuit)
    table = _table_for(args, d) if d is not None else None
    compiled, reports = compile_circuit(circuit, _options(args, table))
    _write_text(args.output, _dump(compiled.to_json()))
    return EXIT_OK


def cmd_map(args) -> int:
    circuit = Circuit.from_json(_read_json(args.circuit))
    table = _table_for(args, args.target_dim)
    mapped = retarget_circuit(circuit, args.target_dim, _options(args, table), placement=args.placement)
    _write_text(args.output, _dump(mapped.to_json()))
    return EXIT_OK


def cmd_simulate(args) -> int:
    circuit = Circuit.from_json(_read_json(args.circuit))
    state = run_statevector(circuit)
    if circuit.measured:
        out = sample(state, circuit.measured, args.shots, args.seed).to_json()
    else:
        out = {"mode": "distribution", "measured": list(circuit.ids), "probabilities": distribution(state)}
    _write_text(args.output, _dump(out))
    return EXIT_OK


def _bench_spec(obj) -> dict:
    if not isinstance(obj, dict):
        raise SchemaError("$: expected an object")
    spec = {"methods": ["sk", "csd", "hybrid"], "trials": 1, "seed": 0, "epsilon": 0.05}
    spec.update(obj)
    for key in ("d", "n", "trials", "seed"):
        v = spec.get(key)
        if isinstance(v, bool) or not isinstance(v, int):
            raise SchemaError(f"$.{key}: expected an integer")
    if spec["d"] < 2 or spec["n"] < 1 or spec["trials"] < 0 or spec["seed"] < 0:
        raise SchemaError("$: need d >= 2, n >= 1, trials >= 0, seed >= 0")
    if not isinstance(spec["epsilon"], (int, float)) or not spec["epsilon"] > 0:
        raise SchemaError("$.epsilon: expected a positive number")
    if not isinstance(spec["methods"], list):
        raise SchemaError("$.methods: expected a list")
    for k, m in enumerate(spec["methods"]):
        if m not in [x.value for x in Method]:
            raise SchemaError(f"$.methods[{k}]: unknown method {m!r}")
    return spec


def bench_rows(spec: dict, sk_depth: int = 8) -> list[list]:
    """One CSV row per (trial, method); failures put ``fail`` in the distance column.

    Trial ``t`` uses the unitary drawn from ``default_rng([seed, t])``. The
    shared single-qudit table is built before timing starts.
    """
    d, n, eps = spec["d"], spec["n"], float(spec["epsilon"])
    if any(m != "csd" for m in spec["methods"]):
        default_table(d)
    rows = []
    for t in range(spec["trials"]):
        U = random_unitary(d**n, np.random.default_rng([spec["seed"], t]))
        for method in spec["methods"]:
            opts = CompileOptions(method=method, epsilon=eps, sk_depth=sk_depth)
            t0 = time.perf_counter()
            try:
                _, report = compile_unitary(U, d, opts)
                rows.append(report.csv_row(t))
            except (NumericalError, SizeGuardError) as exc:
                ms = (time.perf_counter() - t0) * 1e3
                print(f"trial {t} {method}: {exc}", file=sys.stderr)
                rows.append([method, d, n, t, eps, "", "", f"{ms:.3f}", "", "", "", "fail"])
    return rows


def cmd_bench(args) -> int:
    spec = _bench_spec(_read_json(args.config))
    rows = bench_rows(spec, args.sk_depth)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(rows)
    _write_text(args.output, buf.getvalue())
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "compile": cmd_compile, "map": cmd_map, "simulate": cmd_simulate, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"qudcomp: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, SizeGuardError) as exc:
        print(f"qudcomp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (QudcompError, ValueError) as exc:
        print(f"qudcomp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
