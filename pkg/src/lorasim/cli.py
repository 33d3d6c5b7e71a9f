"""Command-line front end. Parses flags, loads configs, dispatches to the same
API layer the HTTP service uses, and formats the results.

Exit codes: 0 success, 2 configuration error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from lorasim import api
from lorasim.configio import (
    default_hw_path,
    default_model_path,
    load_energy_config,
    load_hw_config,
    load_model_config,
)
from lorasim.errors import ConfigError, InvariantError
from lorasim.lora import run_training_demo
from lorasim.sched import Policy, report_to_csv, report_to_table, run_trace
from lorasim.workload import trace_to_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

_POLICIES = {p.value: p for p in Policy}


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_configs(args):
    model = load_model_config(args.model or default_model_path())
    array, mem, energy = load_hw_config(args.hw or default_hw_path())
    if getattr(args, "energy", None):
        energy = load_energy_config(args.energy)
    return model, array, mem, energy


def _report_json(report) -> str:
    payload = {
        "policy": report.policy.value,
        "cycles": report.cycles,
        "time_s": report.time_s,
        "macs": report.macs,
        "sram_read_bytes": report.sram_read_bytes,
        "sram_write_bytes": report.sram_write_bytes,
        "dram_bytes": report.dram_bytes,
        "energy_j": report.energy_j,
        "edp_js": report.edp_js,
        "achieved_tops": report.achieved_tops,
        "ops": [
            {
                "name": e.op.name, "layer_id": e.op.layer_id,
                "pass": e.op.pass_tag.value, "m": e.op.m, "k": e.op.k, "n": e.op.n,
                "precision": e.op.precision.value, "dataflow": e.result.dataflow.value,
                "cycles": e.result.cycles, "energy_j": e.energy_j,
            }
            for e in report.entries
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def cmd_simulate(args) -> int:
    model, array, mem, energy = _load_configs(args)
    trace = api.build_trace(model, args.variant)
    report = run_trace(trace, array, mem, energy, _POLICIES[args.policy])
    if args.format == "csv":
        _write(report_to_csv(report), args.out)
    elif args.format == "json":
        _write(_report_json(report), args.out)
    else:
        _write(report_to_table(report), args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    model, array, mem, energy = _load_configs(args)
    cmp = api.compare_configs(model, array, mem, energy)
    if args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["config", "cycles", "time_s", "energy_j", "edp_js"])
        for row in cmp.rows:
            writer.writerow([row.config, row.cycles, f"{row.time_s:.6e}",
                             f"{row.energy_j:.6e}", f"{row.edp_js:.6e}"])
        writer.writerow([])
        writer.writerow(["ratio", "measured", "reference"])
        ref = api.REFERENCE_RATIOS
        writer.writerow(["hybrid_vs_full_speedup", f"{cmp.hybrid_vs_full_speedup:.4f}",
                         ref["hybrid_vs_full_speedup"]])
        writer.writerow(["hybrid_vs_os_speedup", f"{cmp.hybrid_vs_os_speedup:.4f}",
                         ref["hybrid_vs_os_speedup"]])
        writer.writerow(["hybrid_vs_ws_speedup", f"{cmp.hybrid_vs_ws_speedup:.4f}",
                         ref["hybrid_vs_ws_speedup"]])
        writer.writerow(["edp_improvement_vs_full", f"{cmp.edp_improvement_vs_full:.4f}",
                         ref["edp_improvement_vs_full"]])
        _write(buf.getvalue(), args.out)
    elif args.format == "json":
        payload = {
            "rows": [vars(r) for r in cmp.rows],
            "ratios": {
                "hybrid_vs_full_speedup": cmp.hybrid_vs_full_speedup,
                "hybrid_vs_os_speedup": cmp.hybrid_vs_os_speedup,
                "hybrid_vs_ws_speedup": cmp.hybrid_vs_ws_speedup,
                "edp_improvement_vs_full": cmp.edp_improvement_vs_full,
            },
            "reference": dict(api.REFERENCE_RATIOS),
        }
        _write(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        lines = [f"{'config':<14} {'cycles':>14} {'time_s':>12} {'energy_j':>12} {'edp_js':>12}"]
        for row in cmp.rows:
            lines.append(f"{row.config:<14} {row.cycles:>14} {row.time_s:>12.4e} "
                         f"{row.energy_j:>12.4e} {row.edp_js:>12.4e}")
        lines.append("")
        lines.extend(cmp.ratio_lines())
        _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_train_demo(args) -> int:
    rows = run_training_demo(d1=args.d1, d2=args.d2, rank=args.rank,
                             steps=args.steps, bitwidth=args.q, seed=args.seed,
                             lr=args.lr)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["step", "loss_fp32", "loss_int8"])
    for step, loss_fp, loss_q in rows:
        writer.writerow([step, f"{loss_fp:.10e}", f"{loss_q:.10e}"])
    _write(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_trace_dump(args) -> int:
    model = load_model_config(args.model or default_model_path())
    trace = api.build_trace(model, args.variant)
    _write(trace_to_csv(trace), args.out)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("lorasim.service:app", host=args.host, port=args.port)
    return EXIT_OK


def _add_config_flags(p, energy=True):
    p.add_argument("--model", help="model config YAML (default: shipped SD-v1-like stack)")
    p.add_argument("--hw", help="hardware config YAML (default: shipped 64x64 @ 400 MHz)")
    if energy:
        p.add_argument("--energy", help="optional YAML whose energy section overrides --hw")


def _add_output_flags(p):
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=["table", "csv", "json"], default="table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lorasim",
                                     description="systolic-array simulator for quantized "
                                                 "low-rank fine-tuning workloads")
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomized commands")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one trace under one policy")
    _add_config_flags(p)
    p.add_argument("--policy", choices=sorted(_POLICIES), default="hybrid")
    p.add_argument("--variant", choices=["lora", "full"], default="lora")
    _add_output_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run the four baseline/adapter configurations")
    _add_config_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("train-demo", help="quantized vs full-precision adapter training")
    p.add_argument("--d1", type=int, default=16)
    p.add_argument("--d2", type=int, default=16)
    p.add_argument("--rank", type=int, default=4)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--q", type=int, default=8, help="quantization bitwidth")
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_train_demo)

    p = sub.add_parser("trace-dump", help="dump a GEMM trace as CSV")
    p.add_argument("--model", help="model config YAML")
    p.add_argument("--variant", choices=["lora", "full"], default="lora")
    p.add_argument("--out", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_trace_dump)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
