"""Per-layer dataflow selection and whole-trace execution.

The hybrid policies evaluate both dataflows for every GEMM and keep the winner
(ties go to WS, deterministically). Layers execute serially, so trace totals
are plain sums of the per-op results.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum

from lorasim.energy import EnergyConfig, edp, energy_of
from lorasim.errors import InvariantError
from lorasim.simcore import ArrayConfig, Dataflow, MemConfig, SimResult, simulate_os, simulate_ws
from lorasim.workload import GemmOp


class Policy(str, Enum):
    FORCE_WS = "ws"
    FORCE_OS = "os"
    HYBRID_LATENCY = "hybrid"
    HYBRID_EDP = "hybrid-edp"


@dataclass(frozen=True)
class OpReport:
    op: GemmOp
    result: SimResult
    energy_j: float

    @property
    def dataflow(self) -> Dataflow:
        return self.result.dataflow


@dataclass(frozen=True)
class TraceReport:
    policy: Policy
    entries: tuple[OpReport, ...]
    cycles: int
    time_s: float
    macs: int
    sram_read_bytes: int
    sram_write_bytes: int
    dram_bytes: int
    energy_j: float
    edp_js: float
    achieved_tops: float


def select_dataflow(op: GemmOp, array: ArrayConfig, mem: MemConfig,
                    energy_cfg: EnergyConfig, policy: Policy) -> tuple[Dataflow, SimResult]:
    if policy == Policy.FORCE_WS:
        return Dataflow.WS, simulate_ws(op, array, mem)
    if policy == Policy.FORCE_OS:
        return Dataflow.OS, simulate_os(op, array, mem)
    ws = simulate_ws(op, array, mem)
    os_ = simulate_os(op, array, mem)
    if policy == Policy.HYBRID_LATENCY:
        better_os = os_.cycles < ws.cycles
    else:
        freq = array.freq_mhz * 1e6
        ws_edp = energy_of(ws, energy_cfg, op.precision, array.freq_mhz) * (ws.cycles / freq)
        os_edp = energy_of(os_, energy_cfg, op.precision, array.freq_mhz) * (os_.cycles / freq)
        better_os = os_edp < ws_edp
    return (Dataflow.OS, os_) if better_os else (Dataflow.WS, ws)


def run_trace(trace: list[GemmOp], array: ArrayConfig, mem: MemConfig,
              energy_cfg: EnergyConfig, policy: Policy) -> TraceReport:
    if not trace:
        raise ValueError("cannot run an empty trace")
    entries = []
    for op in trace:
        _, result = select_dataflow(op, array, mem, energy_cfg, policy)
        entries.append(OpReport(op=op, result=result,
                                energy_j=energy_of(result, energy_cfg, op.precision, array.freq_mhz)))
    cycles = sum(e.result.cycles for e in entries)
    macs = sum(e.op.macs for e in entries)
    time_s = cycles / (array.freq_mhz * 1e6)
    energy = sum(e.energy_j for e in entries)
    report = TraceReport(
        policy=policy,
        entries=tuple(entries),
        cycles=cycles,
        time_s=time_s,
        macs=macs,
        sram_read_bytes=sum(e.result.sram_read_bytes for e in entries),
        sram_write_bytes=sum(e.result.sram_write_bytes for e in entries),
        dram_bytes=sum(e.result.dram_bytes for e in entries),
        energy_j=energy,
        edp_js=edp(energy, time_s),
        achieved_tops=2 * macs / time_s / 1e12,
    )
    if report.cycles != sum(e.result.cycles for e in report.entries):
        raise InvariantError("trace totals drifted from per-op sums")
    return report


REPORT_CSV_COLUMNS = (
    "name", "layer_id", "pass", "M", "K", "N", "precision", "dataflow",
    "cycles", "macs", "utilization", "sram_read_bytes", "sram_write_bytes",
    "dram_bytes", "energy_j",
)


def report_to_csv(report: TraceReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(REPORT_CSV_COLUMNS)
    for e in report.entries:
        op, r = e.op, e.result
        writer.writerow([
            op.name, op.layer_id, op.pass_tag.value, op.m, op.k, op.n,
            op.precision.value, r.dataflow.value, r.cycles, r.macs,
            f"{r.utilization:.6f}", r.sram_read_bytes, r.sram_write_bytes,
            r.dram_bytes, f"{e.energy_j:.6e}",
        ])
    writer.writerow([
        "TOTAL", "", "", "", "", "", "", report.policy.value, report.cycles,
        report.macs, "", report.sram_read_bytes, report.sram_write_bytes,
        report.dram_bytes, f"{report.energy_j:.6e}",
    ])
    return buf.getvalue()


def report_to_table(report: TraceReport) -> str:
    lines = [
        f"policy: {report.policy.value}",
        f"{'name':<22} {'layer':<16} {'pass':<4} {'df':<3} {'M':>6} {'K':>6} {'N':>6} "
        f"{'cycles':>10} {'util':>6}",
    ]
    for e in report.entries:
        op, r = e.op, e.result
        lines.append(
            f"{op.name:<22} {op.layer_id:<16} {op.pass_tag.value:<4} {r.dataflow.value:<3} "
            f"{op.m:>6} {op.k:>6} {op.n:>6} {r.cycles:>10} {r.utilization:>6.3f}"
        )
    lines += [
        "-" * 90,
        f"total cycles   : {report.cycles}",
        f"time           : {report.time_s:.6e} s",
        f"macs           : {report.macs}",
        f"sram read/write: {report.sram_read_bytes} / {report.sram_write_bytes} bytes",
        f"dram traffic   : {report.dram_bytes} bytes",
        f"energy         : {report.energy_j:.6e} J",
        f"EDP            : {report.edp_js:.6e} J*s",
        f"achieved TOPS  : {report.achieved_tops:.4f}",
    ]
    return "\n".join(lines) + "\n"
