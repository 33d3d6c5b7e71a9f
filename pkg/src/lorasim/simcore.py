"""Analytical cycle and traffic models for WS / OS dataflows on an R x C array.

Weight-stationary holds a K_t x N_t weight tile in PE registers, streams the M
input rows through with skewed entry and collects outputs from the last
occupied row; partial sums accumulate across K-tiles in output SRAM at
accumulator width. Output-stationary holds an M_t x N_t output tile in PE
accumulators, broadcasts one input/weight vector pair per cycle for K cycles
and then drains one output row per cycle; the single accumulator set makes the
drain serialize with the next tile.

DRAM is a capacity model, not a timing model: transfers are assumed hidden
behind the double-buffered SRAM and only show up as energy. A tensor that fits
its SRAM partition moves once; one that does not is charged its full SRAM
access traffic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from lorasim.workload import GemmOp, Precision


class Dataflow(str, Enum):
    WS = "ws"
    OS = "os"


@dataclass(frozen=True)
class ArrayConfig:
    rows: int = 64
    cols: int = 64
    freq_mhz: float = 400.0
    # The PE datapath is INT8-native; wide-precision MACs issue at a fraction
    # of the native rate. Modeling constant, not a measured figure.
    fp32_mac_cycles: int = 2

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"array must be at least 1x1, got {self.rows}x{self.cols}")
        if self.freq_mhz <= 0:
            raise ValueError(f"freq_mhz must be positive, got {self.freq_mhz}")
        if self.fp32_mac_cycles < 1:
            raise ValueError("fp32_mac_cycles must be >= 1")


@dataclass(frozen=True)
class MemConfig:
    input_sram_bytes: int = 512 * 1024
    weight_sram_bytes: int = 512 * 1024
    output_sram_bytes: int = 1024 * 1024
    word_bytes_int8: int = 1
    word_bytes_fp32: int = 4
    accum_bytes: int = 4
    double_buffered: bool = True

    def __post_init__(self):
        sizes = (self.input_sram_bytes, self.weight_sram_bytes, self.output_sram_bytes,
                 self.word_bytes_int8, self.word_bytes_fp32, self.accum_bytes)
        if min(sizes) <= 0:
            raise ValueError("memory sizes and word widths must be positive")

    def word_bytes(self, precision: Precision) -> int:
        return self.word_bytes_int8 if precision == Precision.INT8 else self.word_bytes_fp32


def tile_extents(total: int, limit: int) -> tuple[int, ...]:
    """Split a dimension into full tiles of `limit` plus one edge remainder."""
    full, rem = divmod(total, limit)
    return (limit,) * full + ((rem,) if rem else ())


@dataclass(frozen=True)
class Tiling:
    """Per-dimension tile extents for one GEMM under one dataflow. Dimensions
    that are not mapped onto the array stay unsplit."""

    m_extents: tuple[int, ...]
    k_extents: tuple[int, ...]
    n_extents: tuple[int, ...]

    @classmethod
    def for_op(cls, op: GemmOp, array: ArrayConfig, dataflow: Dataflow) -> "Tiling":
        if dataflow == Dataflow.WS:
            return cls((op.m,), tile_extents(op.k, array.rows), tile_extents(op.n, array.cols))
        return cls(tile_extents(op.m, array.rows), (op.k,), tile_extents(op.n, array.cols))

    @property
    def tile_count(self) -> int:
        return len(self.m_extents) * len(self.k_extents) * len(self.n_extents)


@dataclass(frozen=True)
class Traffic:
    """SRAM word counts split by tensor class."""

    input: int = 0
    weight: int = 0
    output: int = 0

    @property
    def total(self) -> int:
        return self.input + self.weight + self.output


@dataclass(frozen=True)
class SimResult:
    dataflow: Dataflow
    cycles: int
    macs: int
    utilization: float
    sram_reads_words: Traffic
    sram_writes_words: Traffic
    sram_read_bytes: int
    sram_write_bytes: int
    dram_bytes: int

    def __post_init__(self):
        if not 0 < self.utilization <= 1 + 1e-12:
            raise ValueError(f"utilization out of (0, 1]: {self.utilization}")


def _issue_factor(op: GemmOp, array: ArrayConfig) -> int:
    return 1 if op.precision == Precision.INT8 else array.fp32_mac_cycles


def _dram_bytes(op: GemmOp, mem: MemConfig, reads: Traffic, writes: Traffic) -> int:
    """Footprint bytes per tensor if it fits its partition, otherwise its full
    SRAM access traffic spills off-chip."""
    wb = mem.word_bytes(op.precision)
    total = 0
    for footprint_words, word_b, partition, access_words in (
        (op.m * op.k, wb, mem.input_sram_bytes, reads.input),
        (op.k * op.n, wb, mem.weight_sram_bytes, reads.weight),
        (op.m * op.n, mem.accum_bytes, mem.output_sram_bytes, reads.output + writes.output),
    ):
        words = footprint_words if footprint_words * word_b <= partition else access_words
        total += words * word_b
    return total


def _finish(op: GemmOp, array: ArrayConfig, mem: MemConfig, dataflow: Dataflow,
            cycles: int, reads: Traffic, writes: Traffic) -> SimResult:
    wb = mem.word_bytes(op.precision)
    read_bytes = (reads.input + reads.weight) * wb + reads.output * mem.accum_bytes
    write_bytes = writes.output * mem.accum_bytes
    return SimResult(
        dataflow=dataflow,
        cycles=cycles,
        macs=op.macs,
        utilization=op.macs / (array.rows * array.cols * cycles),
        sram_reads_words=reads,
        sram_writes_words=writes,
        sram_read_bytes=read_bytes,
        sram_write_bytes=write_bytes,
        dram_bytes=_dram_bytes(op, mem, reads, writes),
    )


def simulate_ws(op: GemmOp, array: ArrayConfig, mem: MemConfig) -> SimResult:
    """Weight-stationary: per tile, preload one weight row per cycle, then a
    skewed stream of M + K_t + N_t - 2 cycles. With double buffering the next
    preload hides under the current stream and only its overhang is exposed.
    """
    tiling = Tiling.for_op(op, array, Dataflow.WS)
    issue = _issue_factor(op, array)
    cycles = 0
    prev_stream = None
    in_r = w_r = out_r = out_w = 0
    for n_t in tiling.n_extents:
        for ki, k_t in enumerate(tiling.k_extents):
            preload = k_t * issue
            stream = (op.m + k_t + n_t - 2) * issue
            if prev_stream is None or not mem.double_buffered:
                cycles += preload
            else:
                cycles += max(0, preload - prev_stream)
            cycles += stream
            prev_stream = stream
            w_r += k_t * n_t
            in_r += op.m * k_t
            out_w += op.m * n_t
            if ki > 0:
                out_r += op.m * n_t  # partial-sum read-modify-write
    reads = Traffic(input=in_r, weight=w_r, output=out_r)
    writes = Traffic(output=out_w)
    return _finish(op, array, mem, Dataflow.WS, cycles, reads, writes)


def simulate_os(op: GemmOp, array: ArrayConfig, mem: MemConfig) -> SimResult:
    """Output-stationary: per tile, K broadcast/accumulate cycles plus an M_t
    cycle drain; outputs are written exactly once at accumulator width."""
    tiling = Tiling.for_op(op, array, Dataflow.OS)
    issue = _issue_factor(op, array)
    cycles = 0
    in_r = w_r = out_w = 0
    for m_t in tiling.m_extents:
        for n_t in tiling.n_extents:
            cycles += (op.k + m_t) * issue
            in_r += op.k * m_t
            w_r += op.k * n_t
            out_w += m_t * n_t
    reads = Traffic(input=in_r, weight=w_r)
    writes = Traffic(output=out_w)
    return _finish(op, array, mem, Dataflow.OS, cycles, reads, writes)


def simulate(op: GemmOp, array: ArrayConfig, mem: MemConfig, dataflow: Dataflow) -> SimResult:
    return (simulate_ws if dataflow == Dataflow.WS else simulate_os)(op, array, mem)


def roofline_lower_bound(op: GemmOp, array: ArrayConfig) -> int:
    """Compute-bound floor: every PE busy every cycle."""
    return math.ceil(op.macs / (array.rows * array.cols))
