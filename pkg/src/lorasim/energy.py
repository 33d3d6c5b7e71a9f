"""Energy and energy-delay-product model on top of simulation results.

All constants are configurable; the shipped defaults are order-of-magnitude
45nm-class estimates, not measured silicon numbers. Ratios between runs are
the meaningful output: scaling every constant by a common factor scales every
energy (and EDP) by the same factor and leaves ratios untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

from lorasim.simcore import ArrayConfig, SimResult
from lorasim.workload import Precision


@dataclass(frozen=True)
class EnergyConfig:
    e_mac_int8: float = 0.3e-12     # J per MAC
    e_mac_fp32: float = 1.2e-12
    e_sram_read: float = 1.5e-12    # J per byte
    e_sram_write: float = 1.8e-12
    e_dram: float = 100e-12         # J per byte
    p_static: float = 0.35          # W, charged on active cycles

    def __post_init__(self):
        fields = (self.e_mac_int8, self.e_mac_fp32, self.e_sram_read,
                  self.e_sram_write, self.e_dram, self.p_static)
        if min(fields) < 0:
            raise ValueError("energy constants must be non-negative")
        if self.e_mac_int8 > self.e_mac_fp32:
            raise ValueError("e_mac_int8 must not exceed e_mac_fp32")

    def e_mac(self, precision: Precision) -> float:
        return self.e_mac_int8 if precision == Precision.INT8 else self.e_mac_fp32


def energy_of(result: SimResult, cfg: EnergyConfig, precision: Precision,
              freq_mhz: float) -> float:
    """Joules for one simulated GEMM: compute + SRAM + DRAM + static leakage
    over the op's active time."""
    seconds = result.cycles / (freq_mhz * 1e6)
    return (
        result.macs * cfg.e_mac(precision)
        + result.sram_read_bytes * cfg.e_sram_read
        + result.sram_write_bytes * cfg.e_sram_write
        + result.dram_bytes * cfg.e_dram
        + cfg.p_static * seconds
    )


def edp(energy_j: float, seconds: float) -> float:
    return energy_j * seconds


def peak_tops(array: ArrayConfig) -> float:
    """Peak throughput with one MAC (= 2 ops) per PE per cycle."""
    return 2 * array.rows * array.cols * array.freq_mhz * 1e6 / 1e12
