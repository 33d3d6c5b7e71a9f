"""Orchestration layer shared by the HTTP service and the CLI.

Functions here take fully-built config objects and return plain result
objects; file I/O and wire formats live in the callers.
"""

from __future__ import annotations

from dataclasses import dataclass

from lorasim.energy import EnergyConfig
from lorasim.sched import Policy, TraceReport, run_trace
from lorasim.simcore import ArrayConfig, MemConfig
from lorasim.workload import (
    GemmOp,
    ModelConfig,
    build_full_finetune_trace,
    build_lora_trace,
)

# Published evaluation figures for the modeled design, printed next to
# measured ratios so compare output is self-describing.
REFERENCE_RATIOS = {
    "hybrid_vs_full_speedup": 1.81,
    "hybrid_vs_os_speedup": 1.22,
    "hybrid_vs_ws_speedup": 1.27,
    "edp_improvement_vs_full": 5.5,
}

COMPARE_CONFIGS = ("full-fp32", "lora-os", "lora-ws", "lora-hybrid")


def simulate_model(model: ModelConfig, array: ArrayConfig, mem: MemConfig,
                   energy: EnergyConfig, policy: Policy,
                   variant: str = "lora") -> TraceReport:
    trace = build_trace(model, variant)
    return run_trace(trace, array, mem, energy, policy)


def build_trace(model: ModelConfig, variant: str = "lora") -> list[GemmOp]:
    if variant == "lora":
        return build_lora_trace(model)
    if variant == "full":
        return build_full_finetune_trace(model)
    raise ValueError(f"unknown trace variant {variant!r}; expected 'lora' or 'full'")


@dataclass(frozen=True)
class ComparisonRow:
    config: str
    cycles: int
    time_s: float
    energy_j: float
    edp_js: float


@dataclass(frozen=True)
class Comparison:
    rows: tuple[ComparisonRow, ...]
    hybrid_vs_full_speedup: float
    hybrid_vs_os_speedup: float
    hybrid_vs_ws_speedup: float
    edp_improvement_vs_full: float

    def ratio_lines(self) -> list[str]:
        ref = REFERENCE_RATIOS
        return [
            f"speedup hybrid vs full-fp32 : {self.hybrid_vs_full_speedup:6.3f}x  "
            f"(reference {ref['hybrid_vs_full_speedup']}x)",
            f"speedup hybrid vs lora-os   : {self.hybrid_vs_os_speedup:6.3f}x  "
            f"(reference {ref['hybrid_vs_os_speedup']}x)",
            f"speedup hybrid vs lora-ws   : {self.hybrid_vs_ws_speedup:6.3f}x  "
            f"(reference {ref['hybrid_vs_ws_speedup']}x)",
            f"EDP improvement vs full-fp32: {self.edp_improvement_vs_full:6.3f}x  "
            f"(reference {ref['edp_improvement_vs_full']}x)",
        ]


def compare_configs(model: ModelConfig, array: ArrayConfig, mem: MemConfig,
                    energy: EnergyConfig) -> Comparison:
    """Run the dense-FP32 baseline and the three adapter configurations on one
    model and derive speedup / EDP-improvement ratios versus the baseline.

    The baseline runs under the hybrid scheduler as well, so the ratios
    isolate workload and precision effects rather than scheduler quality.
    """
    full_trace = build_full_finetune_trace(model)
    lora_trace = build_lora_trace(model)
    reports = {
        "full-fp32": run_trace(full_trace, array, mem, energy, Policy.HYBRID_LATENCY),
        "lora-os": run_trace(lora_trace, array, mem, energy, Policy.FORCE_OS),
        "lora-ws": run_trace(lora_trace, array, mem, energy, Policy.FORCE_WS),
        "lora-hybrid": run_trace(lora_trace, array, mem, energy, Policy.HYBRID_LATENCY),
    }
    rows = tuple(
        ComparisonRow(config=name, cycles=r.cycles, time_s=r.time_s,
                      energy_j=r.energy_j, edp_js=r.edp_js)
        for name, r in reports.items()
    )
    hybrid = reports["lora-hybrid"]
    return Comparison(
        rows=rows,
        hybrid_vs_full_speedup=reports["full-fp32"].time_s / hybrid.time_s,
        hybrid_vs_os_speedup=reports["lora-os"].time_s / hybrid.time_s,
        hybrid_vs_ws_speedup=reports["lora-ws"].time_s / hybrid.time_s,
        edp_improvement_vs_full=reports["full-fp32"].edp_js / hybrid.edp_js,
    )
