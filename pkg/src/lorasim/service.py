"""HTTP service exposing the simulator; request/response models mirror the
YAML config schema so payloads and files stay interchangeable."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from lorasim import __version__, api
from lorasim.energy import EnergyConfig
from lorasim.lora import run_training_demo
from lorasim.sched import Policy, run_trace
from lorasim.simcore import ArrayConfig, MemConfig
from lorasim.workload import BlockSpec, ModelConfig


class ArrayModel(BaseModel):
    rows: int = 64
    cols: int = 64
    freq_mhz: float = 400.0
    fp32_mac_cycles: int = 2


class MemModel(BaseModel):
    input_sram_kib: int = 512
    weight_sram_kib: int = 512
    output_sram_kib: int = 1024
    double_buffered: bool = True


class EnergyModel(BaseModel):
    mac_int8_pj: float = 0.3
    mac_fp32_pj: float = 1.2
    sram_read_pj_per_byte: float = 1.5
    sram_write_pj_per_byte: float = 1.8
    dram_pj_per_byte: float = 100.0
    static_w: float = 0.35


class HwModel(BaseModel):
    array: ArrayModel = ArrayModel()
    mem: MemModel = MemModel()
    energy: EnergyModel = EnergyModel()


class BlockModel(BaseModel):
    d_model: int
    d_context: int
    n_img: int
    n_txt: int = 77
    count: int = 1
    name: str = ""


class ModelConfigModel(BaseModel):
    rank: int = 4
    lora_targets: list[str] = ["k", "v"]
    blocks: list[BlockModel]


def _to_model(m: ModelConfigModel | None) -> ModelConfig:
    if m is None:
        from lorasim.workload import default_model_config
        return default_model_config()
    try:
        return ModelConfig(
            blocks=tuple(BlockSpec(**b.model_dump()) for b in m.blocks),
            rank=m.rank,
            lora_targets=tuple(t.lower() for t in m.lora_targets),
        )
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _to_hw(h: HwModel | None) -> tuple[ArrayConfig, MemConfig, EnergyConfig]:
    h = h or HwModel()
    try:
        array = ArrayConfig(rows=h.array.rows, cols=h.array.cols,
                            freq_mhz=h.array.freq_mhz,
                            fp32_mac_cycles=h.array.fp32_mac_cycles)
        mem = MemConfig(input_sram_bytes=h.mem.input_sram_kib * 1024,
                        weight_sram_bytes=h.mem.weight_sram_kib * 1024,
                        output_sram_bytes=h.mem.output_sram_kib * 1024,
                        double_buffered=h.mem.double_buffered)
        pj = 1e-12
        energy = EnergyConfig(e_mac_int8=h.energy.mac_int8_pj * pj,
                              e_mac_fp32=h.energy.mac_fp32_pj * pj,
                              e_sram_read=h.energy.sram_read_pj_per_byte * pj,
                              e_sram_write=h.energy.sram_write_pj_per_byte * pj,
                              e_dram=h.energy.dram_pj_per_byte * pj,
                              p_static=h.energy.static_w)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return array, mem, energy


class OpRow(BaseModel):
    name: str
    layer_id: str
    pass_tag: str
    m: int
    k: int
    n: int
    precision: str
    dataflow: str
    cycles: int
    macs: int
    utilization: float
    sram_read_bytes: int
    sram_write_bytes: int
    dram_bytes: int
    energy_j: float


class SimulateRequest(BaseModel):
    model: ModelConfigModel | None = None
    hw: HwModel | None = None
    policy: Policy = Policy.HYBRID_LATENCY
    variant: str = "lora"
    include_ops: bool = True


class SimulateResponse(BaseModel):
    policy: str
    cycles: int
    time_s: float
    macs: int
    sram_read_bytes: int
    sram_write_bytes: int
    dram_bytes: int
    energy_j: float
    edp_js: float
    achieved_tops: float
    ops: list[OpRow] = Field(default_factory=list)


class CompareRequest(BaseModel):
    model: ModelConfigModel | None = None
    hw: HwModel | None = None


class ComparisonRowModel(BaseModel):
    config: str
    cycles: int
    time_s: float
    energy_j: float
    edp_js: float


class CompareResponse(BaseModel):
    rows: list[ComparisonRowModel]
    hybrid_vs_full_speedup: float
    hybrid_vs_os_speedup: float
    hybrid_vs_ws_speedup: float
    edp_improvement_vs_full: float
    reference: dict[str, float]


class TrainDemoRequest(BaseModel):
    d1: int = 16
    d2: int = 16
    rank: int = 4
    steps: int = 200
    bitwidth: int = 8
    seed: int = 0
    lr: float = 0.002


class TrainDemoRow(BaseModel):
    step: int
    loss_fp32: float
    loss_quant: float


class TrainDemoResponse(BaseModel):
    rows: list[TrainDemoRow]


class TraceDumpRequest(BaseModel):
    model: ModelConfigModel | None = None
    variant: str = "lora"


class TraceOpModel(BaseModel):
    name: str
    layer_id: str
    pass_tag: str
    m: int
    k: int
    n: int
    precision: str


class TraceDumpResponse(BaseModel):
    ops: list[TraceOpModel]
    total_macs: int


app = FastAPI(title="lorasim", version=__version__)


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest) -> SimulateResponse:
    model = _to_model(req.model)
    array, mem, energy = _to_hw(req.hw)
    try:
        trace = api.build_trace(model, req.variant)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    report = run_trace(trace, array, mem, energy, req.policy)
    ops = []
    if req.include_ops:
        ops = [
            OpRow(name=e.op.name, layer_id=e.op.layer_id, pass_tag=e.op.pass_tag.value,
                  m=e.op.m, k=e.op.k, n=e.op.n, precision=e.op.precision.value,
                  dataflow=e.result.dataflow.value, cycles=e.result.cycles,
                  macs=e.result.macs, utilization=e.result.utilization,
                  sram_read_bytes=e.result.sram_read_bytes,
                  sram_write_bytes=e.result.sram_write_bytes,
                  dram_bytes=e.result.dram_bytes, energy_j=e.energy_j)
            for e in report.entries
        ]
    return SimulateResponse(
        policy=report.policy.value, cycles=report.cycles, time_s=report.time_s,
        macs=report.macs, sram_read_bytes=report.sram_read_bytes,
        sram_write_bytes=report.sram_write_bytes, dram_bytes=report.dram_bytes,
        energy_j=report.energy_j, edp_js=report.edp_js,
        achieved_tops=report.achieved_tops, ops=ops,
    )


@app.post("/compare", response_model=CompareResponse)
def compare(req: CompareRequest) -> CompareResponse:
    model = _to_model(req.model)
    array, mem, energy = _to_hw(req.hw)
    cmp = api.compare_configs(model, array, mem, energy)
    return CompareResponse(
        rows=[ComparisonRowModel(**vars(r)) for r in cmp.rows],
        hybrid_vs_full_speedup=cmp.hybrid_vs_full_speedup,
        hybrid_vs_os_speedup=cmp.hybrid_vs_os_speedup,
        hybrid_vs_ws_speedup=cmp.hybrid_vs_ws_speedup,
        edp_improvement_vs_full=cmp.edp_improvement_vs_full,
        reference=dict(api.REFERENCE_RATIOS),
    )


@app.post("/train-demo", response_model=TrainDemoResponse)
def train_demo(req: TrainDemoRequest) -> TrainDemoResponse:
    try:
        rows = run_training_demo(d1=req.d1, d2=req.d2, rank=req.rank,
                                 steps=req.steps, bitwidth=req.bitwidth,
                                 seed=req.seed, lr=req.lr)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return TrainDemoResponse(
        rows=[TrainDemoRow(step=s, loss_fp32=lf, loss_quant=lq) for s, lf, lq in rows]
    )


@app.post("/trace-dump", response_model=TraceDumpResponse)
def trace_dump(req: TraceDumpRequest) -> TraceDumpResponse:
    model = _to_model(req.model)
    try:
        trace = api.build_trace(model, req.variant)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return TraceDumpResponse(
        ops=[TraceOpModel(name=o.name, layer_id=o.layer_id, pass_tag=o.pass_tag.value,
                          m=o.m, k=o.k, n=o.n, precision=o.precision.value)
             for o in trace],
        total_macs=sum(o.macs for o in trace),
    )
