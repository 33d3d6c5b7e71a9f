"""GEMM traces for one training step of a cross-attention stack.

Two variants of the same stack: the dense fine-tuning baseline (trainable k/v
projections, FP32 everywhere) and the low-rank adapter variant (frozen
projections plus thin INT8 adapter GEMMs, no weight-gradient GEMMs). Only
GEMMs are traced; softmax, norms and element-wise work are outside the
modeled engine.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum


class Precision(str, Enum):
    INT8 = "int8"
    FP32 = "fp32"


class Pass(str, Enum):
    FORWARD = "fwd"
    BACKWARD = "bwd"
    UPDATE = "upd"


PROJECTIONS = ("q", "k", "v", "out")


@dataclass(frozen=True)
class GemmOp:
    """One M x K x N matrix-multiply job."""

    name: str
    m: int
    k: int
    n: int
    precision: Precision = Precision.INT8
    pass_tag: Pass = Pass.FORWARD
    layer_id: str = ""

    def __post_init__(self):
        if min(self.m, self.k, self.n) < 1:
            raise ValueError(f"GEMM dims must be >= 1, got {(self.m, self.k, self.n)}")

    @property
    def macs(self) -> int:
        return self.m * self.k * self.n


@dataclass(frozen=True)
class BlockSpec:
    """One cross-attention block shape; `count` is how many identical blocks the
    stack contains."""

    d_model: int
    d_context: int
    n_img: int
    n_txt: int
    count: int = 1
    name: str = ""

    def __post_init__(self):
        if min(self.d_model, self.d_context, self.n_img, self.n_txt, self.count) < 1:
            raise ValueError(f"block fields must be >= 1: {self}")
        if self.n_txt > 77:
            raise ValueError(f"n_txt must be <= 77, got {self.n_txt}")


@dataclass(frozen=True)
class ModelConfig:
    blocks: tuple[BlockSpec, ...]
    rank: int = 4
    lora_targets: tuple[str, ...] = ("k", "v")

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "lora_targets", tuple(self.lora_targets))
        if not self.blocks:
            raise ValueError("model config needs at least one block")
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        bad = [t for t in self.lora_targets if t not in PROJECTIONS]
        if bad:
            raise ValueError(f"unknown lora_targets {bad}; valid: {PROJECTIONS}")


def _proj_dims(block: BlockSpec, proj: str) -> tuple[int, int]:
    """(sequence length, input width) seen by a projection."""
    if proj in ("k", "v"):
        return block.n_txt, block.d_context
    return block.n_img, block.d_model


def _block_ops(block: BlockSpec, layer_id: str, cfg: ModelConfig, lora: bool) -> list[GemmOp]:
    prec = Precision.INT8 if lora else Precision.FP32
    d, ctx, ni, nt, r = block.d_model, block.d_context, block.n_img, block.n_txt, cfg.rank

    def op(name, m, k, n, pass_tag):
        return GemmOp(name, m, k, n, precision=prec, pass_tag=pass_tag, layer_id=layer_id)

    fwd, bwd = Pass.FORWARD, Pass.BACKWARD
    ops = [
        op("q_proj", ni, d, d, fwd),
        op("k_proj", nt, ctx, d, fwd),
        op("v_proj", nt, ctx, d, fwd),
    ]
    if lora:
        for t in cfg.lora_targets:
            seq, d_in = _proj_dims(block, t)
            ops.append(op(f"{t}_lora_down", seq, d_in, r, fwd))
            ops.append(op(f"{t}_lora_up", seq, r, d, fwd))
    ops += [
        op("attn_scores", ni, d, nt, fwd),   # Q . K^T
        op("attn_values", ni, nt, d, fwd),   # scores . V
        op("out_proj", ni, d, d, fwd),
    ]

    # Backward, in reverse layer order. Every frozen projection contributes a
    # dX GEMM only; only the dense baseline produces weight gradients.
    ops += [
        op("out_proj_dx", ni, d, d, bwd),
        op("attn_values_dscores", ni, d, nt, bwd),   # dOut . V^T
        op("attn_values_dv", nt, ni, d, bwd),        # scores^T . dOut
        op("attn_scores_dq", ni, nt, d, bwd),        # dScores . K
        op("attn_scores_dk", nt, ni, d, bwd),        # dScores^T . Q
        op("q_proj_dx", ni, d, d, bwd),
        op("k_proj_dx", nt, d, ctx, bwd),
        op("v_proj_dx", nt, d, ctx, bwd),
    ]
    if lora:
        for t in cfg.lora_targets:
            seq, d_in = _proj_dims(block, t)
            ops.append(op(f"{t}_lora_dmid", seq, d, r, bwd))    # dY . B
            ops.append(op(f"{t}_lora_da", d_in, seq, r, bwd))   # X^T . (dY B)
            ops.append(op(f"{t}_lora_db", d, seq, r, bwd))      # dY^T . (X A)
            ops.append(op(f"{t}_lora_dx", seq, r, d_in, bwd))   # (dY B) . A^T
    else:
        for t in ("k", "v"):
            ops.append(op(f"{t}_dw", ctx, nt, d, bwd))          # X^T . dY
            # SGD update: one multiply-accumulate per weight element.
            ops.append(op(f"{t}_update", ctx, 1, d, Pass.UPDATE))
    return ops


def _expand(cfg: ModelConfig, lora: bool) -> list[GemmOp]:
    trace = []
    for bi, block in enumerate(cfg.blocks):
        base = block.name or f"block{bi}_d{block.d_model}"
        for rep in range(block.count):
            trace.extend(_block_ops(block, f"{base}[{rep}]", cfg, lora))
    return trace


def build_lora_trace(cfg: ModelConfig) -> list[GemmOp]:
    """One training step of the adapter variant: all GEMMs INT8, frozen
    projections get dX but never dW."""
    return _expand(cfg, lora=True)


def build_full_finetune_trace(cfg: ModelConfig) -> list[GemmOp]:
    """One training step of the dense baseline: no adapter GEMMs, trainable k/v
    projections add dW and update ops, everything FP32."""
    return _expand(cfg, lora=False)


def trace_macs(trace: list[GemmOp]) -> int:
    return sum(op.macs for op in trace)


TRACE_CSV_COLUMNS = ("name", "layer_id", "pass", "M", "K", "N", "precision")


def trace_to_csv(trace: list[GemmOp]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(TRACE_CSV_COLUMNS)
    for op in trace:
        writer.writerow([op.name, op.layer_id, op.pass_tag.value, op.m, op.k, op.n, op.precision.value])
    return buf.getvalue()


def default_model_config() -> ModelConfig:
    """SD-v1-like cross-attention stack. Only n_txt=77 and the 4096-token image
    sequence are characterized dimensions; widths and counts follow the public
    architecture."""
    return ModelConfig(
        blocks=(
            BlockSpec(d_model=320, d_context=768, n_img=4096, n_txt=77, count=5, name="xattn_hi"),
            BlockSpec(d_model=640, d_context=768, n_img=1024, n_txt=77, count=5, name="xattn_mid"),
            BlockSpec(d_model=1280, d_context=768, n_img=256, n_txt=77, count=6, name="xattn_lo"),
        ),
        rank=4,
        lora_targets=("k", "v"),
    )
