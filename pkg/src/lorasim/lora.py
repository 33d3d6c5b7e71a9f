"""Low-rank adapter layer: forward/backward math and a fully quantized training step.

The layer computes Y = X W + (X A) B^T with W frozen. Training updates only the
thin factors A and B. The quantized step fake-quantizes every GEMM operand
(weights per-tensor, activations and gradients per feature/output column) and
treats rounding as identity in the backward pass (straight-through), while the
SGD update itself runs on full-precision master copies of A and B.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lorasim.quant import Granularity, fake_quantize
from lorasim.workload import ModelConfig


@dataclass(frozen=True)
class LoraLayer:
    weight: np.ndarray  # d1 x d2, frozen
    a: np.ndarray       # d1 x r
    b: np.ndarray       # d2 x r
    rank: int

    def __post_init__(self):
        d1, d2 = self.weight.shape
        if not 1 <= self.rank <= min(d1, d2):
            raise ValueError(f"rank {self.rank} invalid for a {d1}x{d2} layer")
        if self.a.shape != (d1, self.rank):
            raise ValueError(f"A must be {d1}x{self.rank}, got {self.a.shape}")
        if self.b.shape != (d2, self.rank):
            raise ValueError(f"B must be {d2}x{self.rank}, got {self.b.shape}")

    @classmethod
    def create(cls, weight: np.ndarray, rank: int, rng: np.random.Generator) -> "LoraLayer":
        """Standard adapter init: A ~ N(0, 0.02^2), B = 0, so the layer starts
        identical to the frozen base layer."""
        d1, d2 = weight.shape
        a = rng.normal(0.0, 0.02, size=(d1, rank))
        b = np.zeros((d2, rank))
        return cls(weight=weight, a=a, b=b, rank=rank)


@dataclass(frozen=True)
class LoraGradients:
    d_a: np.ndarray
    d_b: np.ndarray
    d_x: np.ndarray


def lora_forward(layer: LoraLayer, x: np.ndarray) -> np.ndarray:
    """X W + (X A) B^T, chaining the two thin GEMMs (A B^T is never formed)."""
    if x.shape[1] != layer.weight.shape[0]:
        raise ValueError(f"input width {x.shape[1]} does not match layer d1 {layer.weight.shape[0]}")
    return x @ layer.weight + (x @ layer.a) @ layer.b.T


def lora_backward(layer: LoraLayer, x: np.ndarray, d_y: np.ndarray) -> LoraGradients:
    """Gradients of the forward map for an upstream gradient d_y.

    dX flows through both the frozen weight and the adapter; W itself gets no
    gradient.
    """
    n, d1 = x.shape
    if d_y.shape != (n, layer.weight.shape[1]):
        raise ValueError(f"d_y must be {n}x{layer.weight.shape[1]}, got {d_y.shape}")
    dy_b = d_y @ layer.b                      # n x r
    d_x = d_y @ layer.weight.T + dy_b @ layer.a.T
    d_a = x.T @ dy_b
    d_b = d_y.T @ (x @ layer.a)
    return LoraGradients(d_a=d_a, d_b=d_b, d_x=d_x)


def loss_mse(y: np.ndarray, target: np.ndarray) -> float:
    return 0.5 * float(np.sum((y - target) ** 2))


_ROW_FEATURES = Granularity.per_axis(1)  # per feature / output column on n x d matrices


def _fq(t: np.ndarray, bitwidth: int | None, granularity: Granularity) -> np.ndarray:
    if bitwidth is None:
        return t
    return fake_quantize(t, bitwidth, granularity)


def train_step_quantized(
    layer: LoraLayer,
    x: np.ndarray,
    target: np.ndarray,
    lr: float,
    bitwidth: int | None = 8,
) -> tuple[LoraLayer, float]:
    """One SGD step on A, B against the 0.5*||Y - T||^2 loss.

    With a bitwidth given, every GEMM operand is fake-quantized: W, A, B
    per-tensor; X, the X A intermediate, dY and the dY B intermediate per
    column. Rounding is a straight-through identity for differentiation.
    bitwidth=None runs the same step in pure floating point. lr=0 is a
    measurement-only step that leaves the layer unchanged.
    """
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    per_tensor = Granularity.per_tensor()
    xq = _fq(x, bitwidth, _ROW_FEATURES)
    wq = _fq(layer.weight, bitwidth, per_tensor)
    aq = _fq(layer.a, bitwidth, per_tensor)
    bq = _fq(layer.b, bitwidth, per_tensor)

    h = xq @ aq                               # n x r
    hq = _fq(h, bitwidth, _ROW_FEATURES)
    y = xq @ wq + hq @ bq.T
    loss = loss_mse(y, target)

    d_y = _fq(y - target, bitwidth, _ROW_FEATURES)
    g = d_y @ bq                              # n x r
    gq = _fq(g, bitwidth, _ROW_FEATURES)
    d_a = xq.T @ gq
    d_b = d_y.T @ hq

    new = LoraLayer(
        weight=layer.weight,                  # frozen, shared
        a=layer.a - lr * d_a,
        b=layer.b - lr * d_b,
        rank=layer.rank,
    )
    return new, loss


def finite_diff_grad(
    layer: LoraLayer,
    x: np.ndarray,
    target: np.ndarray,
    eps: float = 1e-4,
) -> LoraGradients:
    """Central-difference gradients of the full-precision loss w.r.t. A, B and X.

    The per-entry step is eps scaled by max(1, |value|). Slow (two forward
    passes per entry); intended as the test oracle for lora_backward.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")

    def loss_at(a, b, xx):
        probe = LoraLayer(weight=layer.weight, a=a, b=b, rank=layer.rank)
        return loss_mse(lora_forward(probe, xx), target)

    def diff(base, rebuild):
        grad = np.zeros_like(base)
        flat = base.reshape(-1)
        for i in range(flat.size):
            step = eps * max(1.0, abs(flat[i]))
            bumped = flat.copy()
            bumped[i] = flat[i] + step
            hi = rebuild(bumped.reshape(base.shape))
            bumped[i] = flat[i] - step
            lo = rebuild(bumped.reshape(base.shape))
            grad.reshape(-1)[i] = (hi - lo) / (2 * step)
        return grad

    d_a = diff(layer.a, lambda a: loss_at(a, layer.b, x))
    d_b = diff(layer.b, lambda b: loss_at(layer.a, b, x))
    d_x = diff(x, lambda xx: loss_at(layer.a, layer.b, xx))
    return LoraGradients(d_a=d_a, d_b=d_b, d_x=d_x)


def trainable_fraction(cfg: ModelConfig) -> float:
    """Share of adapter parameters in the configured cross-attention stack
    (frozen projection weights included in the denominator)."""
    if not cfg.blocks:
        raise ValueError("model config has no blocks")
    trainable = 0
    total = 0
    for block in cfg.blocks:
        frozen = 2 * block.d_model * block.d_model          # q and output projections
        frozen += 2 * block.d_context * block.d_model       # k and v projections
        adapters = 0
        for target in cfg.lora_targets:
            d_in = block.d_context if target in ("k", "v") else block.d_model
            adapters += cfg.rank * (d_in + block.d_model)
        trainable += block.count * adapters
        total += block.count * (frozen + adapters)
    return trainable / total


def run_training_demo(
    d1: int = 16,
    d2: int = 16,
    rank: int = 4,
    steps: int = 200,
    bitwidth: int = 8,
    seed: int = 0,
    lr: float = 0.002,
    samples: int = 32,
    noise_std: float = 0.25,
) -> list[tuple[int, float, float]]:
    """Train twin layers (full precision vs quantized) from identical init and
    return (step, loss_fp32, loss_quant) rows.

    The regression target is a rank-`rank` shift of the frozen layer plus an
    irreducible residual, so both runs converge to the same noise floor
    instead of the quantized run bottoming out on its rounding error.
    """
    if d1 < 1 or d2 < 1 or steps < 0 or samples < 1:
        raise ValueError("dimensions, steps and samples must be positive")
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(samples, d1))
    weight = rng.normal(size=(d1, d2)) / np.sqrt(d1)
    a_true = rng.normal(size=(d1, rank)) * 0.5
    b_true = rng.normal(size=(d2, rank)) * 0.5
    target = x @ weight + (x @ a_true) @ b_true.T + noise_std * rng.normal(size=(samples, d2))

    fp = LoraLayer.create(weight, rank, np.random.default_rng(seed + 1))
    qt = LoraLayer(weight=weight, a=fp.a.copy(), b=fp.b.copy(), rank=rank)
    rows = []
    for step in range(steps):
        fp, loss_fp = train_step_quantized(fp, x, target, lr, bitwidth=None)
        qt, loss_q = train_step_quantized(qt, x, target, lr, bitwidth=bitwidth)
        rows.append((step, loss_fp, loss_q))
    return rows
