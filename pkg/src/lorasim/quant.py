"""Symmetric integer quantization with per-tensor / per-axis scales and exact integer GEMM.

The integer grid is symmetric: codes live in [-(2^(q-1)-1), 2^(q-1)-1], so the
most negative two's-complement code is never emitted and negation stays closed.
Scales are derived from the max absolute value of each slice, so the largest
element always lands exactly on the top code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Granularity:
    """Quantization granularity: one scale per tensor, or one per slice along `axis`."""

    axis: int | None = None  # None means per-tensor

    @classmethod
    def per_tensor(cls) -> "Granularity":
        return cls(axis=None)

    @classmethod
    def per_axis(cls, axis: int) -> "Granularity":
        if axis < 0:
            raise ValueError(f"axis must be non-negative, got {axis}")
        return cls(axis=axis)

    @property
    def is_per_tensor(self) -> bool:
        return self.axis is None


PER_TENSOR = Granularity.per_tensor()


@dataclass(frozen=True)
class QuantParams:
    scales: np.ndarray  # 1-D, strictly positive; length 1 (per-tensor) or size of the axis
    bitwidth: int
    granularity: Granularity

    def __post_init__(self):
        scales = np.atleast_1d(np.asarray(self.scales, dtype=np.float64))
        object.__setattr__(self, "scales", scales)
        if self.bitwidth < 2:
            raise ValueError(f"bitwidth must be >= 2, got {self.bitwidth}")
        if not np.all(scales > 0):
            raise ValueError("all scales must be strictly positive")
        if self.granularity.is_per_tensor and scales.size != 1:
            raise ValueError("per-tensor params need exactly one scale")

    @property
    def qmax(self) -> int:
        return (1 << (self.bitwidth - 1)) - 1


@dataclass(frozen=True)
class QuantTensor:
    data: np.ndarray  # integer codes
    params: QuantParams

    def __post_init__(self):
        data = np.asarray(self.data)
        if not np.issubdtype(data.dtype, np.integer):
            raise ValueError("QuantTensor data must be an integer array")
        qmax = self.params.qmax
        if data.size and (data.max() > qmax or data.min() < -qmax):
            raise ValueError(f"codes out of symmetric range [-{qmax}, {qmax}]")
        axis = self.params.granularity.axis
        if axis is not None:
            if axis >= data.ndim:
                raise ValueError(f"granularity axis {axis} invalid for shape {data.shape}")
            if self.params.scales.size != data.shape[axis]:
                raise ValueError(
                    f"expected {data.shape[axis]} scales along axis {axis}, "
                    f"got {self.params.scales.size}"
                )

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape


def _round_half_away_from_zero(x: np.ndarray) -> np.ndarray:
    # np.round ties to even; hardware rounds ties away from zero.
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _broadcast_scales(params: QuantParams, ndim: int) -> np.ndarray:
    axis = params.granularity.axis
    if axis is None:
        return params.scales.reshape((1,) * ndim) if ndim else params.scales
    shape = [1] * ndim
    shape[axis] = -1
    return params.scales.reshape(shape)


def compute_scale(x: np.ndarray, bitwidth: int, granularity: Granularity = PER_TENSOR) -> QuantParams:
    """Derive scales as maxabs(slice) / (2^(q-1) - 1); all-zero slices get scale 1."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot compute scales of an empty tensor")
    if bitwidth < 2:
        raise ValueError(f"bitwidth must be >= 2, got {bitwidth}")
    qmax = (1 << (bitwidth - 1)) - 1
    if granularity.is_per_tensor:
        maxabs = np.array([np.abs(x).max()])
    else:
        axis = granularity.axis
        if axis >= x.ndim:
            raise ValueError(f"granularity axis {axis} invalid for shape {x.shape}")
        reduce_axes = tuple(i for i in range(x.ndim) if i != axis)
        maxabs = np.abs(x).max(axis=reduce_axes) if reduce_axes else np.abs(x)
    scales = np.where(maxabs > 0, maxabs / qmax, 1.0)
    return QuantParams(scales=scales, bitwidth=bitwidth, granularity=granularity)


def quantize(x: np.ndarray, params: QuantParams) -> QuantTensor:
    """Map reals onto the integer grid: clamp(round(x / scale)) per slice."""
    x = np.asarray(x, dtype=np.float64)
    axis = params.granularity.axis
    if axis is not None and (axis >= x.ndim or params.scales.size != x.shape[axis]):
        raise ValueError(f"params with axis {axis} do not match shape {x.shape}")
    scales = _broadcast_scales(params, x.ndim)
    codes = _round_half_away_from_zero(x / scales)
    qmax = params.qmax
    codes = np.clip(codes, -qmax, qmax)
    return QuantTensor(data=codes.astype(np.int64), params=params)


def dequantize(xq: QuantTensor) -> np.ndarray:
    return xq.data.astype(np.float64) * _broadcast_scales(xq.params, xq.data.ndim)


def fake_quantize(x: np.ndarray, bitwidth: int, granularity: Granularity = PER_TENSOR) -> np.ndarray:
    """Round-trip through the integer grid, staying in the real domain."""
    return dequantize(quantize(x, compute_scale(x, bitwidth, granularity)))


def int_gemm(a: QuantTensor, b: QuantTensor) -> tuple[np.ndarray, np.ndarray]:
    """Exact integer matrix product with scale propagation.

    Requires that every output dot product sees a single (scale_a * scale_b)
    pair: `a` (M x K) may be per-tensor or per-row (axis 0), `b` (K x N)
    per-tensor or per-column (axis 1). Returns the wide integer accumulator
    and the effective output scales (broadcastable against the M x N result);
    `accum * out_scales` equals the real GEMM of the dequantized operands.
    """
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("int_gemm expects 2-D operands")
    m, k = a.data.shape
    k2, n = b.data.shape
    if k != k2:
        raise ValueError(f"inner dimensions disagree: {a.data.shape} x {b.data.shape}")
    a_axis = a.params.granularity.axis
    b_axis = b.params.granularity.axis
    if a_axis not in (None, 0):
        raise ValueError("left operand must be per-tensor or per-row quantized")
    if b_axis not in (None, 1):
        raise ValueError("right operand must be per-tensor or per-column quantized")
    # One 32-bit accumulator is the hardware contract for q=8, K <= 65536;
    # simulation uses 64-bit and rejects anything that could exceed it.
    worst = int(a.params.qmax) * int(b.params.qmax) * k
    if worst >= (1 << 62):
        raise OverflowError(f"K={k} at q={a.params.bitwidth}/{b.params.bitwidth} overflows the accumulator")
    accum = a.data.astype(np.int64) @ b.data.astype(np.int64)
    sa = a.params.scales.reshape(-1, 1)  # (M,1) or (1,1)
    sb = b.params.scales.reshape(1, -1)  # (1,N) or (1,1)
    return accum, sa * sb
