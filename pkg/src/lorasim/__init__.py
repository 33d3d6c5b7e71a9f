"""Systolic-array performance/energy simulator for quantized LoRA fine-tuning workloads."""

__version__ = "0.1.0"

from lorasim.errors import ConfigError, InvariantError

__all__ = ["ConfigError", "InvariantError", "__version__"]
