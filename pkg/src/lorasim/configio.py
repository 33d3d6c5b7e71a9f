"""YAML config loading for model and hardware descriptions.

Keys carry their units (freq_mhz, sram_kib, *_pj). Unknown or ill-typed keys
raise ConfigError with the offending key path, which the CLI maps to exit
code 2.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import yaml

from lorasim.energy import EnergyConfig
from lorasim.errors import ConfigError
from lorasim.simcore import ArrayConfig, MemConfig
from lorasim.workload import BlockSpec, ModelConfig


def _load_yaml(path: str | Path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return data


class _Section:
    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping")
        self.data = dict(data)
        self.path = path

    def take(self, key, kind, default=None, required=False):
        if key not in self.data:
            if required:
                raise ConfigError(f"{self.path}.{key}: missing required key")
            return default
        value = self.data.pop(key)
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, kind) or isinstance(value, bool) is not (kind is bool):
            raise ConfigError(f"{self.path}.{key}: expected {kind.__name__}, got {value!r}")
        return value

    def done(self):
        if self.data:
            raise ConfigError(f"{self.path}: unknown key {sorted(self.data)[0]!r}")


def _parse_array(raw: dict) -> ArrayConfig:
    sec = _Section(raw, "array")
    cfg = ArrayConfig(
        rows=sec.take("rows", int, 64),
        cols=sec.take("cols", int, 64),
        freq_mhz=sec.take("freq_mhz", float, 400.0),
        fp32_mac_cycles=sec.take("fp32_mac_cycles", int, 2),
    )
    sec.done()
    return cfg


def _parse_mem(raw: dict) -> MemConfig:
    sec = _Section(raw, "mem")
    cfg = MemConfig(
        input_sram_bytes=sec.take("input_sram_kib", int, 512) * 1024,
        weight_sram_bytes=sec.take("weight_sram_kib", int, 512) * 1024,
        output_sram_bytes=sec.take("output_sram_kib", int, 1024) * 1024,
        word_bytes_int8=sec.take("word_bytes_int8", int, 1),
        word_bytes_fp32=sec.take("word_bytes_fp32", int, 4),
        accum_bytes=sec.take("accum_bytes", int, 4),
        double_buffered=sec.take("double_buffered", bool, True),
    )
    sec.done()
    return cfg


def _parse_energy(raw: dict) -> EnergyConfig:
    sec = _Section(raw, "energy")
    pj = 1e-12
    cfg = EnergyConfig(
        e_mac_int8=sec.take("mac_int8_pj", float, 0.3) * pj,
        e_mac_fp32=sec.take("mac_fp32_pj", float, 1.2) * pj,
        e_sram_read=sec.take("sram_read_pj_per_byte", float, 1.5) * pj,
        e_sram_write=sec.take("sram_write_pj_per_byte", float, 1.8) * pj,
        e_dram=sec.take("dram_pj_per_byte", float, 100.0) * pj,
        p_static=sec.take("static_w", float, 0.35),
    )
    sec.done()
    return cfg


def load_hw_config(path: str | Path) -> tuple[ArrayConfig, MemConfig, EnergyConfig]:
    data = _load_yaml(path)
    try:
        array = _parse_array(data.get("array", {}))
        mem = _parse_mem(data.get("mem", {}))
        energy = _parse_energy(data.get("energy", {}))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(data) - {"array", "mem", "energy"}
    if unknown:
        raise ConfigError(f"{path}: unknown section {sorted(unknown)[0]!r}")
    return array, mem, energy


def load_energy_config(path: str | Path) -> EnergyConfig:
    """Standalone energy file (or any hw file); only the `energy` section is read."""
    data = _load_yaml(path)
    try:
        return _parse_energy(data.get("energy", data if "array" not in data else {}))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc


def load_model_config(path: str | Path) -> ModelConfig:
    data = _load_yaml(path)
    top = _Section(data, "model")
    rank = top.take("rank", int, 4)
    targets = top.take("lora_targets", list, ["k", "v"])
    blocks_raw = top.take("blocks", list, required=True)
    top.done()
    blocks = []
    for i, braw in enumerate(blocks_raw):
        sec = _Section(braw if isinstance(braw, dict) else {}, f"blocks[{i}]")
        if not isinstance(braw, dict):
            raise ConfigError(f"blocks[{i}]: expected a mapping")
        try:
            blocks.append(BlockSpec(
                d_model=sec.take("d_model", int, required=True),
                d_context=sec.take("d_context", int, required=True),
                n_img=sec.take("n_img", int, required=True),
                n_txt=sec.take("n_txt", int, 77),
                count=sec.take("count", int, 1),
                name=sec.take("name", str, ""),
            ))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"blocks[{i}]: {exc}") from exc
        sec.done()
    try:
        return ModelConfig(blocks=tuple(blocks), rank=rank,
                           lora_targets=tuple(str(t).lower() for t in targets))
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc


def default_model_path() -> Path:
    return Path(str(resources.files("lorasim").joinpath("configs/default_model.yaml")))


def default_hw_path() -> Path:
    return Path(str(resources.files("lorasim").joinpath("configs/default_hw.yaml")))
