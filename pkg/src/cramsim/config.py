"""Flat ``key=value`` simulation configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Union

from .common import CramError
from .controller import ControllerConfig


class ConfigError(CramError, ValueError):
    pass


_CHOICES = {
    "marker_mode": ("perline", "fixed"),
    "marker_bits": (8, 32),
    "marker_il": ("global", "perline"),
    "lit_overflow": ("mmap", "rekey"),
    "llp_update": ("every", "mispredict"),
    "first_touch": ("zero",),
}


@dataclass
class SimConfig:
    llc_capacity: int = 8 << 20
    llc_assoc: int = 16
    sampled_fraction: float = 0.01
    first_touch: str = "zero"
    per_access_cost: float = 1.0
    controller: ControllerConfig = field(default_factory=ControllerConfig)

    @property
    def seed(self) -> int:
        return self.controller.seed

    def replace(self, **changes) -> "SimConfig":
        """Copy with changes; keys may belong to the controller section."""
        return from_mapping({**self.as_dict(), **changes})

    def as_dict(self) -> dict:
        top = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "controller"}
        return {**top, **dataclasses.asdict(self.controller)}


_TOP = {f.name: f for f in dataclasses.fields(SimConfig) if f.name != "controller"}
_CTL = {f.name: f for f in dataclasses.fields(ControllerConfig)}


def _coerce(key: str, value, default) -> object:
    if isinstance(value, str):
        value = value.strip()
        try:
            if isinstance(default, bool):
                value = value.lower() in ("1", "true", "yes", "on")
            elif isinstance(default, int):
                value = int(value, 0)
            elif isinstance(default, float):
                value = float(value)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {value!r}") from None
    if key in _CHOICES and value not in _CHOICES[key]:
        raise ConfigError(f"{key}: {value!r} not one of {_CHOICES[key]}")
    return value


def from_mapping(values: Mapping[str, object]) -> SimConfig:
    top, ctl = {}, {}
    for key, value in values.items():
        if key in _TOP:
            top[key] = _coerce(key, value, _TOP[key].default)
        elif key in _CTL:
            ctl[key] = _coerce(key, value, _CTL[key].default)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    cfg = SimConfig(**top, controller=ControllerConfig(**ctl))
    validate(cfg)
    return cfg


def parse_lines(lines: Iterable[str]) -> dict[str, str]:
    out = {}
    for n, text in enumerate(lines, 1):
        body = text.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {n}: expected key=value, got {body!r}")
        key, value = body.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load(path: Union[str, Path]) -> SimConfig:
    with open(path) as fh:
        return from_mapping(parse_lines(fh))


def validate(cfg: SimConfig) -> None:
    nsets, rem = divmod(cfg.llc_capacity, cfg.llc_assoc * 64) if cfg.llc_assoc > 0 else (0, 1)
    if rem or nsets <= 0 or nsets & (nsets - 1):
        raise ConfigError("llc_capacity / (llc_assoc * 64) must be a power of two")
    if cfg.llc_assoc < 4:
        raise ConfigError("llc_assoc must be at least 4")
    if not 0.0 <= cfg.sampled_fraction <= 1.0:
        raise ConfigError("sampled_fraction must lie in [0, 1]")
    c = cfg.controller
    if c.memory_lines <= 0 or c.memory_lines % 4:
        raise ConfigError("memory_lines must be a positive multiple of 4")
    if c.lct_entries <= 0 or c.lit_entries <= 0 or c.cores <= 0:
        raise ConfigError("table sizes must be positive")
    if c.page_size % 64:
        raise ConfigError("page_size must be a multiple of 64")
