"""Experiment configuration: flat `key = value` text files.

Durations accept us/ms/s suffixes, frequencies hz/khz/mhz/ghz; `#` starts a
comment. Keys mirror ExperimentConfig field names.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .waveform import WaveformParams, constellation


class ConfigError(Exception):
    """Invalid configuration; message names the offending field."""


_DUR = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
_FREQ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}


def _unit_value(text: str, units: dict, key: str) -> float:
    t = text.strip().lower()
    for suffix in sorted(units, key=len, reverse=True):
        if t.endswith(suffix):
            num = t[: -len(suffix)].strip()
            try:
                return float(num) * units[suffix]
            except ValueError:
                raise ConfigError(f"{key}: cannot parse {text!r}") from None
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None


def _duration(text: str, key: str) -> float:
    return _unit_value(text, _DUR, key)


def _frequency(text: str, key: str) -> float:
    return _unit_value(text, _FREQ, key)


def _boolean(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _int(text: str, key: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _float(text: str, key: str) -> float:
    try:
        return float(text.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _float_list(text: str, key: str) -> list:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{key}: expected numbers, got {text!r}") from None


def _str_list(text: str, key: str) -> list:
    return [v for v in text.replace(",", " ").split() if v]


def _pair(text: str, key: str) -> tuple:
    vals = _float_list(text, key)
    if len(vals) != 2:
        raise ConfigError(f"{key}: expected two numbers, got {text!r}")
    return (vals[0], vals[1])


@dataclass
class ExperimentConfig:
    """One experiment: waveform, scenario, sweep and detector settings."""

    # waveform
    bandwidth: float = 2e6
    pulse_duration: float = 100e-6
    pri: float = 105e-6
    pulses: int = 50
    symbols_per_pulse: int = 50
    oversampling: int = 8
    carrier: float = 77e9
    constellation: str = "qpsk"
    coding: bool = False
    pilot_head: int = 2
    # static scenario (single echo, single uplink)
    alpha_r: float = 0.1
    tau_r: float = 1e-6
    doppler_r: float = 1000.0
    alpha_c: float = 1.0
    tau_c: float = 2.5e-6
    doppler_c: float = -300.0
    ebn0_db: float = 10.0
    # per-sample noise references this gain (default: alpha_c), so removing
    # a link for a baseline run keeps the same noise level
    noise_ref_gain: float = -1.0
    # run control
    structures: list = field(default_factory=lambda: ["noic"])
    sweep: str = "ebn0_db"
    sweep_values: list = field(default_factory=lambda: [10.0])
    trials: int = 500
    zd: int = 0
    zf: int = 0
    pfa: float = 1e-4
    seed: int = 1
    threads: int = 1
    cfar_train: int = 8
    cfar_guard: int = 2
    # dynamic (vehicular) scenario
    p_r0: tuple = (30.0, 0.0)
    p_c: tuple = (14.0, 2.5)
    speed: float = 15.0
    rho: float = 1.0
    delta_t: float = 66.6e-3
    steps: int = 20
    # pfa estimation
    noise_cells: float = 1e7

    def waveform_params(self) -> WaveformParams:
        try:
            return WaveformParams(fc=self.carrier, B=self.bandwidth,
                                  T=self.pulse_duration, T_PRI=self.pri,
                                  P=self.pulses, Lc=self.symbols_per_pulse,
                                  Mos=self.oversampling)
        except ValueError as e:
            raise ConfigError(f"waveform: {e}") from None

    def validate(self) -> "ExperimentConfig":
        from .cancellation import parse_structure

        if self.trials < 1:
            raise ConfigError("trials: must be >= 1")
        if not (0.0 < self.pfa < 1.0):
            raise ConfigError("pfa: must be in (0, 1)")
        if self.zd < 0 or self.zf < 0:
            raise ConfigError("zd/zf: must be nonnegative")
        if self.sweep not in ("ebn0_db", "snr_db", "sir_db", "zd", "time"):
            raise ConfigError(f"sweep: unknown axis {self.sweep!r}")
        if not self.sweep_values and self.sweep != "time":
            raise ConfigError("sweep_values: empty")
        for v in self.sweep_values:
            if v != v or v in (float("inf"), float("-inf")):
                raise ConfigError("sweep_values: values must be finite")
        try:
            constellation(self.constellation)
        except ValueError as e:
            raise ConfigError(f"constellation: {e}") from None
        if self.coding and constellation(self.constellation).bits_per_symbol != 2:
            raise ConfigError("coding: coded transmission uses qpsk")
        for name in self.structures:
            try:
                parse_structure(name)
            except ValueError as e:
                raise ConfigError(f"structures: {e}") from None
        self.waveform_params()
        return self


_PARSERS = {
    "bandwidth": _frequency,
    "pulse_duration": _duration,
    "pri": _duration,
    "pulses": _int,
    "symbols_per_pulse": _int,
    "oversampling": _int,
    "carrier": _frequency,
    "constellation": lambda t, k: t.strip().lower(),
    "coding": _boolean,
    "pilot_head": _int,
    "alpha_r": _float,
    "tau_r": _duration,
    "doppler_r": _frequency,
    "alpha_c": _float,
    "tau_c": _duration,
    "doppler_c": _frequency,
    "ebn0_db": _float,
    "noise_ref_gain": _float,
    "structures": _str_list,
    "sweep": lambda t, k: t.strip().lower(),
    "sweep_values": _float_list,
    "trials": _int,
    "zd": _int,
    "zf": _int,
    "pfa": _float,
    "seed": _int,
    "threads": _int,
    "cfar_train": _int,
    "cfar_guard": _int,
    "p_r0": _pair,
    "p_c": _pair,
    "speed": _float,
    "rho": _float,
    "delta_t": _duration,
    "steps": _int,
    "noise_cells": _float,
}


def parse_config_text(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key not in _PARSERS:
            raise ConfigError(f"{key}: unknown key (line {lineno})")
        values[key] = _PARSERS[key](val, key)
    cfg = ExperimentConfig(**values)
    # doppler values may be negative; _frequency keeps the sign
    return cfg.validate()


def parse_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path!r}: {e}") from None
    return parse_config_text(text)
