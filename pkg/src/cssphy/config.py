"""JSON configuration file parsing for the command-line tools.

One structured file carries the PHY parameters, frame settings, channel
impairments, and sweep description; see docs/cli.md for the schema. Every
section rejects unknown keys by name so typos fail loudly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .ber import RECEIVER_MODES, StopRule, SweepSpec
from .channel import ChannelImpairments
from .errors import ConfigError
from .framing import FrameConfig
from .params import LoraParams, make_params

_SECTIONS = ("params", "frame", "impairments", "sweep", "detect", "seed")
_KEYS = {
    "params": ("sf", "bw", "os", "n_pre"),
    "frame": ("cr", "payload_len", "has_header", "has_crc"),
    "impairments": ("snr_db", "cfo_hz", "sfo_hz", "delay_samples", "h_real", "h_imag", "seed"),
    "sweep": (
        "mode", "frame_len_symbols", "snr_points", "cr",
        "min_bit_errors", "max_frames", "min_frames", "stop_below_ber",
    ),
    "detect": ("threshold", "threshold_scale"),
}


def load_config(path) -> dict:
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    for key in cfg:
        if key not in _SECTIONS:
            raise ConfigError(f"unknown key '{key}' at config root")
    for section, keys in _KEYS.items():
        sub = cfg.get(section, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"section '{section}' must be a JSON object")
        for key in sub:
            if key not in keys:
                raise ConfigError(f"unknown key '{key}' in section '{section}'")
    return cfg


def _require(cfg: dict, section: str, key: str):
    sub = cfg.get(section)
    if not sub or key not in sub:
        raise ConfigError(f"missing required key '{key}' in section '{section}'")
    return sub[key]


def params_from_config(cfg: dict) -> LoraParams:
    sf = _require(cfg, "params", "sf")
    bw = _require(cfg, "params", "bw")
    sub = cfg["params"]
    try:
        return make_params(sf, bw, os=sub.get("os", 1), n_pre=sub.get("n_pre", 8))
    except ValueError as exc:
        raise ConfigError(f"invalid params: {exc}") from exc


def frame_config_from_config(cfg: dict) -> FrameConfig:
    cr = _require(cfg, "frame", "cr")
    payload_len = _require(cfg, "frame", "payload_len")
    sub = cfg["frame"]
    try:
        return FrameConfig(
            cr=cr, payload_len=payload_len,
            has_header=sub.get("has_header", True),
            has_crc=sub.get("has_crc", True),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid frame section: {exc}") from exc


def impairments_from_config(cfg: dict) -> ChannelImpairments:
    sub = cfg.get("impairments", {})
    snr = sub.get("snr_db", math.inf)
    if isinstance(snr, str):
        if snr.lower() not in ("inf", "+inf", "infinity"):
            raise ConfigError(f"invalid snr_db value '{snr}'")
        snr = math.inf
    return ChannelImpairments(
        snr_db=float(snr),
        h=complex(sub.get("h_real", 1.0), sub.get("h_imag", 0.0)),
        cfo_hz=float(sub.get("cfo_hz", 0.0)),
        sfo_hz=float(sub.get("sfo_hz", 0.0)),
        delay_samples=int(sub.get("delay_samples", 0)),
        seed=int(sub.get("seed", 0)),
    )


def sweep_from_config(cfg: dict) -> tuple[SweepSpec, float | None]:
    mode = _require(cfg, "sweep", "mode")
    if mode not in RECEIVER_MODES:
        raise ConfigError(f"unknown sweep mode '{mode}'; valid: {', '.join(RECEIVER_MODES)}")
    snr_points = _require(cfg, "sweep", "snr_points")
    if not isinstance(snr_points, list) or not snr_points:
        raise ConfigError("sweep snr_points must be a non-empty list")
    frame_len = _require(cfg, "sweep", "frame_len_symbols")
    sub = cfg["sweep"]
    cr = sub.get("cr", cfg.get("frame", {}).get("cr", 4))
    stop = StopRule(
        min_bit_errors=sub.get("min_bit_errors", 100),
        max_frames=sub.get("max_frames", 100_000),
        min_frames=sub.get("min_frames", 30),
    )
    try:
        spec = SweepSpec(
            params=params_from_config(cfg),
            cr=cr,
            frame_len_symbols=frame_len,
            snr_points=tuple(float(s) for s in snr_points),
            impairments=impairments_from_config(cfg),
            receiver_mode=mode,
            stop=stop,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid sweep: {exc}") from exc
    return spec, sub.get("stop_below_ber")
