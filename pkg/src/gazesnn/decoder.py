"""Rate-window motor decoding, range-of-motion clamps, and servo quantisation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError
from .plant import AXES, TICK_DEG, Pose


@dataclass(frozen=True)
class DecodeWindowSpec:
    window: float = 20.0  # ms
    max_rate: float = 400.0  # Hz mapped to full-scale delta
    max_delta_per_window: int = 40  # servo ticks

    def __post_init__(self):
        if not self.window > 0:
            raise ConfigError("decoder", "window must be > 0")
        if not self.max_rate > 0:
            raise ConfigError("decoder", "max_rate must be > 0")
        if self.max_delta_per_window < 1:
            raise ConfigError("decoder", "max_delta_per_window must be >= 1")


@dataclass(frozen=True)
class ServoCommandDelta:
    axis: str
    delta: int


def decode_delta(rate_positive: float, rate_negative: float, spec: DecodeWindowSpec) -> int:
    """Signed tick delta from an antagonist pair of group rates (Hz)."""
    diff = rate_positive - rate_negative
    diff = min(max(diff, -spec.max_rate), spec.max_rate)
    return int(np.round(diff / spec.max_rate * spec.max_delta_per_window))


def decode_window(mn_rates: dict[str, tuple[float, float]], spec: DecodeWindowSpec) -> dict[str, ServoCommandDelta]:
    """``mn_rates`` maps axis -> (positive-direction rate, negative-direction rate)."""
    out = {}
    for axis, (pos, neg) in mn_rates.items():
        if pos < 0 or neg < 0:
            raise ValueError("rates must be >= 0")
        out[axis] = ServoCommandDelta(axis, decode_delta(pos, neg, spec))
    return out


@dataclass(frozen=True)
class RangeOfMotion:
    eye_pan: float = 100.0
    eye_tilt: float = 70.0
    neck_pan: float = 45.0
    neck_tilt: float = 30.0

    def limit_ticks(self, axis: str) -> int:
        deg = {"left_pan": self.eye_pan, "right_pan": self.eye_pan,
               "left_tilt": self.eye_tilt, "right_tilt": self.eye_tilt,
               "neck_pan": self.neck_pan, "neck_tilt": self.neck_tilt}[axis]
        # largest tick offset whose angle stays within the limit
        return int(np.floor(deg / TICK_DEG + 1e-9))


def clamp_rom(current: Pose, deltas, rom: RangeOfMotion = RangeOfMotion()) -> Pose:
    """Apply tick deltas and clamp every axis into its range of motion.

    ``deltas`` is a mapping axis -> int or an iterable of ServoCommandDelta.
    """
    if not isinstance(deltas, dict):
        deltas = {d.axis: d.delta for d in deltas}
    else:
        deltas = {k: (v.delta if isinstance(v, ServoCommandDelta) else v) for k, v in deltas.items()}
    new = {}
    for axis in AXES:
        lim = rom.limit_ticks(axis)
        val = getattr(current, axis) + int(deltas.get(axis, 0))
        new[axis] = min(max(val, -lim), lim)
    return Pose(**new)


def spec_from_config(cfg) -> DecodeWindowSpec:
    return DecodeWindowSpec(cfg["decoder.window"], cfg["decoder.max_rate"], cfg["decoder.max_delta"])


def rom_from_config(cfg) -> RangeOfMotion:
    return RangeOfMotion(cfg["decoder.eye_pan_rom"], cfg["decoder.eye_tilt_rom"],
                         cfg["decoder.neck_pan_rom"], cfg["decoder.neck_tilt_rom"])
