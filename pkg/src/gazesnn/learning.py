"""Reward-modulated covariance Hebbian plasticity on the SC input gains.

Per plastic synapse ``pre j -> post i`` and per decode window:

    H   = gamma * (v_i - <v_i>) * (v_j - <v_j>)
    e  <- e + dt/tau_e * (H - e)
    w  <- clamp(w + dt * M * H * e)          (``M * e`` with modulated_trace_only)
    M   = R - <R>

Rates are in Hz, ``dt`` of the weight update in seconds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ConfigError
from .retina import FrameSpec
from .snn import quantize_weight


def reward_profile(offset: float, half_extent: float, shape: str = "triangular",
                   sigma: float = 120.0) -> float:
    """Reward along one frame axis; peaks at the fovea centre (offset 0)."""
    if shape == "triangular":
        return max(0.0, 1.0 - abs(offset) / half_extent)
    if shape == "gaussian":
        return math.exp(-0.5 * (offset / sigma) ** 2)
    raise ConfigError("learning", f"unknown reward_shape {shape!r}")


def compute_reward(dots, frame: FrameSpec = FrameSpec(), shape: str = "triangular",
                   sigma: float = 120.0) -> float:
    """Mean over eyes of the mean x/y reward profile; a hidden dot scores 0."""
    per_eye = []
    for dot in dots:
        if dot is None or not dot.visible:
            per_eye.append(0.0)
            continue
        rx = reward_profile(dot.dx, frame.width / 2, shape, sigma)
        ry = reward_profile(dot.dy, frame.height / 2, shape, sigma)
        per_eye.append((rx + ry) / 2)
    return sum(per_eye) / len(per_eye)


def ema_alpha(dt: float, tau: float) -> float:
    """Exact-decay EMA coefficient, so a step response is ``1 - exp(-t/tau)``."""
    return 1.0 - math.exp(-dt / tau)


@dataclass
class RewardState:
    R: float = 0.0
    R_avg: float = 0.0
    M: float = 0.0
    avg_time_constant: float = 5000.0


def update_modulator(state: RewardState, R: float, dt: float) -> RewardState:
    """``M = R - <R>`` against the running average, which then absorbs ``R``."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    M = R - state.R_avg
    R_avg = state.R_avg + ema_alpha(dt, state.avg_time_constant) * (R - state.R_avg)
    return RewardState(R, R_avg, M, state.avg_time_constant)


def hebbian_term(v_pre, v_post, v_pre_avg, v_post_avg, gamma):
    return gamma * (np.subtract(v_post, v_post_avg)) * (np.subtract(v_pre, v_pre_avg))


def update_trace(e, H, tau_e: float, dt: float):
    if dt > tau_e / 10:
        raise ConfigError("learning", f"dt={dt} too large for tau_e={tau_e} (need dt <= tau_e/10)")
    return e + dt / tau_e * (-np.asarray(e) + H)


def apply_weight_update(w, M, H, e, dt, bounds, modulated_trace_only: bool = False):
    """One reward-gated weight step; ``bounds`` = (lo, hi) arrays. Sign of ``w`` never flips."""
    lo, hi = bounds
    drive = M * e if modulated_trace_only else M * H * e
    w_new = np.clip(np.asarray(w) + dt * drive, lo, hi)
    sign = np.sign(w)
    return np.where(sign > 0, np.maximum(w_new, 0.0), np.where(sign < 0, np.minimum(w_new, 0.0), w_new))


@dataclass
class LearningParams:
    gamma: float = 1e-5
    tau_e: float = 1000.0
    tau_reward_avg: float = 5000.0
    tau_rate_avg: float = 2000.0
    w_lo_scale: float = 0.5
    w_hi_scale: float = 2.0
    modulated_trace_only: bool = False

    def __post_init__(self):
        for name in ("tau_e", "tau_reward_avg", "tau_rate_avg"):
            if not getattr(self, name) > 0:
                raise ConfigError("learning", f"{name} must be > 0")
        if not 0 <= self.w_lo_scale <= 1 <= self.w_hi_scale:
            raise ConfigError("learning", "need 0 <= w_lo_scale <= 1 <= w_hi_scale")

    @classmethod
    def from_config(cls, cfg) -> "LearningParams":
        s = cfg.section("learning")
        return cls(s["gamma"], s["tau_e"], s["tau_reward_avg"], s["tau_rate_avg"],
                   s["w_lo_scale"], s["w_hi_scale"], s["modulated_trace_only"])


class HebbianLearner:
    """Holds the per-synapse plasticity state for a controller's plastic registry.

    Each update reads only the global modulator plus the pre/post rates of the
    synapse and their running means.
    """

    def __init__(self, network, plastic_idx: np.ndarray, params: LearningParams, window: float):
        self.net = network
        self.params = params
        self.window = window
        if window > params.tau_e / 10:
            raise ConfigError("learning", f"window {window} ms too long for tau_e={params.tau_e}")
        self.idx = np.asarray(plastic_idx)
        syn = network.synapses
        self.pre = np.array([syn[i].pre for i in self.idx], dtype=np.int64)
        self.post = np.array([syn[i].post for i in self.idx], dtype=np.int64)
        w0 = network.weights[self.idx]
        self.lo = np.where(w0 >= 0, w0 * params.w_lo_scale, w0 * params.w_hi_scale)
        self.hi = np.where(w0 >= 0, w0 * params.w_hi_scale, w0 * params.w_lo_scale)
        self.e = np.zeros(len(self.idx))
        self.rate_avg = np.zeros(network.n)
        self.reward = RewardState(avg_time_constant=params.tau_reward_avg)
        self.rate_alpha = ema_alpha(window, params.tau_rate_avg)
        self.last_sum_abs_dw = 0.0
        self._primed = False

    def observe_reward(self, R: float) -> RewardState:
        if not self._primed:
            # the running average starts from the first observation, not from 0
            self.reward = RewardState(R, R, 0.0, self.params.tau_reward_avg)
            self._primed = True
            return self.reward
        self.reward = update_modulator(self.reward, R, self.window)
        return self.reward

    def update(self, rates: np.ndarray, learn: bool = True) -> float:
        """One window: Hebbian term, trace, weights, then running means. Returns sum |dw|."""
        p = self.params
        dw_sum = 0.0
        if learn and p.gamma != 0.0:
            H = hebbian_term(rates[self.pre], rates[self.post],
                             self.rate_avg[self.pre], self.rate_avg[self.post], p.gamma)
            self.e = update_trace(self.e, H, p.tau_e, self.window)
            w = self.net.weights[self.idx]
            w_new = quantize_weight(apply_weight_update(
                w, self.reward.M, H, self.e, self.window / 1000.0, (self.lo, self.hi),
                p.modulated_trace_only))
            changed = w_new != w
            if changed.any():
                self.net.set_weights(self.idx[changed], w_new[changed])
                dw_sum = float(np.abs(w_new - w).sum())
        self.rate_avg += self.rate_alpha * (rates - self.rate_avg)
        self.last_sum_abs_dw = dw_sum
        return dw_sum
