"""Fixed-timestep leaky integrate-and-fire substrate.

All neurons of a controller live in one :class:`Network`; the scalar
:func:`step_neuron` runs the very same update on a single cell.
Synaptic weights are stored on a dyadic grid (multiples of ``WEIGHT_QUANTUM``)
so that summing delivered spikes is exact and independent of spike order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .config import ConfigError

WEIGHT_QUANTUM = 2.0 ** -30


class NumericInputError(ArithmeticError):
    """Non-finite value fed into the simulation."""


class Role(str, Enum):
    SC = "SC"
    LLBN = "LLBN"
    EBN = "EBN"
    IBN = "IBN"
    OPN = "OPN"
    IFN = "IFN"
    TN = "TN"
    DSN = "DSN"
    MN = "MN"
    S = "S"  # direction-selective vergence cell


@dataclass(frozen=True)
class NeuronParams:
    role: Role
    membrane_time_constant: float = 10.0
    threshold: float = 1.0
    reset_potential: float = 0.0
    refractory: float = 1.0
    bias_current: float = 0.0
    integrator_leak_scale: float = 1.0
    floor_potential: float = -1.0

    def __post_init__(self):
        if not self.membrane_time_constant > 0:
            raise ConfigError("snn", f"{self.role.value}: membrane_time_constant must be > 0")
        if self.refractory < 0:
            raise ConfigError("snn", f"{self.role.value}: refractory must be >= 0")
        if not self.threshold > self.reset_potential:
            raise ConfigError("snn", f"{self.role.value}: threshold must exceed reset_potential")
        if not 0.0 <= self.integrator_leak_scale <= 1.0:
            raise ConfigError("snn", f"{self.role.value}: integrator_leak_scale must lie in [0, 1]")
        if self.floor_potential > self.reset_potential:
            raise ConfigError("snn", f"{self.role.value}: floor_potential above reset_potential")
        if self.bias_current != 0 and self.role not in (Role.OPN, Role.TN):
            raise ConfigError("snn", f"{self.role.value}: only OPN and TN cells take a bias current")
        if self.role is Role.OPN and not self.bias_current > 0:
            raise ConfigError("snn", "OPN needs bias_current > 0 to be tonically active")
        if self.role is Role.TN and not self.integrator_leak_scale < 0.1:
            raise ConfigError("snn", "TN needs integrator_leak_scale < 0.1")


@dataclass(frozen=True)
class NeuronState:
    potential: float = 0.0
    refractory_remaining: float = 0.0
    last_spike_time: float | None = None


@dataclass(frozen=True)
class Synapse:
    pre: int
    post: int
    weight: float
    delay: float = 1.0
    plastic: bool = False


class SpikeRecord(NamedTuple):
    neuron: int
    time: float


def params_from_config(cfg, role: Role, threshold_scale: float = 1.0) -> NeuronParams:
    sec = cfg.section(f"snn.{role.value.lower()}")
    return NeuronParams(
        role=role,
        membrane_time_constant=sec["tau"],
        threshold=sec["threshold"] * threshold_scale,
        reset_potential=sec["reset"],
        refractory=sec["refractory"],
        bias_current=sec["bias"],
        integrator_leak_scale=sec["leak"],
        floor_potential=cfg["snn.floor_potential"],
    )


def quantize_weight(w):
    """Round onto the dyadic weight grid (scalar or array)."""
    return np.round(np.asarray(w, dtype=float) / WEIGHT_QUANTUM) * WEIGHT_QUANTUM


def _lif(v, refr, current, dt, tau, theta, reset, refractory, bias, leak, floor):
    """Vectorised Euler step; returns (v, refr, spiked). Inputs are not mutated."""
    blocked = refr > 0
    v_new = v + dt * (bias + current - leak * (v - reset) / tau)
    v_new = np.maximum(v_new, floor)
    v_new = np.where(blocked, reset, v_new)
    refr_new = np.where(blocked, np.maximum(refr - dt, 0.0), 0.0)
    spiked = v_new >= theta
    v_new = np.where(spiked, reset, v_new)
    refr_new = np.where(spiked, refractory, refr_new)
    return v_new, refr_new, spiked


def step_neuron(state: NeuronState, params: NeuronParams, input_current: float,
                dt: float, t: float = 0.0) -> tuple[NeuronState, bool]:
    """Advance one cell by ``dt`` ms; a refractory cell is held at reset."""
    if not dt > 0:
        raise ConfigError("snn", "dt must be > 0")
    if not math.isfinite(input_current):
        raise NumericInputError(f"non-finite input current {input_current!r}")
    p = params
    v, refr, spk = _lif(np.array([state.potential]), np.array([state.refractory_remaining]),
                        np.array([input_current]), dt, p.membrane_time_constant, p.threshold,
                        p.reset_potential, p.refractory, p.bias_current,
                        p.integrator_leak_scale, p.floor_potential)
    spiked = bool(spk[0])
    return NeuronState(float(v[0]), float(refr[0]),
                       t if spiked else state.last_spike_time), spiked


def interspike_interval(params: NeuronParams, current: float, dt: float) -> int | None:
    """Closed-form steps between spikes under constant drive (Euler map).

    Starting from reset, ``u_n = u* (1 - a^n)`` with ``a = 1 - dt*leak/tau``;
    returns ``None`` when the drive never reaches threshold.
    """
    p = params
    drive = p.bias_current + current
    k = p.integrator_leak_scale / p.membrane_time_constant
    gap = p.threshold - p.reset_potential
    hold = math.ceil(p.refractory / dt - 1e-12)
    if k == 0:
        if drive <= 0:
            return None
        n = math.ceil(gap / (dt * drive) - 1e-12)
    else:
        u_star = drive / k
        if u_star < gap:
            return None
        a = 1.0 - dt * k
        n = math.ceil(math.log(1.0 - gap / u_star) / math.log(a) - 1e-12)
        # guard the float ceiling against the discrete recursion
        u = lambda m: u_star * (1.0 - a ** m)
        while n > 1 and u(n - 1) >= gap:
            n -= 1
        while u(n) < gap:
            n += 1
    return n + hold


class DelayQueue:
    """Ring buffer of future input currents, one row per pending step."""

    def __init__(self, n_neurons: int, max_delay_steps: int):
        self.n = n_neurons
        self.length = max_delay_steps + 1
        self.buffer = np.zeros((self.length, n_neurons))
        self._flat = self.buffer.reshape(-1)

    def add(self, step: int, posts: np.ndarray, weights: np.ndarray, delay_steps: np.ndarray):
        slots = (step + delay_steps) % self.length
        np.add.at(self._flat, slots * self.n + posts, weights)

    def pop(self, step: int) -> np.ndarray:
        row = step % self.length
        out = self.buffer[row].copy()
        self.buffer[row] = 0.0
        return out

    def peek(self, step: int) -> np.ndarray:
        return self.buffer[step % self.length]


class _Fanout:
    """Synapses grouped by presynaptic neuron (CSR layout)."""

    def __init__(self, n: int, pre, post, weight, delay_steps):
        order = np.argsort(pre, kind="stable")
        self.pre = np.asarray(pre)[order]
        self.post = np.asarray(post)[order]
        self.weight = np.asarray(weight, dtype=float)[order]
        self.delay_steps = np.asarray(delay_steps)[order]
        self.order = order
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.indptr, self.pre + 1, 1)
        np.cumsum(self.indptr, out=self.indptr)

    def select(self, spiking: np.ndarray) -> np.ndarray:
        if len(spiking) == 0:
            return np.zeros(0, dtype=np.int64)
        starts = self.indptr[spiking]
        counts = self.indptr[spiking + 1] - starts
        total = int(counts.sum())
        if total == 0:
            return np.zeros(0, dtype=np.int64)
        offsets = np.repeat(starts - np.cumsum(counts) + counts, counts)
        return offsets + np.arange(total)


def deliver_spikes(spiking: np.ndarray, fanout: _Fanout, queue: DelayQueue, step: int) -> None:
    """Schedule each spike's weight onto its post cell ``delay/dt`` steps ahead."""
    idx = fanout.select(np.asarray(spiking, dtype=np.int64))
    if len(idx):
        queue.add(step, fanout.post[idx], fanout.weight[idx], fanout.delay_steps[idx])


class Network:
    """A set of LIF cells plus delayed current-based synapses.

    Build once, then call :meth:`step` with the external drive for the tick.
    The update is synchronous: due inputs are collected, every cell steps,
    and the new spikes are queued for later ticks.
    """

    def __init__(self, params: Sequence[NeuronParams], synapses: Iterable[Synapse],
                 dt: float = 1.0, names: Sequence[str] | None = None):
        if not dt > 0:
            raise ConfigError("snn", "dt must be > 0")
        self.dt = dt
        self.params = list(params)
        n = self.n = len(self.params)
        self.names = list(names) if names is not None else [str(i) for i in range(n)]
        self.roles = [p.role for p in self.params]
        self.tau = np.array([p.membrane_time_constant for p in self.params])
        self.theta = np.array([p.threshold for p in self.params])
        self.reset_v = np.array([p.reset_potential for p in self.params])
        self.refractory = np.array([p.refractory for p in self.params])
        self.bias = np.array([p.bias_current for p in self.params])
        self.leak = np.array([p.integrator_leak_scale for p in self.params])
        self.floor = np.array([p.floor_potential for p in self.params])

        syn = list(synapses)
        self.synapses = syn
        pre = np.array([s.pre for s in syn], dtype=np.int64)
        post = np.array([s.post for s in syn], dtype=np.int64)
        if len(syn) and (pre.min() < 0 or post.min() < 0 or pre.max() >= n or post.max() >= n):
            bad = next(s for s in syn if not (0 <= s.pre < n and 0 <= s.post < n))
            raise ConfigError("snn", f"synapse references unknown neuron: {bad}")
        delay_steps = []
        for s in syn:
            k = s.delay / dt
            if s.delay < dt or abs(k - round(k)) > 1e-9:
                raise ConfigError("snn", f"delay {s.delay} is not a positive multiple of dt={dt}")
            delay_steps.append(int(round(k)))
        delay_steps = np.array(delay_steps, dtype=np.int64)
        weight = quantize_weight([s.weight for s in syn]) if syn else np.zeros(0)
        self.plastic = np.array([s.plastic for s in syn], dtype=bool)
        self._fan = _Fanout(n, pre, post, weight, delay_steps)
        max_delay = int(delay_steps.max()) if len(syn) else 1
        self.queue = DelayQueue(n, max_delay)
        self.reset()

    # synapse weights in construction order (view through the CSR permutation)
    @property
    def weights(self) -> np.ndarray:
        w = np.empty_like(self._fan.weight)
        w[self._fan.order] = self._fan.weight
        return w

    def set_weights(self, idx: np.ndarray, values: np.ndarray) -> None:
        """Overwrite weights of synapses ``idx`` (construction order)."""
        pos = self._inverse_order[idx]
        self._fan.weight[pos] = quantize_weight(values)

    @property
    def _inverse_order(self) -> np.ndarray:
        inv = getattr(self, "_inv", None)
        if inv is None:
            inv = np.empty_like(self._fan.order)
            inv[self._fan.order] = np.arange(len(inv))
            self._inv = inv
        return inv

    def reset(self) -> None:
        self.v = self.reset_v.copy()
        self.refr = np.zeros(self.n)
        self.step_index = 0
        self.queue.buffer[:] = 0.0
        self.last_spike = np.full(self.n, -np.inf)

    def step(self, external: np.ndarray | None = None) -> np.ndarray:
        """Advance one tick; returns the ids of cells that spiked."""
        current = self.queue.pop(self.step_index)
        if external is not None:
            if not np.all(np.isfinite(external)):
                raise NumericInputError("non-finite external drive")
            current += external
        self.v, self.refr, spiked = _lif(self.v, self.refr, current, self.dt, self.tau,
                                         self.theta, self.reset_v, self.refractory,
                                         self.bias, self.leak, self.floor)
        ids = np.flatnonzero(spiked)
        if len(ids):
            self.last_spike[ids] = self.step_index * self.dt
            deliver_spikes(ids, self._fan, self.queue, self.step_index)
        self.step_index += 1
        return ids


def step_network(network: Network, external_drive: np.ndarray | None = None) -> list[SpikeRecord]:
    """One synchronous tick, reported as spike records stamped with the tick time."""
    t = network.step_index * network.dt
    ids = network.step(external_drive)
    return [SpikeRecord(int(i), t) for i in ids]


def firing_rate(spike_times: Sequence[float] | np.ndarray, window: float, t: float) -> float:
    """Rate in Hz over the half-open window ``(t - window, t]`` (times in ms)."""
    if not window > 0:
        raise ValueError("window must be > 0")
    times = np.asarray(spike_times, dtype=float)
    count = np.count_nonzero((times > t - window) & (times <= t))
    return count * 1000.0 / window
