"""Closed-loop experiment runner and tracking metrics.

One tick (dt = 1 ms): render both eyes' frames -> SC activation -> network
step. Every decode window: MN rates -> servo deltas -> ROM clamp -> servo
command, reward/modulator bookkeeping, optional plasticity. The servos then
integrate. A trace row is taken at the tick nearest each 45 Hz sample.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal

from .config import Config, ConfigError
from .connectome import ControllerAssembly, assemble_controller
from .decoder import clamp_rom, decode_delta, rom_from_config, spec_from_config
from .learning import HebbianLearner, LearningParams, compute_reward
from .plant import (AXES, Pose, ServoBank, Trajectory, TrajectorySpec, gaze_error,
                    geometry_from_config, render_frame, target_angles, trajectory_from_config)
from .retina import RetinaCache, frame_from_config
from .snn import NumericInputError

log = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "t", "target_az", "target_el",
    "left_pan", "left_tilt", "right_pan", "right_tilt", "neck_pan", "neck_tilt",
    "re_left_h", "re_left_v", "re_right_h", "re_right_v", "R", "M",
)
EYE_AXES = ("left_h", "right_h", "left_v", "right_v")
EYE_AXIS_LABELS = {
    "left_h": "Left Eye - Horizontal", "right_h": "Right Eye - Horizontal",
    "left_v": "Left Eye - Vertical", "right_v": "Right Eye - Vertical",
}
# hardware reference values (degrees): (RE, RE-HL, RMSE, RMSE-HL)
HARDWARE_TABLE = {
    "left_h": (-1.87, -1.487, 3.55, 2.87),
    "right_h": (2.115, 2.049, 3.93, 3.44),
    "left_v": (-1.219, -0.697, 3.14, 3.02),
    "right_v": (-0.823, -0.421, 3.03, 2.95),
}
HARDWARE_MEAN_RE = -0.685


@dataclass
class ExperimentConfig:
    config: Config
    duration: float = 120000.0
    seed: int = 0
    learning: bool = False
    trajectory: TrajectorySpec | None = None
    sample_rate: float = 45.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError("harness", "duration must be > 0")
        dt = self.config["snn.dt"]
        if not 0 < self.sample_rate <= 1000.0 / dt:
            raise ConfigError("harness", "sample rate must lie in (0, 1000/dt]")
        if self.trajectory is None:
            self.trajectory = trajectory_from_config(self.config, self.seed)

    @classmethod
    def from_config(cls, cfg: Config, **overrides) -> "ExperimentConfig":
        kw = dict(duration=cfg["harness.duration"], seed=cfg["harness.seed"],
                  learning=cfg["learning.enabled"], sample_rate=cfg["harness.sample_rate"])
        kw.update(overrides)
        if "trajectory" not in overrides:
            kw["trajectory"] = trajectory_from_config(cfg, kw["seed"])
        return cls(cfg, **kw)


@dataclass
class TraceRow:
    t: float
    target_az: float
    target_el: float
    left_pan: float
    left_tilt: float
    right_pan: float
    right_tilt: float
    neck_pan: float
    neck_tilt: float
    re_left_h: float
    re_left_v: float
    re_right_h: float
    re_right_v: float
    R: float
    M: float


class Trace:
    """Column-major trace; ``trace["re_left_h"]`` gives a column."""

    def __init__(self, rows: np.ndarray):
        self.data = np.asarray(rows, dtype=float).reshape(-1, len(TRACE_COLUMNS))

    def __len__(self):
        return len(self.data)

    def __getitem__(self, col: str) -> np.ndarray:
        return self.data[:, TRACE_COLUMNS.index(col)]

    def rows(self) -> list[TraceRow]:
        return [TraceRow(*r) for r in self.data]

    def to_text(self) -> str:
        lines = [" ".join(TRACE_COLUMNS)]
        for r in self.data:
            lines.append(f"{int(r[0])} " + " ".join(f"{v:.6f}" for v in r[1:]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Trace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or tuple(lines[0].split()) != TRACE_COLUMNS:
            raise ValueError("not a trace file")
        return cls(np.array([[float(v) for v in ln.split()] for ln in lines[1:]]))


@dataclass
class MetricsReport:
    median_re: dict[str, float]
    rmse: dict[str, float]
    mean_re: dict[str, float]
    overall_mean_re: float
    n_samples: int

    def to_text(self) -> str:
        lines = ["eye_axis median_re rmse mean_re"]
        for k in EYE_AXES:
            lines.append(f"{k} {self.median_re[k]:.6f} {self.rmse[k]:.6f} {self.mean_re[k]:.6f}")
        lines.append(f"overall - - {self.overall_mean_re:.6f}")
        lines.append(f"# samples {self.n_samples}")
        lines.append(f"# hardware reference overall mean RE {HARDWARE_MEAN_RE} deg")
        return "\n".join(lines) + "\n"


class TraceError(ValueError):
    pass


def compute_metrics(trace: Trace) -> MetricsReport:
    """Median and RMSE of the relative error per eye-axis over all rows."""
    if len(trace) == 0:
        raise TraceError("cannot compute metrics of an empty trace")
    med, rmse, mean = {}, {}, {}
    for k in EYE_AXES:
        re = trace[f"re_{k}"]
        med[k] = float(np.median(re))
        rmse[k] = float(np.sqrt(np.mean(re * re)))
        mean[k] = float(np.mean(re))
    overall = float(np.mean([mean[k] for k in EYE_AXES]))
    return MetricsReport(med, rmse, mean, overall, len(trace))


def highpass_variance(x, sample_rate: float, cutoff: float = 2.0, order: int = 4) -> float:
    """Variance of the zero-phase Butterworth high-passed signal (fixational jitter)."""
    x = np.asarray(x, dtype=float)
    sos = signal.butter(order, cutoff, btype="highpass", fs=sample_rate, output="sos")
    if len(x) <= 3 * (2 * len(sos) + 1):
        raise TraceError("signal too short to filter")
    return float(np.var(signal.sosfiltfilt(sos, x)))


@dataclass
class RunResult:
    trace: Trace
    metrics: MetricsReport
    deltas: np.ndarray | None = None  # (n_windows, 6) decoded ticks, AXES order
    window_log: np.ndarray | None = None  # (n_windows, 5) t R R_avg M sum_abs_dw
    group_rates: dict[str, np.ndarray] | None = None
    final_weights: np.ndarray | None = None
    assembly: ControllerAssembly | None = field(default=None, repr=False)

    def __iter__(self):
        yield self.trace
        yield self.metrics


class Simulator:
    """Owns every piece of state of one closed-loop run."""

    def __init__(self, exp: ExperimentConfig, assembly: ControllerAssembly | None = None,
                 initial_pose: Pose | None = None):
        cfg = exp.config
        self.exp = exp
        self.dt = cfg["snn.dt"]
        self.frame = frame_from_config(cfg)
        self.geom = geometry_from_config(cfg)
        self.asm = assembly or assemble_controller(cfg)
        self.net = self.asm.network
        self.net.reset()  # a shared assembly keeps its weights but not its state
        self.grid = self.asm.grid
        self.retina = RetinaCache(self.grid, cfg["retina.activation_fraction"])
        self.sc_drive = cfg["retina.sc_drive"]
        self.dot_radius = cfg["plant.dot_radius"]
        self.spec = spec_from_config(cfg)
        self.rom = rom_from_config(cfg)
        ws = self.spec.window / self.dt
        if abs(ws - round(ws)) > 1e-9 or ws < 1:
            raise ConfigError("decoder", "decode window must be a whole number of ticks")
        self.window_steps = int(round(ws))
        self.servo = ServoBank(cfg["plant.servo_tau"], self.dt, initial_pose)
        self.command = initial_pose or Pose()
        self.traj = Trajectory(exp.trajectory)
        self.learner = HebbianLearner(self.net, self.asm.plastic, LearningParams.from_config(cfg),
                                      self.spec.window)
        self.reward_shape = (cfg["learning.reward_shape"], cfg["learning.reward_sigma"])
        self.learning = exp.learning
        # per-axis (positive ids, positive sizes, negative ...)
        self._axis = []
        for axis in AXES:
            pos, neg = self.asm.mn_groups[axis]
            self._axis.append(([self.asm.groups[g] for g in pos], [self.asm.groups[g] for g in neg]))
        self._ext = np.zeros(self.net.n)
        self._dots = (None, None)
        self._key = None
        self.counts = np.zeros(self.net.n)
        self.step_index = 0

    def dots(self, pose: Pose, point):
        ang = pose.angles()
        return tuple(render_frame(ang, point, eye, self.geom, self.frame, self.dot_radius)
                     for eye in ("left", "right"))

    def _refresh_input(self, pose: Pose, point) -> None:
        key = (pose, point)
        if key == self._key:
            return
        self._key = key
        self._dots = self.dots(pose, point)
        self._ext[:] = 0.0
        for eye, dot in zip(("L", "R"), self._dots):
            act = self.retina.active(dot)
            if len(act):
                self._ext[self.asm.sc_ids[eye][act]] = self.sc_drive

    def decode(self, counts: np.ndarray) -> dict[str, int]:
        rates = counts * (1000.0 / self.spec.window)
        out = {}
        for axis, (pos, neg) in zip(AXES, self._axis):
            rp = sum(rates[g].mean() for g in pos)
            rn = sum(rates[g].mean() for g in neg)
            out[axis] = decode_delta(rp, rn, self.spec)
        return out

    def open_loop(self, active: dict[str, Sequence[int]], duration: float,
                  record_groups: Sequence[str] = ()) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        """Hold a fixed SC set active with the plant disconnected.

        ``active`` maps eye (``"L"``/``"R"``) to RF ids. Returns per-window
        decoded deltas (AXES order) and per-window group rates.
        """
        ext = np.zeros(self.net.n)
        for eye, ids in active.items():
            ext[self.asm.sc_ids[eye][np.asarray(ids, dtype=np.int64)]] = self.sc_drive
        deltas, rates = [], {g: [] for g in record_groups}
        counts = np.zeros(self.net.n)
        for step in range(int(round(duration / self.dt))):
            spikes = self.net.step(ext)
            counts[spikes] += 1
            if (step + 1) % self.window_steps == 0:
                d = self.decode(counts)
                deltas.append([d[a] for a in AXES])
                for g in record_groups:
                    rates[g].append(counts[self.asm.groups[g]].mean() * 1000.0 / self.spec.window)
                counts[:] = 0.0
        return (np.array(deltas, dtype=np.int64).reshape(-1, len(AXES)),
                {g: np.array(v) for g, v in rates.items()})

    def run(self, duration: float, sample_rate: float, record_groups: Sequence[str] = ()) -> RunResult:
        n_steps = int(round(duration / self.dt))
        period = 1000.0 / sample_rate
        next_k = 0
        next_t = 0
        rows = []
        deltas = []
        wlog = []
        grp_rates = {g: [] for g in record_groups}
        R = M = 0.0
        pose = self.servo.pose()
        for step in range(n_steps):
            t = step * self.dt
            point = self.traj(t)
            self._refresh_input(pose, point)
            spikes = self.net.step(self._ext)
            if len(spikes):
                self.counts[spikes] += 1
            if (step + 1) % self.window_steps == 0:
                d = self.decode(self.counts)
                deltas.append([d[a] for a in AXES])
                for g in record_groups:
                    grp_rates[g].append(self.counts[self.asm.groups[g]].mean() * 1000.0 / self.spec.window)
                self.command = clamp_rom(self.command, d, self.rom)
                self.servo.set_command(self.command)
                R = compute_reward(self._dots, self.frame, *self.reward_shape)
                rs = self.learner.observe_reward(R)
                M = rs.M
                rates = self.counts * (1000.0 / self.spec.window)
                dw = self.learner.update(rates, learn=self.learning)
                wlog.append((t + self.dt, R, rs.R_avg, M, dw))
                self.counts[:] = 0.0
            self.servo.step()
            pose = self.servo.pose()
            if step == next_t:
                rows.append(self._row(t, pose, point, R, M))
                next_k += 1
                next_t = int(round(next_k * period / self.dt))
        trace = Trace(np.array(rows))
        return RunResult(
            trace=trace, metrics=compute_metrics(trace),
            deltas=np.array(deltas, dtype=np.int64).reshape(-1, len(AXES)),
            window_log=np.array(wlog).reshape(-1, 5),
            group_rates={g: np.array(v) for g, v in grp_rates.items()},
            final_weights=self.net.weights[self.asm.plastic].copy(),
            assembly=self.asm,
        )

    def _row(self, t, pose: Pose, point, R, M):
        ang = pose.angles()
        az, el = target_angles(self.geom, point, None)
        re = gaze_error(ang, point, self.geom)
        return (t, az, el, ang["left_pan"], ang["left_tilt"], ang["right_pan"], ang["right_tilt"],
                ang["neck_pan"], ang["neck_tilt"], re["left_h"], re["left_v"], re["right_h"],
                re["right_v"], R, M)


def run_experiment(exp: ExperimentConfig | Config, record_groups: Sequence[str] = (),
                   assembly: ControllerAssembly | None = None) -> RunResult:
    """Run one closed-loop experiment; unpacks as ``trace, metrics``."""
    if isinstance(exp, Config):
        exp = ExperimentConfig.from_config(exp)
    sim = Simulator(exp, assembly)
    with np.errstate(invalid="raise", over="raise", divide="raise"):
        try:
            return sim.run(exp.duration, exp.sample_rate, record_groups)
        except FloatingPointError as exc:
            raise NumericInputError(str(exc)) from exc


def write_run(result: RunResult, out_dir, prefix: str = "", learning_log: bool = False) -> tuple[Path, Path]:
    """Write ``<prefix>trace.txt`` and ``<prefix>metrics.txt`` (plus the learning log)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tp, mp = out / f"{prefix}trace.txt", out / f"{prefix}metrics.txt"
    tp.write_text(result.trace.to_text())
    mp.write_text(result.metrics.to_text())
    if learning_log and result.window_log is not None:
        (out / f"{prefix}learning.txt").write_text(learning_log_text(result.window_log))
    return tp, mp


def learning_log_text(window_log: np.ndarray) -> str:
    lines = ["t_ms R R_avg M sum_abs_dw"]
    lines += [f"{int(r[0])} {r[1]:.6f} {r[2]:.6f} {r[3]:.6f} {r[4]:.9e}" for r in window_log]
    return "\n".join(lines) + "\n"


@dataclass
class ComparisonRow:
    seed: int
    off: MetricsReport
    on: MetricsReport


def compare_learning(cfg: Config, seeds: Sequence[int] | int, duration: float | None = None,
                     runner=None) -> list[ComparisonRow]:
    """Run every seed with plasticity off and on over the same trajectory."""
    if isinstance(seeds, int):
        if seeds < 1:
            raise ConfigError("harness", "need at least one seed")
        seeds = list(range(seeds))
    runner = runner or run_experiment
    rows = []
    for seed in seeds:
        kw = {"seed": seed}
        if duration is not None:
            kw["duration"] = duration
        off = runner(ExperimentConfig.from_config(cfg, learning=False, **kw))
        on = runner(ExperimentConfig.from_config(cfg, learning=True, **kw))
        rows.append(ComparisonRow(seed, off.metrics, on.metrics))
        log.info("seed %d: rmse off %s on %s", seed,
                 {k: round(v, 3) for k, v in off.metrics.rmse.items()},
                 {k: round(v, 3) for k, v in on.metrics.rmse.items()})
    return rows


def comparison_table(rows: Sequence[ComparisonRow]) -> str:
    """Table-I-shaped comparison: per seed, then aggregate and hardware reference."""
    head = ["seed"] + [f"{k}_{c}" for k in EYE_AXES for c in ("RE", "RE-HL", "RMSE", "RMSE-HL")]
    lines = [" ".join(head)]
    for r in rows:
        vals = []
        for k in EYE_AXES:
            vals += [r.off.median_re[k], r.on.median_re[k], r.off.rmse[k], r.on.rmse[k]]
        lines.append(f"{r.seed} " + " ".join(f"{v:.4f}" for v in vals))
    if rows:
        agg = []
        for k in EYE_AXES:
            agg += [float(np.median([r.off.median_re[k] for r in rows])),
                    float(np.median([r.on.median_re[k] for r in rows])),
                    float(np.mean([r.off.rmse[k] for r in rows])),
                    float(np.mean([r.on.rmse[k] for r in rows]))]
        lines.append("aggregate " + " ".join(f"{v:.4f}" for v in agg))
    ref = []
    for k in EYE_AXES:
        ref += list(HARDWARE_TABLE[k])
    lines.append("# hardware " + " ".join(f"{v:.4f}" for v in ref))
    return "\n".join(lines) + "\n"
