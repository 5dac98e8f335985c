"""Simulated robotic head: wall target, 6-DOF servo pose, and frame rendering.

Head frame: x right, y up, z forward, neck pivot at the origin midway
between the eyes. Gaze angles compose additively (neck + eye) as Fick
azimuth/elevation, so that the line of sight of an eye is
``(cos el sin az, sin el, cos el cos az)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError
from .retina import FrameSpec, TargetDot

TICK_DEG = 300.0 / 1023.0
CENTER_TICK = 512
AXES = ("left_pan", "left_tilt", "right_pan", "right_tilt", "neck_pan", "neck_tilt")


def ticks_to_deg(offset_ticks):
    """Servo offset from the straight-ahead tick (512) to degrees."""
    return np.asarray(offset_ticks) * TICK_DEG if np.ndim(offset_ticks) else offset_ticks * TICK_DEG


def deg_to_ticks(angle_deg) -> int:
    return int(round(angle_deg / TICK_DEG))


@dataclass(frozen=True)
class Geometry:
    wall_distance: float = 55.0
    interocular: float = 6.5
    eye_fov_h: float = 60.0
    eye_fov_v: float = 40.0

    def __post_init__(self):
        if not self.wall_distance > 0:
            raise ConfigError("plant", "wall_distance must be > 0")
        if self.interocular < 0:
            raise ConfigError("plant", "interocular must be >= 0")
        if not (0 < self.eye_fov_h < 180 and 0 < self.eye_fov_v < 180):
            raise ConfigError("plant", "field of view must lie in (0, 180) degrees")


@dataclass(frozen=True)
class Pose:
    """Servo offsets in ticks from straight ahead; angles derive from them."""
    left_pan: int = 0
    left_tilt: int = 0
    right_pan: int = 0
    right_tilt: int = 0
    neck_pan: int = 0
    neck_tilt: int = 0

    def angle(self, axis: str) -> float:
        return getattr(self, axis) * TICK_DEG

    def ticks(self, axis: str) -> int:
        """Absolute AX-12A position (0-1023)."""
        return CENTER_TICK + getattr(self, axis)

    def angles(self) -> dict[str, float]:
        return {a: self.angle(a) for a in AXES}

    @classmethod
    def from_angles(cls, **deg) -> "Pose":
        return cls(**{k: deg_to_ticks(v) for k, v in deg.items()})


def eye_position(geom: Geometry, eye: str, neck_pan_deg: float) -> tuple[float, float, float]:
    h = geom.interocular / 2
    x0 = -h if eye == "left" else h
    psi = math.radians(neck_pan_deg)
    # neck tilt rotates about the x axis, which leaves the eye baseline fixed
    return (x0 * math.cos(psi), 0.0, -x0 * math.sin(psi))


def _gaze(eye: str, angles: dict[str, float]) -> tuple[float, float]:
    return (angles["neck_pan"] + angles[f"{eye}_pan"], angles["neck_tilt"] + angles[f"{eye}_tilt"])


def _direction_angles(dx: float, dy: float, dz: float) -> tuple[float, float]:
    az = math.degrees(math.atan2(dx, dz))
    el = math.degrees(math.atan2(dy, math.hypot(dx, dz)))
    return az, el


def target_angles(geom: Geometry, point: tuple[float, float], eye: str | None,
                  neck_pan_deg: float = 0.0) -> tuple[float, float]:
    """World azimuth/elevation of a wall point seen from an eye (None: the neck pivot)."""
    if eye is None:
        p = (0.0, 0.0, 0.0)
    else:
        p = eye_position(geom, eye, neck_pan_deg)
    return _direction_angles(point[0] - p[0], point[1] - p[1], geom.wall_distance - p[2])


def wall_to_angles(point: tuple[float, float], eye: str, pose, geom: Geometry = Geometry()):
    """Target direction relative to the eye's current optical axis (degrees).

    ``pose`` is a :class:`Pose` or a mapping of axis angles in degrees.
    """
    ang = pose.angles() if isinstance(pose, Pose) else pose
    az_t, el_t = target_angles(geom, point, eye, ang["neck_pan"])
    az_g, el_g = _gaze(eye, ang)
    return (az_t - az_g, el_t - el_g)


def angles_to_wall(rel: tuple[float, float], eye: str, pose, geom: Geometry = Geometry()):
    """Inverse of :func:`wall_to_angles`: where on the wall a relative direction lands."""
    ang = pose.angles() if isinstance(pose, Pose) else pose
    az_g, el_g = _gaze(eye, ang)
    az = math.radians(rel[0] + az_g)
    el = math.radians(rel[1] + el_g)
    d = (math.cos(el) * math.sin(az), math.sin(el), math.cos(el) * math.cos(az))
    p = eye_position(geom, eye, ang["neck_pan"])
    if d[2] <= 0:
        raise ValueError("direction does not reach the wall")
    s = (geom.wall_distance - p[2]) / d[2]
    return (p[0] + s * d[0], p[1] + s * d[1])


def render_frame(pose, point: tuple[float, float], eye: str, geom: Geometry = Geometry(),
                 frame: FrameSpec = FrameSpec(), dot_radius: float = 12.0) -> TargetDot:
    """Linear angle-to-pixel map of the laser dot into one eye's frame."""
    az, el = wall_to_angles(point, eye, pose, geom)
    dx = az * (frame.width / 2) / (geom.eye_fov_h / 2)
    dy = el * (frame.height / 2) / (geom.eye_fov_v / 2)
    visible = abs(dx) <= frame.width / 2 and abs(dy) <= frame.height / 2
    return TargetDot(dx, dy, dot_radius, visible, frame)


def gaze_error(pose, point: tuple[float, float], geom: Geometry = Geometry()) -> dict[str, float]:
    """Relative error (gaze minus target, degrees) per eye and axis.

    Gaze adds the neck angle to each eye's angle; positive = right / up.
    """
    ang = pose.angles() if isinstance(pose, Pose) else pose
    out = {}
    for eye in ("left", "right"):
        az_t, el_t = target_angles(geom, point, eye, ang["neck_pan"])
        az_g, el_g = _gaze(eye, ang)
        out[f"{eye}_h"] = az_g - az_t
        out[f"{eye}_v"] = el_g - el_t
    return out


# --- servo dynamics ---------------------------------------------------------

class ServoBank:
    """Six position servos with first-order lag toward the commanded tick.

    State is kept as offsets from the straight-ahead tick so that mirrored
    commands produce exactly mirrored positions.
    """

    def __init__(self, tau: float = 30.0, dt: float = 1.0, pose: Pose | None = None):
        if not tau > 0:
            raise ConfigError("plant", "servo_tau must be > 0")
        self.alpha = dt / tau
        pose = pose or Pose()
        self.command = np.array([getattr(pose, a) for a in AXES], dtype=np.int64)
        self.state = self.command.astype(float)
        self.position = self.command.copy()

    def set_command(self, pose: Pose) -> None:
        self.command = np.array([getattr(pose, a) for a in AXES], dtype=np.int64)

    def step(self) -> bool:
        """Integrate one tick; returns True if any quantised position changed."""
        self.state = self.state + self.alpha * (self.command - self.state)
        pos = np.round(self.state).astype(np.int64)
        changed = not np.array_equal(pos, self.position)
        self.position = pos
        return changed

    def pose(self) -> Pose:
        return Pose(*(int(p) for p in self.position))


# --- target trajectories ------------------------------------------------------

@dataclass
class TrajectorySpec:
    kind: str = "random"  # random | repetitive | scripted
    seed: int = 0
    dwell: float = 2000.0
    amplitude: tuple[float, float] = (12.0, 8.0)
    pattern: list[tuple[float, float]] = field(default_factory=lambda: [(-8.0, 0.0), (8.0, 0.0)])
    path: str | None = None
    mirror_x: bool = False
    waypoints: list[tuple[float, float, float]] | None = None  # in-memory scripted path

    def __post_init__(self):
        if self.kind not in ("random", "random_steps", "repetitive", "repetitive_pattern", "scripted"):
            raise ConfigError("trajectory", f"unknown trajectory kind {self.kind!r}")
        if not self.dwell > 0:
            raise ConfigError("trajectory", "dwell must be > 0")


class Trajectory:
    """Piecewise-constant wall positions (cm) as a function of time (ms)."""

    def __init__(self, spec: TrajectorySpec):
        self.spec = spec
        self._cache: dict[int, tuple[float, float]] = {}
        kind = spec.kind
        if kind in ("random", "random_steps"):
            self._mode = "random"
        elif kind in ("repetitive", "repetitive_pattern"):
            if not spec.pattern:
                raise ConfigError("trajectory", "repetitive pattern is empty")
            self._mode = "repetitive"
        else:
            self._mode = "scripted"
            if spec.waypoints is not None:
                wp = np.asarray(spec.waypoints, dtype=float).reshape(-1, 3)
                if len(wp) == 0 or np.any(np.diff(wp[:, 0]) <= 0):
                    raise ScriptError("waypoint times must be non-empty and increasing")
                self._times, self._points = wp[:, 0], [(float(x), float(y)) for x, y in wp[:, 1:]]
            else:
                self._times, self._points = load_scripted(spec.path)

    def _random_point(self, k: int) -> tuple[float, float]:
        pt = self._cache.get(k)
        if pt is None:
            rng = np.random.default_rng([self.spec.seed, k])
            ax, ay = self.spec.amplitude
            pt = (float(rng.uniform(-ax, ax)), float(rng.uniform(-ay, ay)))
            self._cache[k] = pt
        return pt

    def __call__(self, t: float) -> tuple[float, float]:
        if t < 0:
            raise ValueError("t must be >= 0")
        if self._mode == "random":
            x, y = self._random_point(int(t // self.spec.dwell))
        elif self._mode == "repetitive":
            pat = self.spec.pattern
            x, y = pat[int(t // self.spec.dwell) % len(pat)]
        else:
            i = int(np.searchsorted(self._times, t, side="right")) - 1
            x, y = self._points[max(i, 0)]
        return (-x, y) if self.spec.mirror_x else (x, y)


def target_position(traj: TrajectorySpec, t: float) -> tuple[float, float]:
    return Trajectory(traj)(t)


class ScriptError(ValueError):
    pass


def load_scripted(path) -> tuple[np.ndarray, list[tuple[float, float]]]:
    """Read ``t_ms x_cm y_cm`` waypoints (whitespace-delimited, '#' comments)."""
    if not path:
        raise ScriptError("scripted trajectory needs a path")
    p = Path(path)
    if not p.is_file():
        raise ScriptError(f"scripted trajectory file not found: {p}")
    times, points = [], []
    for lineno, line in enumerate(p.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if len(parts) != 3:
                raise ValueError
            t, x, y = (float(v) for v in parts)
            if not all(map(math.isfinite, (t, x, y))):
                raise ValueError
        except ValueError:
            raise ScriptError(f"{p}:{lineno}: expected 't_ms x_cm y_cm', got {line!r}") from None
        if times and t <= times[-1]:
            raise ScriptError(f"{p}:{lineno}: time {t:g} is not increasing")
        times.append(t)
        points.append((x, y))
    if not times:
        raise ScriptError(f"{p}: no waypoints")
    return np.array(times), points


def write_scripted(path, waypoints) -> None:
    Path(path).write_text("".join(f"{t:g} {x:.6f} {y:.6f}\n" for t, x, y in waypoints))


def geometry_from_config(cfg) -> Geometry:
    return Geometry(cfg["plant.wall_distance"], cfg["plant.interocular"],
                    cfg["plant.fov_h"], cfg["plant.fov_v"])


def parse_pattern(text: str) -> list[tuple[float, float]]:
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            x, y = (float(v) for v in chunk.split())
        except ValueError:
            raise ConfigError("trajectory", f"bad pattern point {chunk!r}") from None
        out.append((x, y))
    return out


def trajectory_from_config(cfg, seed: int | None = None) -> TrajectorySpec:
    return TrajectorySpec(
        kind=cfg["trajectory.kind"],
        seed=cfg["harness.seed"] if seed is None else seed,
        dwell=cfg["trajectory.dwell"],
        amplitude=(cfg["trajectory.amplitude_x"], cfg["trajectory.amplitude_y"]),
        pattern=parse_pattern(cfg["trajectory.pattern"]),
        path=cfg["trajectory.path"] or None,
        mirror_x=cfg["trajectory.mirror_x"],
    )
