"""Foveated retinotopic front end: square receptive fields and SC activation.

Geometry is expressed relative to the fovea centre so that mirroring a
stimulus is an exact sign flip. Pixel ``(i, j)`` (column, row) has its centre
at ``(i + 0.5, j + 0.5)``; rows count upward from the bottom edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import ConfigError


@dataclass(frozen=True)
class FrameSpec:
    width: int = 720
    height: int = 480
    fovea_half_width: float = 30.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("retina", "frame size must be positive")
        if not 0 < self.fovea_half_width < min(self.width, self.height) / 2:
            raise ConfigError("retina", "fovea_half_width must lie in (0, min(width, height)/2)")

    @property
    def fovea_center(self) -> tuple[float, float]:
        return (self.width / 2, self.height / 2)


@dataclass(frozen=True)
class ReceptiveField:
    id: int
    x0: int  # pixel rect [x0, x0+side) x [y0, y0+side)
    y0: int
    side: int
    dx: float  # centre offset from the fovea centre (px, +right)
    dy: float  # (px, +up)
    eccentricity: float  # L-infinity distance of the centre from the fovea centre
    horizontal: str  # "left" | "right"
    vertical: str  # "upper" | "lower"
    peripheral: bool
    foveal: bool

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + self.side / 2, self.y0 + self.side / 2)

    @property
    def area(self) -> int:
        return self.side * self.side


@dataclass(frozen=True)
class TargetDot:
    """Rendered laser spot; ``dx``/``dy`` are offsets from the fovea centre."""
    dx: float
    dy: float
    radius: float
    visible: bool = True
    frame: FrameSpec = field(default_factory=FrameSpec, compare=False, repr=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("dot radius must be > 0")

    @property
    def center(self) -> tuple[float, float]:
        cx, cy = self.frame.fovea_center
        return (cx + self.dx, cy + self.dy)

    @classmethod
    def at_pixel(cls, x: float, y: float, radius: float, frame: FrameSpec | None = None):
        frame = frame or FrameSpec()
        cx, cy = frame.fovea_center
        return cls(x - cx, y - cy, radius, True, frame)


def parse_ring_spec(text: str) -> list[tuple[float, int]]:
    """``"40:10, 160:20, inf:40"`` -> ``[(40, 10), (160, 20), (inf, 40)]``."""
    bands = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            outer, side = chunk.split(":")
            bands.append((float(outer), int(side)))
        except ValueError:
            raise ConfigError("retina", f"bad ring_spec band {chunk!r}") from None
    if not bands:
        raise ConfigError("retina", "ring_spec is empty")
    return bands


@dataclass
class RFGrid:
    frame: FrameSpec
    fields: list[ReceptiveField]
    labels: np.ndarray  # (height, width) RF id per pixel, row 0 = bottom

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, i) -> ReceptiveField:
        return self.fields[i]

    @property
    def areas(self) -> np.ndarray:
        return np.array([rf.area for rf in self.fields], dtype=float)

    def mirror_id(self, rf_id: int) -> int:
        """Id of the RF reflected across the vertical midline."""
        return self._mirror[rf_id]

    def __post_init__(self):
        key = {(rf.dx, rf.dy, rf.side): rf.id for rf in self.fields}
        self._mirror = np.array([key.get((-rf.dx, rf.dy, rf.side), -1) for rf in self.fields])


def build_rf_grid(spec: FrameSpec, ring_spec: Sequence[tuple[float, int]],
                  peripheral_threshold: float = 240.0) -> RFGrid:
    """Tile the frame with concentric square bands of square receptive fields.

    Each band ``(outer, side)`` covers pixels whose L-infinity distance from
    the fovea centre lies between the previous band's outer edge and
    ``outer``; squares are aligned on the fovea centre.
    """
    cx, cy = spec.fovea_center
    sides = [side for _, side in ring_spec]
    if any(b <= a for a, b in zip(sides, sides[1:])):
        raise ConfigError("retina", "ring_spec side lengths must strictly increase outward")
    if ring_spec[-1][0] != math.inf:
        raise ConfigError("retina", "last ring_spec band must be 'inf' (runs to the frame edge)")
    labels = np.full((spec.height, spec.width), -1, dtype=np.int64)
    fields: list[ReceptiveField] = []
    inner = 0.0
    reach = max(cx, cy, spec.width - cx, spec.height - cy)
    for outer, side in ring_spec:
        name = f"band {outer:g}:{side}"
        outer_eff = min(outer, reach)
        for val, what in ((inner, "inner edge"), (outer_eff, "outer edge")):
            if val != reach and (val % side) != 0:
                raise ConfigError("retina", f"{name}: {what} {val:g} is not a multiple of side {side}")
        if (cx % side) or (cy % side) or ((spec.width - cx) % side) or ((spec.height - cy) % side):
            if outer == math.inf:
                raise ConfigError("retina", f"{name}: frame half-extents are not multiples of {side}")
        k_max = int(math.ceil(outer_eff / side))
        for ky in range(-k_max, k_max):
            for kx in range(-k_max, k_max):
                lo_x, lo_y = kx * side, ky * side
                # L-inf extent of the square relative to the fovea centre
                near = max(max(lo_x, -(lo_x + side), 0), max(lo_y, -(lo_y + side), 0))
                far = max(abs(lo_x), abs(lo_x + side), abs(lo_y), abs(lo_y + side))
                if near < inner or far > outer_eff:
                    continue
                x0, y0 = int(cx + lo_x), int(cy + lo_y)
                if x0 < 0 or y0 < 0 or x0 + side > spec.width or y0 + side > spec.height:
                    continue
                block = labels[y0:y0 + side, x0:x0 + side]
                if (block >= 0).any():
                    raise ConfigError("retina", f"{name}: overlapping receptive field at ({x0}, {y0})")
                rid = len(fields)
                block[...] = rid
                dx, dy = lo_x + side / 2, lo_y + side / 2
                ecc = max(abs(dx), abs(dy))
                fields.append(ReceptiveField(
                    id=rid, x0=x0, y0=y0, side=side, dx=dx, dy=dy, eccentricity=ecc,
                    horizontal="left" if dx < 0 else "right",
                    vertical="lower" if dy < 0 else "upper",
                    peripheral=ecc > peripheral_threshold,
                    foveal=max(abs(lo_x), abs(lo_x + side), abs(lo_y), abs(lo_y + side))
                    <= spec.fovea_half_width,
                ))
        inner = outer_eff
    if (labels < 0).any():
        ys, xs = np.nonzero(labels < 0)
        raise ConfigError("retina", f"ring_spec leaves pixel ({xs[0]}, {ys[0]}) uncovered")
    return RFGrid(spec, fields, labels)


def _disc_pixels(grid: RFGrid, dot: TargetDot):
    """Labels of pixels whose centres fall inside the dot disc."""
    spec = grid.frame
    cx, cy = spec.fovea_center
    r = dot.radius
    # pixel centre offsets from the fovea centre are (i + 0.5 - cx)
    i0 = max(int(math.floor(cx + dot.dx - r)) - 1, 0)
    i1 = min(int(math.ceil(cx + dot.dx + r)) + 1, spec.width)
    j0 = max(int(math.floor(cy + dot.dy - r)) - 1, 0)
    j1 = min(int(math.ceil(cy + dot.dy + r)) + 1, spec.height)
    if i0 >= i1 or j0 >= j1:
        return np.zeros(0, dtype=np.int64)
    px = np.arange(i0, i1) + 0.5 - cx
    py = np.arange(j0, j1) + 0.5 - cy
    inside = (px[None, :] - dot.dx) ** 2 + (py[:, None] - dot.dy) ** 2 <= r * r
    return grid.labels[j0:j1, i0:i1][inside]


def coverage_all(grid: RFGrid, dot: TargetDot) -> np.ndarray:
    """Coverage fraction of every RF (vector indexed by RF id)."""
    if not dot.visible:
        return np.zeros(len(grid))
    counts = np.bincount(_disc_pixels(grid, dot), minlength=len(grid))
    return counts / grid.areas


def coverage(rf: ReceptiveField, dot: TargetDot) -> float:
    """Fraction of the RF's pixels whose centres lie inside the dot disc."""
    if not dot.visible:
        return 0.0
    # RF pixel centre offsets from the fovea centre
    lo_x, lo_y = rf.dx - rf.side / 2, rf.dy - rf.side / 2
    px = lo_x + np.arange(rf.side) + 0.5
    py = lo_y + np.arange(rf.side) + 0.5
    inside = (px[None, :] - dot.dx) ** 2 + (py[:, None] - dot.dy) ** 2 <= dot.radius ** 2
    return float(np.count_nonzero(inside)) / rf.area


def sc_activation(coverages: np.ndarray, activation_fraction: float = 0.1) -> np.ndarray:
    """Ids of SC cells whose RF coverage reaches the activation fraction."""
    if not 0 < activation_fraction <= 1:
        raise ConfigError("retina", "activation_fraction must lie in (0, 1]")
    return np.flatnonzero(np.asarray(coverages) >= activation_fraction)


@dataclass(frozen=True)
class WeightProfile:
    """Eccentricity -> SC output weight; ``shape`` is 'linear' or 'sigmoid'."""
    w_min: float = 0.25
    w_max: float = 1.0
    d_sat: float = 240.0
    shape: str = "linear"

    def __post_init__(self):
        if self.w_min > self.w_max:
            raise ConfigError("retina", "w_min must not exceed w_max")
        if not self.d_sat > 0:
            raise ConfigError("retina", "d_sat must be > 0")
        if self.shape not in ("linear", "sigmoid"):
            raise ConfigError("retina", f"unknown weight_profile {self.shape!r}")


def sc_weight(eccentricity, profile: WeightProfile = WeightProfile()):
    """Monotone saturating weight; the same curve serves horizontal and vertical distance."""
    d = np.asarray(eccentricity, dtype=float)
    if np.any(d < 0):
        raise ValueError("eccentricity must be >= 0")
    x = np.minimum(d / profile.d_sat, 1.0)
    if profile.shape == "sigmoid":
        # logistic rescaled to hit exactly 0 at d=0 and 1 at d_sat
        s = lambda z: 1.0 / (1.0 + np.exp(-10.0 * (z - 0.5)))
        x = (s(x) - s(0.0)) / (s(1.0) - s(0.0))
    w = profile.w_min + (profile.w_max - profile.w_min) * x
    return float(w) if w.ndim == 0 else w


def frame_from_config(cfg) -> FrameSpec:
    return FrameSpec(cfg["retina.width"], cfg["retina.height"], float(cfg["retina.fovea_half_width"]))


def grid_from_config(cfg) -> RFGrid:
    return build_rf_grid(frame_from_config(cfg), parse_ring_spec(cfg["retina.ring_spec"]),
                         cfg["retina.peripheral_threshold"])


def profile_from_config(cfg) -> WeightProfile:
    return WeightProfile(cfg["retina.w_min"], cfg["retina.w_max"], cfg["retina.d_sat"],
                         cfg["retina.weight_profile"])


def density_scale(side: int, cfg) -> float:
    """Compensates the number of small RFs a dot activates at once."""
    return (side / cfg["retina.density_ref_side"]) ** cfg["retina.density_exponent"]


def dump_rf_grid(grid: RFGrid, profile: WeightProfile) -> str:
    """Columnar text, one row per RF."""
    lines = ["id x0 y0 side eccentricity horizontal vertical peripheral foveal weight"]
    for rf in grid.fields:
        lines.append(f"{rf.id} {rf.x0} {rf.y0} {rf.side} {rf.eccentricity:g} {rf.horizontal} "
                     f"{rf.vertical} {int(rf.peripheral)} {int(rf.foveal)} "
                     f"{sc_weight(rf.eccentricity, profile):.6f}")
    return "\n".join(lines) + "\n"


class RetinaCache:
    """Memoises the active SC set for a dot; the dot only moves on servo ticks."""

    def __init__(self, grid: RFGrid, activation_fraction: float, maxsize: int = 4096):
        self.grid = grid
        self.fraction = activation_fraction
        self.maxsize = maxsize
        self._memo: dict = {}

    def active(self, dot: TargetDot) -> np.ndarray:
        if not dot.visible:
            return np.zeros(0, dtype=np.int64)
        key = (dot.dx, dot.dy, dot.radius)
        hit = self._memo.get(key)
        if hit is None:
            hit = sc_activation(coverage_all(self.grid, dot), self.fraction)
            if len(self._memo) >= self.maxsize:
                self._memo.clear()
            self._memo[key] = hit
        return hit
