"""scikit-learn style wrappers around the retina, the decoder, and the full loop.

These make the pieces usable with ``get_params``/``set_params``, pipelines and
parameter sweeps; the simulation itself lives in the other modules.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .config import load_config
from .connectome import assemble_controller
from .decoder import DecodeWindowSpec, decode_delta
from .harness import ExperimentConfig, run_experiment
from .plant import TrajectorySpec
from .retina import FrameSpec, RetinaCache, TargetDot, build_rf_grid, parse_ring_spec
from .validation import check_dot_offsets, check_rate_pairs, check_waypoints


class RetinaEncoder(TransformerMixin, BaseEstimator):
    """Dot offsets (px from the fovea centre) -> binary SC activation per RF."""

    def __init__(self, width=720, height=480, fovea_half_width=30.0,
                 ring_spec="40:10, 160:20, inf:40", peripheral_threshold=240.0,
                 activation_fraction=0.1, dot_radius=12.0):
        self.width = width
        self.height = height
        self.fovea_half_width = fovea_half_width
        self.ring_spec = ring_spec
        self.peripheral_threshold = peripheral_threshold
        self.activation_fraction = activation_fraction
        self.dot_radius = dot_radius

    def fit(self, X=None, y=None):
        self.frame_ = FrameSpec(self.width, self.height, float(self.fovea_half_width))
        self.grid_ = build_rf_grid(self.frame_, parse_ring_spec(self.ring_spec),
                                   self.peripheral_threshold)
        self.n_features_out_ = len(self.grid_.fields)
        self._cache = RetinaCache(self.grid_, self.activation_fraction)
        return self

    def transform(self, X):
        check_is_fitted(self, "grid_")
        X = check_dot_offsets(X)
        out = np.zeros((len(X), self.n_features_out_), dtype=np.int8)
        w, h = self.frame_.width / 2, self.frame_.height / 2
        for i, (dx, dy) in enumerate(X):
            dot = TargetDot(dx, dy, self.dot_radius, abs(dx) <= w and abs(dy) <= h, self.frame_)
            out[i, self._cache.active(dot)] = 1
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "grid_")
        return np.array([f"rf{rf.id}" for rf in self.grid_.fields], dtype=object)


class MotorDecoder(TransformerMixin, BaseEstimator):
    """Antagonist group rates ``(r+, r-)`` in Hz -> signed servo tick delta."""

    def __init__(self, window=20.0, max_rate=400.0, max_delta=40):
        self.window = window
        self.max_rate = max_rate
        self.max_delta = max_delta

    def fit(self, X=None, y=None):
        self.spec_ = DecodeWindowSpec(self.window, self.max_rate, self.max_delta)
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        X = check_rate_pairs(X)
        return np.array([[decode_delta(p, n, self.spec_)] for p, n in X], dtype=np.int64)


class OculomotorTracker(BaseEstimator):
    """The closed loop as an estimator.

    ``fit`` runs a learning session on random target steps and keeps the
    adapted SC gains; ``predict`` tracks a scripted target path with those
    gains frozen and returns the per-eye relative errors (deg) at 45 Hz.
    """

    def __init__(self, config=None, overrides=None, duration=120000.0, seed=0, learning=True):
        self.config = config
        self.overrides = overrides
        self.duration = duration
        self.seed = seed
        self.learning = learning

    def _cfg(self):
        return load_config(self.config, self.overrides)

    def fit(self, X=None, y=None):
        cfg = self._cfg()
        result = run_experiment(ExperimentConfig.from_config(
            cfg, duration=float(self.duration), seed=self.seed, learning=bool(self.learning)))
        self.weights_ = result.final_weights
        self.metrics_ = result.metrics
        return self

    def _run(self, X):
        check_is_fitted(self, "weights_")
        X = check_waypoints(X)
        cfg = self._cfg()
        asm = assemble_controller(cfg)
        if len(self.weights_) != len(asm.plastic):
            raise ValueError("fitted weights do not match the configured connectome")
        asm.network.set_weights(asm.plastic, self.weights_)
        traj = TrajectorySpec(kind="scripted", seed=self.seed, waypoints=[tuple(r) for r in X])
        dur = float(X[-1, 0]) + cfg["trajectory.dwell"]
        exp = ExperimentConfig.from_config(cfg, duration=dur, seed=self.seed,
                                           learning=False, trajectory=traj)
        return run_experiment(exp, assembly=asm)

    def predict(self, X):
        """Relative errors, columns ``left_h left_v right_h right_v``."""
        tr = self._run(X).trace
        return np.column_stack([tr[c] for c in ("re_left_h", "re_left_v", "re_right_h", "re_right_v")])

    def score(self, X, y=None):
        """Negative mean RMSE over the four eye-axes (higher is better)."""
        m = self._run(X).metrics
        return -float(np.mean(list(m.rmse.values())))
