"""Input checks shared by the estimator wrappers."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_dot_offsets(X) -> np.ndarray:
    """(n, 2) finite pixel offsets ``dx, dy`` from the fovea centre."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected 2 columns (dx, dy), got {X.shape[1]}")
    return X


def check_rate_pairs(X) -> np.ndarray:
    """(n, 2) non-negative firing rates ``positive, negative`` in Hz."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected 2 columns (rate+, rate-), got {X.shape[1]}")
    if np.any(X < 0):
        raise ValueError("rates must be >= 0")
    return X


def check_waypoints(X) -> np.ndarray:
    """(n, 3) ``t_ms x_cm y_cm`` rows with strictly increasing times."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 3:
        raise ValueError(f"expected 3 columns (t_ms, x_cm, y_cm), got {X.shape[1]}")
    if np.any(np.diff(X[:, 0]) <= 0):
        raise ValueError("waypoint times must be strictly increasing")
    if X[0, 0] < 0:
        raise ValueError("waypoint times must be >= 0")
    return X
