import math

import numpy as np
from hypothesis import given, settings, strategies as st

from gazesnn.decoder import DecodeWindowSpec, decode_delta
from gazesnn.learning import apply_weight_update, update_trace
from gazesnn.plant import TICK_DEG, Pose, angles_to_wall, deg_to_ticks, ticks_to_deg, wall_to_angles
from gazesnn.retina import (FrameSpec, TargetDot, WeightProfile, build_rf_grid, coverage_all,
                            parse_ring_spec, sc_activation, sc_weight)

SPEC = DecodeWindowSpec()
GRID = build_rf_grid(FrameSpec(), parse_ring_spec("40:10, 160:20, inf:40"))
rates = st.floats(0, 2000, allow_nan=False)


@given(rates, rates)
def test_decode_is_odd(p, n):
    assert decode_delta(p, n, SPEC) == -decode_delta(n, p, SPEC)


@given(rates, rates, st.floats(0, 500))
def test_decode_monotone_in_positive_rate(p, n, extra):
    assert decode_delta(p + extra, n, SPEC) >= decode_delta(p, n, SPEC)


@given(rates, rates)
def test_decode_saturates(p, n):
    assert abs(decode_delta(p, n, SPEC)) <= SPEC.max_delta_per_window


@given(st.floats(0, 2000), st.floats(0, 2000), st.sampled_from(["linear", "sigmoid"]))
def test_sc_weight_monotone_and_bounded(a, b, shape):
    prof = WeightProfile(shape=shape)
    lo, hi = sorted((a, b))
    assert prof.w_min <= sc_weight(lo, prof) <= sc_weight(hi, prof) <= prof.w_max
    if lo >= prof.d_sat:
        assert sc_weight(lo, prof) == prof.w_max


@settings(max_examples=50)
@given(st.floats(-400, 400), st.floats(-300, 300), st.floats(1, 60))
def test_coverage_is_a_fraction(dx, dy, r):
    cov = coverage_all(GRID, TargetDot(dx, dy, r))
    assert np.all((cov >= 0) & (cov <= 1))


@settings(max_examples=50)
@given(st.floats(-350, 350), st.floats(-260, 260), st.floats(2, 40))
def test_activation_mirrors(dx, dy, r):
    a = set(sc_activation(coverage_all(GRID, TargetDot(dx, dy, r))).tolist())
    b = set(sc_activation(coverage_all(GRID, TargetDot(-dx, dy, r))).tolist())
    assert {GRID.mirror_id(i) for i in a} == b


@given(st.floats(-10, 10), st.floats(100, 5000))
def test_trace_fixed_point(H, tau):
    assert update_trace(H, H, tau, 1.0) == H


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(100, 5000))
def test_trace_moves_toward_input(e, H, tau):
    e2 = update_trace(e, H, tau, 1.0)
    assert abs(e2 - H) <= abs(e - H)


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=20), st.floats(-1, 1),
       st.floats(-50, 50), st.floats(-50, 50), st.booleans())
def test_weight_bounds_and_sign(ws, M, H, e, mod_only):
    w = np.array(ws)
    lo = np.where(w >= 0, 0.0, -2.0)
    hi = np.where(w >= 0, 2.0, 0.0)
    out = apply_weight_update(w, M, H, e, 1.0, (lo, hi), mod_only)
    assert np.all(out >= lo) and np.all(out <= hi)
    assert np.all(out[w > 0] >= 0) and np.all(out[w < 0] <= 0)


@given(st.integers(-500, 500))
def test_tick_round_trip(t):
    assert deg_to_ticks(ticks_to_deg(t)) == t
    assert math.isclose(ticks_to_deg(t), t * TICK_DEG)


@settings(max_examples=50)
@given(st.floats(-60, 60), st.floats(-40, 40), st.floats(-20, 20), st.floats(-20, 20),
       st.sampled_from(["left", "right"]))
def test_wall_round_trip(x, y, pan, tilt, eye):
    pose = Pose(**{f"{eye}_pan": deg_to_ticks(pan), f"{eye}_tilt": deg_to_ticks(tilt)})
    rel = wall_to_angles((x, y), eye, pose)
    back = angles_to_wall(rel, eye, pose)
    assert abs(back[0] - x) <= 1e-6 and abs(back[1] - y) <= 1e-6
