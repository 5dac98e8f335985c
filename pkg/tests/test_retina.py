import math

import numpy as np
import pytest

from gazesnn.config import ConfigError
from gazesnn.retina import (FrameSpec, RetinaCache, TargetDot, WeightProfile, build_rf_grid,
                            coverage, coverage_all, dump_rf_grid, grid_from_config,
                            parse_ring_spec, sc_activation, sc_weight)

from oracles import pixel_count_coverage

FRAME = FrameSpec()
RINGS = parse_ring_spec("40:10, 160:20, inf:40")


@pytest.fixture(scope="module")
def grid():
    return build_rf_grid(FRAME, RINGS)


def test_frame_center_anchor():
    assert FRAME.fovea_center == (360.0, 240.0)
    with pytest.raises(ConfigError):
        FrameSpec(fovea_half_width=240)
    with pytest.raises(ConfigError):
        FrameSpec(fovea_half_width=0)


def test_parse_ring_spec():
    assert RINGS == [(40.0, 10), (160.0, 20), (math.inf, 40)]
    with pytest.raises(ConfigError):
        parse_ring_spec("40-10")
    with pytest.raises(ConfigError):
        parse_ring_spec("")


# --- tiling -------------------------------------------------------------------------

def test_tiling_is_exact(grid):
    assert grid.areas.sum() == FRAME.width * FRAME.height
    assert (grid.labels >= 0).all()


def test_every_pixel_in_exactly_one_rf(grid):
    """Independent count: paint every RF rect and check each pixel gets painted once."""
    hits = np.zeros((FRAME.height, FRAME.width), dtype=np.int64)
    for rf in grid.fields:
        hits[rf.y0:rf.y0 + rf.side, rf.x0:rf.x0 + rf.side] += 1
    assert (hits == 1).all()


def test_side_nondecreasing_in_eccentricity(grid):
    pairs = sorted((rf.eccentricity, rf.side) for rf in grid.fields)
    sides = [s for _, s in pairs]
    assert all(a <= b for a, b in zip(sides, sides[1:]))


def test_hemifield_tags_match_centres(grid):
    for rf in grid.fields:
        cx, cy = rf.center
        assert rf.horizontal == ("left" if cx < 360 else "right")
        assert rf.vertical == ("lower" if cy < 240 else "upper")
        assert rf.peripheral == (rf.eccentricity > 240)


def test_default_grid_size(grid):
    assert len(grid) == 456
    assert sum(rf.foveal for rf in grid.fields) == 36


@pytest.mark.parametrize("rings, band", [
    ("40:10, 160:30, inf:40", "160:30"),
    ("40:20, 160:10, inf:40", None),
    ("40:10, 160:20", None),
    ("45:10, 160:20, inf:40", "45:10"),
])
def test_bad_ring_spec_rejected(rings, band):
    with pytest.raises(ConfigError) as err:
        build_rf_grid(FRAME, parse_ring_spec(rings))
    if band:
        assert band in str(err.value)


def test_mirror_ids(grid):
    for rf in grid.fields:
        m = grid[grid.mirror_id(rf.id)]
        assert (m.dx, m.dy, m.side) == (-rf.dx, rf.dy, rf.side)


# --- coverage -------------------------------------------------------------------------

def test_coverage_full_and_disjoint(grid):
    rf = grid.fields[0]
    cx, cy = rf.center
    assert coverage(rf, TargetDot.at_pixel(cx, cy, rf.side)) == 1.0
    assert coverage(rf, TargetDot.at_pixel(cx + 200, cy + 200, 5)) == 0.0
    assert coverage(rf, TargetDot(0, 0, 5, visible=False)) == 0.0


def test_coverage_radius5_on_10px_rf(grid):
    rf = next(r for r in grid.fields if r.side == 10)
    cx, cy = rf.center
    frac = coverage(rf, TargetDot.at_pixel(cx, cy, 5))
    assert abs(frac * 100 - math.pi * 25) <= 2 * 5  # +-2 px on the perimeter per side
    assert frac == pixel_count_coverage(rf.x0, rf.y0, rf.side, cx, cy, 5)


@pytest.mark.parametrize("x, y, r", [(361.3, 239.7, 12), (10.0, 470.0, 30), (-5.0, 100.0, 20),
                                     (700.5, 3.25, 8), (400.0, 260.0, 12)])
def test_coverage_all_matches_pixel_oracle(grid, x, y, r):
    dot = TargetDot.at_pixel(x, y, r)
    cov = coverage_all(grid, dot)
    for rf in grid.fields:
        ref = pixel_count_coverage(rf.x0, rf.y0, rf.side, x, y, r)
        assert cov[rf.id] == ref
        if ref:
            assert coverage(rf, dot) == ref


# --- activation -----------------------------------------------------------------------

def test_activation_examples():
    assert sc_activation(np.zeros(5)).size == 0
    assert list(sc_activation(np.array([0, 0, 1.0, 0]), 0.1)) == [2]
    assert list(sc_activation(np.array([0.1, 0.0999]), 0.1)) == [0]
    with pytest.raises(ConfigError):
        sc_activation(np.zeros(2), 0.0)


def test_mirrored_dot_activates_mirror_set(grid):
    rng = np.random.default_rng(0)
    cache = RetinaCache(grid, 0.1)
    for _ in range(50):
        dx, dy = rng.uniform(-350, 350), rng.uniform(-230, 230)
        a = cache.active(TargetDot(dx, dy, 12))
        b = cache.active(TargetDot(-dx, dy, 12))
        assert sorted(grid.mirror_id(i) for i in a) == sorted(b.tolist())


def test_max_active_eccentricity_shrinks_toward_fovea(grid):
    cache = RetinaCache(grid, 0.1)
    for sx, sy in [(330, 0), (-300, 200), (250, -220), (-120, -90)]:
        prev = math.inf
        for s in np.linspace(1, 0, 60):
            act = cache.active(TargetDot(sx * s, sy * s, 12))
            if act.size == 0:  # dot split across four coarse RFs, none reaches 10%
                continue
            ecc = max(grid[i].eccentricity for i in act)
            assert ecc <= prev
            prev = ecc


def test_cache_matches_direct(grid):
    cache = RetinaCache(grid, 0.1, maxsize=2)
    for dx in (0.0, 40.0, 80.0, 40.0):
        dot = TargetDot(dx, 3.0, 12)
        np.testing.assert_array_equal(cache.active(dot), sc_activation(coverage_all(grid, dot), 0.1))
    assert cache.active(TargetDot(0, 0, 12, visible=False)).size == 0


# --- weight profile ----------------------------------------------------------------------

def test_sc_weight_examples():
    p = WeightProfile(0.25, 1.0, 240.0)
    assert sc_weight(0.0, p) == 0.25
    assert sc_weight(240.0, p) == 1.0 and sc_weight(1e6, p) == 1.0
    assert sc_weight(120.0, p) == pytest.approx(0.625, abs=1e-15)
    with pytest.raises(ConfigError):
        WeightProfile(w_min=2.0, w_max=1.0)
    with pytest.raises(ValueError):
        sc_weight(-1.0, p)


def test_sigmoid_profile_shares_endpoints():
    p = WeightProfile(0.25, 1.0, 240.0, "sigmoid")
    assert sc_weight(0.0, p) == pytest.approx(0.25, abs=1e-12)
    assert sc_weight(240.0, p) == pytest.approx(1.0, abs=1e-12)
    d = np.linspace(0, 400, 401)
    assert np.all(np.diff(sc_weight(d, p)) >= 0)


def test_dump_rf_grid(cfg):
    text = dump_rf_grid(grid_from_config(cfg), WeightProfile())
    lines = text.splitlines()
    assert lines[0].split()[0] == "id"
    assert len(lines) == 457
    assert all(len(l.split()) == 10 for l in lines)
