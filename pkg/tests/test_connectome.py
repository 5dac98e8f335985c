import numpy as np
import pytest

from gazesnn.config import ConfigError
from gazesnn.connectome import (AXIS_GROUPS, BuildParams, Kind, assemble_controller,
                                build_subnetwork, check_mirror_symmetry, dump_connectome)
from gazesnn.harness import ExperimentConfig, Simulator
from gazesnn.snn import Role


@pytest.fixture(scope="module")
def params(cfg):
    return BuildParams.from_config(cfg)


def _roles(bp):
    return {bp.roles[n] for n in bp.roles}


def test_conjugate_roster(params):
    for side in ("left", "right"):
        bp = build_subnetwork(Kind.HorizontalConjugate, side, params)
        assert {Role.LLBN, Role.EBN, Role.IBN, Role.IFN, Role.TN, Role.DSN, Role.MN, Role.OPN} <= _roles(bp)
        assert "conj.OPN" in bp.roster


def test_vertical_roster_is_simpler(params):
    bp = build_subnetwork(Kind.Vertical, "up", params)
    roles = _roles(bp)
    assert {Role.LLBN, Role.EBN, Role.IFN, Role.TN, Role.MN} <= roles
    assert not roles & {Role.IBN, Role.OPN, Role.DSN}
    assert {"vert.up.MN.L", "vert.up.MN.R"} <= set(bp.roster)


def test_vertical_eyes_driven_identically(params):
    bp = build_subnetwork(Kind.Vertical, "down", params)
    into = {eye: sorted((e.pre, e.weight, e.delay) for e in bp.edges if f"MN.{eye}[" in e.post)
            for eye in "LR"}
    strip = lambda rows: [(p, w, d) for p, w, d in rows]
    assert strip(into["L"]) == strip(into["R"]) and into["L"]


def test_vergence_has_s_cells_with_bilateral_input(params):
    bp = build_subnetwork(Kind.Vergence, "conv", params)
    assert Role.S in _roles(bp)
    s_pre = {e.pre[:4] for e in bp.edges if ".S[" in e.post and e.pre.startswith("sc.")}
    assert s_pre == {"sc.L", "sc.R"}
    s_out = [e for e in bp.edges if ".S[" in e.pre]
    assert s_out and all(e.weight < 0 and ".DSN[" in e.post and e.post.startswith("conj.") for e in s_out)


def test_ibn_inhibits_contralateral_ebn(params):
    bp = build_subnetwork(Kind.HorizontalConjugate, "left", params)
    e = [x for x in bp.edges if x.pre.startswith("conj.left.IBN") and x.post.startswith("conj.right.EBN")]
    assert e and all(x.weight < 0 for x in e)


def test_required_edge_classes(params):
    bp = build_subnetwork(Kind.HorizontalConjugate, "right", params)
    classes = {e.cls for e in bp.edges}
    assert {"sc_llbn", "sc_ebn", "llbn_ebn", "ebn_ifn", "ifn_llbn", "ebn_tn", "ebn_ibn",
            "ibn_contra_ebn", "ibn_contra_ibn", "ibn_contra_ifn", "ibn_contra_tn", "ibn_opn",
            "opn_ibn", "opn_ebn", "tn_dsn", "tn_dsn_contra", "dsn_mn"} <= classes
    sign = {"ifn_llbn": -1, "ibn_opn": -1, "opn_ibn": -1, "opn_ebn": -1, "tn_dsn_contra": -1,
            "llbn_ebn": 1, "ebn_tn": 1, "dsn_mn": 1, "sc_ebn": 1}
    for e in bp.edges:
        if e.cls in sign:
            assert np.sign(e.weight) == sign[e.cls]
    assert {e.delay for e in bp.edges if e.cls == "llbn_ebn"} == {params.llbn_ebn_delay}
    assert params.llbn_ebn_delay > params.default_delay


def test_neck_is_sc_to_mn_only(params):
    for side in ("left", "right", "up", "down"):
        bp = build_subnetwork(Kind.Neck, side, params)
        assert _roles(bp) == {Role.MN}
        for e in bp.edges:
            assert e.pre.startswith("sc.") and ".MN[" in e.post


def test_neck_driven_only_by_peripheral_rfs(params):
    grid = params.grid
    for side in ("left", "right", "up", "down"):
        bp = build_subnetwork(Kind.Neck, side, params)
        for e in bp.edges:
            rf = grid[int(e.pre.split("[")[1][:-1])]
            assert rf.eccentricity > 240 and rf.peripheral


def test_unknown_kind_and_side(params):
    with pytest.raises(ConfigError):
        build_subnetwork("Cerebellum", "left", params)
    with pytest.raises(ConfigError):
        build_subnetwork(Kind.Vertical, "left", params)


def test_plastic_set_is_sc_to_burst(assembly):
    net = assembly.network
    for i in assembly.plastic:
        s = net.synapses[i]
        assert net.roles[s.pre] is Role.SC and net.roles[s.post] in (Role.LLBN, Role.EBN)
    n_plastic = sum(1 for e in assembly.edges if e.cls in ("sc_llbn", "sc_ebn"))
    assert len(assembly.plastic) == n_plastic


def test_routing_is_total(assembly):
    for eye in ("L", "R"):
        for cid in assembly.sc_ids[eye]:
            assert assembly.port_map.get(int(cid))


def test_motor_groups_disjoint(assembly):
    seen = set()
    for pos, neg in AXIS_GROUPS.values():
        for g in pos + neg:
            ids = set(assembly.groups[g].tolist())
            assert not ids & seen
            seen |= ids


def test_mirror_symmetric_at_build(assembly):
    assert check_mirror_symmetry(assembly) == []


def test_mirror_check_detects_asymmetry(cfg):
    asm = assemble_controller(cfg)
    e = next(x for x in asm.edges if x.cls == "ebn_ibn" and "left" in x.pre)
    e.weight *= 1.5
    assert check_mirror_symmetry(asm)


def test_dump_has_every_synapse(assembly):
    lines = dump_connectome(assembly).splitlines()
    assert len(lines) == 1 + len(assembly.network.synapses)
    assert sum(l.endswith(" 1") for l in lines[1:]) == len(assembly.plastic)


def test_bad_build_params(cfg):
    with pytest.raises(ConfigError):
        assemble_controller(cfg.replace(connectome__population=0))
    with pytest.raises(ConfigError):
        assemble_controller(cfg.replace(connectome__llbn_ebn_delay=0))


# --- open-loop dynamics --------------------------------------------------------------------

def _open_loop(cfg, asm, active, duration, groups=()):
    return Simulator(ExperimentConfig.from_config(cfg), asm).open_loop(active, duration, groups)


def test_fovea_only_stimulus_is_silent(cfg, fresh_assembly):
    grid = fresh_assembly.grid
    fov = [rf.id for rf in grid.fields if rf.foveal and abs(rf.dx) < 15 and abs(rf.dy) < 15]
    deltas, _ = _open_loop(cfg, fresh_assembly, {"L": fov, "R": fov}, 1000.0)
    assert not deltas.any()


def test_vertical_deltas_equal_under_drive(cfg, fresh_assembly):
    grid = fresh_assembly.grid
    rng = np.random.default_rng(5)
    for _ in range(3):
        ids = rng.choice(len(grid), size=6, replace=False)
        other = rng.choice(len(grid), size=6, replace=False)
        deltas, _ = _open_loop(cfg, fresh_assembly, {"L": ids, "R": other}, 400.0)
        np.testing.assert_array_equal(deltas[:, 1], deltas[:, 3])


def test_mirrored_drive_swaps_groups(cfg, fresh_assembly):
    grid = fresh_assembly.grid
    rng = np.random.default_rng(9)
    groups = ["conj.left.MN.L", "conj.right.MN.R", "conj.left.EBN", "conj.right.EBN",
              "verg.conv.MN.L", "verg.conv.MN.R"]
    mirror = {"conj.left.MN.L": "conj.right.MN.R", "conj.right.MN.R": "conj.left.MN.L",
              "conj.left.EBN": "conj.right.EBN", "conj.right.EBN": "conj.left.EBN",
              "verg.conv.MN.L": "verg.conv.MN.R", "verg.conv.MN.R": "verg.conv.MN.L"}
    for _ in range(3):
        a = rng.choice(len(grid), size=4, replace=False)
        b = rng.choice(len(grid), size=4, replace=False)
        _, r1 = _open_loop(cfg, fresh_assembly, {"L": a, "R": b}, 300.0, groups)
        ma = [grid.mirror_id(i) for i in b]
        mb = [grid.mirror_id(i) for i in a]
        _, r2 = _open_loop(cfg, fresh_assembly, {"L": ma, "R": mb}, 300.0, groups)
        for g in groups:
            np.testing.assert_array_equal(r1[g], r2[mirror[g]])


def _meridian(grid, axis):
    if axis == "h":
        sel = lambda r: r.dy == r.side / 2 and r.dx > 0
    else:
        sel = lambda r: r.dx == r.side / 2 and r.dy > 0
    return sorted((rf for rf in grid.fields if sel(rf) and not rf.foveal), key=lambda r: r.eccentricity)


# A 20 ms flash spans a single decode window and can be off by one rate quantum.
@pytest.mark.parametrize("flash", [40.0, 60.0, 100.0, 300.0])
@pytest.mark.parametrize("axis, col", [("h", 0), ("v", 1)])
def test_amplitude_grows_with_eccentricity(cfg, fresh_assembly, flash, axis, col):
    exp = ExperimentConfig.from_config(cfg)
    amps = []
    for rf in _meridian(fresh_assembly.grid, axis):
        sim = Simulator(exp, fresh_assembly)
        d1, _ = sim.open_loop({"L": [rf.id], "R": [rf.id]}, flash)
        d2, _ = sim.open_loop({}, 300.0)
        amps.append(int(d1[:, col].sum() + d2[:, col].sum()))
    assert all(a <= b for a, b in zip(amps, amps[1:])), amps
    assert amps[-1] > amps[0]


def test_left_target_silences_rightward_motoneurons(cfg, fresh_assembly):
    grid = fresh_assembly.grid
    left = [rf.id for rf in grid.fields if rf.dx < 0 and not rf.foveal]
    rng = np.random.default_rng(0)
    for _ in range(5):
        ids = rng.choice(left, size=3, replace=False)
        deltas, r = _open_loop(cfg, fresh_assembly, {"L": ids, "R": ids}, 400.0,
                               ["conj.right.MN.L", "conj.right.MN.R", "conj.left.MN.L"])
        skip = 100 // 20
        assert not r["conj.right.MN.L"][skip:].any() and not r["conj.right.MN.R"][skip:].any()
        assert r["conj.left.MN.L"].sum() > 0 and np.all(deltas[:, 0] <= 0)


def test_foveal_input_drives_omnipause(cfg, fresh_assembly):
    fov = [rf.id for rf in fresh_assembly.grid.fields if rf.foveal]
    _, idle = _open_loop(cfg, fresh_assembly, {}, 200.0, ["conj.OPN"])
    _, fix = _open_loop(cfg, fresh_assembly, {"L": fov, "R": fov}, 200.0, ["conj.OPN"])
    assert fix["conj.OPN"].mean() > idle["conj.OPN"].mean() > 0
