"""Oculomotor sub-networks and their assembly into one controller network.

Naming: cells are ``<sub>.<side>.<ROLE>[k]`` (e.g. ``conj.left.EBN[2]``);
motor pools carry the eye they drive (``conj.left.MN.L[0]``); SC cells are
``sc.L[rf]`` / ``sc.R[rf]``. The shared omnipause pool is ``conj.OPN[k]``.

Horizontal control is split into a conjugate channel (both eyes, sides =
direction of rotation) and a vergence channel (``conv`` / ``div``). Each
channel pools SC input from both retinas, so the sum and difference of the
two channels recover each eye's own retinal error.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .config import ConfigError
from .retina import RFGrid, WeightProfile, grid_from_config, profile_from_config, sc_weight
from .snn import Network, NeuronParams, Role, Synapse, params_from_config

EYES = ("L", "R")


class Kind(str, Enum):
    HorizontalConjugate = "HorizontalConjugate"
    Vergence = "Vergence"
    Vertical = "Vertical"
    Neck = "Neck"


_SIDES = {
    Kind.HorizontalConjugate: ("left", "right"),
    Kind.Vergence: ("conv", "div"),
    Kind.Vertical: ("up", "down"),
    Kind.Neck: ("left", "right", "up", "down"),
}
_PREFIX = {Kind.HorizontalConjugate: "conj", Kind.Vergence: "verg", Kind.Vertical: "vert", Kind.Neck: "neck"}
_CONTRA = {"left": "right", "right": "left", "up": "down", "down": "up", "conv": "div", "div": "conv"}


@dataclass
class Edge:
    pre: str
    post: str
    weight: float
    delay: float
    plastic: bool
    cls: str  # edge class, e.g. "sc_ebn"


@dataclass
class SubnetworkBlueprint:
    kind: Kind
    side: str
    roster: dict[str, list[str]] = field(default_factory=dict)  # group -> cell names
    roles: dict[str, Role] = field(default_factory=dict)  # cell name -> role
    threshold_scale: dict[str, float] = field(default_factory=dict)
    edges: list[Edge] = field(default_factory=list)

    def roles_present(self) -> set[Role]:
        return {self.roles[n] for n in self.roles}


@dataclass
class BuildParams:
    """Everything a blueprint needs: weights, delays, population layout, retina."""
    grid: RFGrid
    profile: WeightProfile
    weights: dict[str, float]
    population: int = 5
    threshold_spread: float = 0.2
    default_delay: float = 1.0
    llbn_ebn_delay: float = 5.0
    density_ref_side: float = 10.0
    density_exponent: float = 1.0
    # vertical eccentricity (px) beyond which an RF drives neck tilt
    neck_tilt_threshold: float = 160.0

    @classmethod
    def from_config(cls, cfg, grid: RFGrid | None = None) -> "BuildParams":
        if cfg["connectome.population"] < 1:
            raise ConfigError("connectome", "population must be >= 1")
        if cfg["connectome.llbn_ebn_delay"] <= 0:
            raise ConfigError("connectome", "LLBN->EBN delay must be > 0")
        return cls(grid=grid or grid_from_config(cfg), profile=profile_from_config(cfg),
                   weights=cfg.section("connectome.w"), population=cfg["connectome.population"],
                   threshold_spread=cfg["connectome.threshold_spread"],
                   default_delay=float(cfg["connectome.default_delay"]),
                   llbn_ebn_delay=float(cfg["connectome.llbn_ebn_delay"]),
                   density_ref_side=cfg["retina.density_ref_side"],
                   density_exponent=cfg["retina.density_exponent"],
                   neck_tilt_threshold=cfg["connectome.neck_tilt_threshold"])

    def density(self, side: int) -> float:
        return (side / self.density_ref_side) ** self.density_exponent


def _pool(bp: SubnetworkBlueprint, group: str, role: Role, n: int, spread: float) -> list[str]:
    names = [f"{group}[{k}]" for k in range(n)]
    bp.roster[group] = names
    for k, name in enumerate(names):
        bp.roles[name] = role
        frac = k / (n - 1) - 0.5 if n > 1 else 0.0
        bp.threshold_scale[name] = 1.0 + spread * frac
    return names


def _connect(bp, pres, posts, total, delay, cls, plastic=False):
    """All-to-all pool connection; ``total`` is the effect of a full-pool volley."""
    if total == 0:
        return
    w = total / len(pres)
    for a in pres:
        for b in posts:
            bp.edges.append(Edge(a, b, w, delay, plastic, cls))


def sc_name(eye: str, rf_id: int) -> str:
    return f"sc.{eye}[{rf_id}]"


def _sc_sources(grid: RFGrid, kind: Kind, side: str, neck_tilt_threshold: float = 160.0):
    """(eye, rf, distance) triples feeding one side of a sub-network."""
    out = []
    for eye in EYES:
        for rf in grid.fields:
            if rf.foveal:
                continue
            if kind is Kind.HorizontalConjugate:
                ok = rf.horizontal == side
                dist = abs(rf.dx)
            elif kind is Kind.Vergence:
                # converging: left eye sees the target right, right eye sees it left
                want = ("right" if eye == "L" else "left") if side == "conv" else \
                       ("left" if eye == "L" else "right")
                ok = rf.horizontal == want
                dist = abs(rf.dx)
            elif kind is Kind.Vertical:
                ok = rf.vertical == ("upper" if side == "up" else "lower")
                dist = abs(rf.dy)
            elif side in ("left", "right"):
                # the frame is wider than tall, so the peripheral tag is horizontal
                ok = rf.peripheral and rf.horizontal == side
                dist = rf.eccentricity
            else:
                # tilt: peripheral RFs that are also far from the horizontal meridian
                ok = rf.peripheral and abs(rf.dy) > neck_tilt_threshold and \
                     rf.vertical == ("upper" if side == "up" else "lower")
                dist = abs(rf.dy)
            if ok:
                out.append((eye, rf, dist))
    return out


def build_subnetwork(kind, side: str, params: BuildParams) -> SubnetworkBlueprint:
    """Blueprint of one side/direction of a gaze sub-network."""
    try:
        kind = Kind(kind)
    except ValueError:
        raise ConfigError("connectome", f"unknown sub-network kind {kind!r}") from None
    if side not in _SIDES[kind]:
        raise ConfigError("connectome", f"{kind.value} has no side {side!r}")
    W = params.weights
    n, spread = params.population, params.threshold_spread
    d1, dl = params.default_delay, params.llbn_ebn_delay
    pre = _PREFIX[kind]
    bp = SubnetworkBlueprint(kind, side)
    g = lambda role, s=side: f"{pre}.{s}.{role}"

    if kind is Kind.Neck:
        mn = _pool(bp, g("MN"), Role.MN, n, spread)
        for eye, rf, dist in _sc_sources(params.grid, kind, side, params.neck_tilt_threshold):
            w = W["sc_neck"] * params.density(rf.side)
            for b in mn:
                bp.edges.append(Edge(sc_name(eye, rf.id), b, w, d1, False, "sc_neck"))
        return bp

    c = _CONTRA[side]
    llbn = _pool(bp, g("LLBN"), Role.LLBN, n, spread)
    ebn = _pool(bp, g("EBN"), Role.EBN, n, spread)
    ifn = _pool(bp, g("IFN"), Role.IFN, n, spread)
    tn = _pool(bp, g("TN"), Role.TN, n, spread)
    names = lambda role, s: [f"{pre}.{s}.{role}[{k}]" for k in range(n)]

    for eye, rf, dist in _sc_sources(params.grid, kind, side):
        w = float(sc_weight(dist, params.profile)) * params.density(rf.side)
        src = sc_name(eye, rf.id)
        for b in llbn:
            bp.edges.append(Edge(src, b, w * W["sc_llbn"], d1, True, "sc_llbn"))
        for b in ebn:
            bp.edges.append(Edge(src, b, w * W["sc_ebn"], d1, True, "sc_ebn"))
    _connect(bp, llbn, ebn, W["llbn_ebn"], dl, "llbn_ebn")
    _connect(bp, ebn, ifn, W["ebn_ifn"], d1, "ebn_ifn")
    _connect(bp, ifn, llbn, W["ifn_llbn"], d1, "ifn_llbn")
    _connect(bp, ebn, tn, W["ebn_tn"], d1, "ebn_tn")

    if kind is Kind.Vertical:
        for eye in EYES:
            mn = _pool(bp, f"{g('MN')}.{eye}", Role.MN, n, spread)
            _connect(bp, tn, mn, W["tn_mn"], d1, "tn_mn")
        return bp

    dsn = _pool(bp, g("DSN"), Role.DSN, n, spread)
    _connect(bp, tn, dsn, W["tn_dsn"] if kind is Kind.HorizontalConjugate else W["verg_tn_dsn"], d1, "tn_dsn")
    _connect(bp, names("TN", c), dsn,
             W["tn_dsn_contra"] if kind is Kind.HorizontalConjugate else W["verg_tn_dsn_contra"],
             d1, "tn_dsn_contra")
    for eye in EYES:
        mn = _pool(bp, f"{g('MN')}.{eye}", Role.MN, n, spread)
        _connect(bp, dsn, mn, W["dsn_mn"], d1, "dsn_mn")
        if kind is Kind.HorizontalConjugate:
            _connect(bp, tn, mn, W["tn_mn_horizontal"], d1, "tn_mn")

    if kind is Kind.HorizontalConjugate:
        ibn = _pool(bp, g("IBN"), Role.IBN, n, spread)
        opn = _pool(bp, "conj.OPN", Role.OPN, n, spread)
        _connect(bp, ebn, ibn, W["ebn_ibn"], d1, "ebn_ibn")
        for role in ("EBN", "IBN", "IFN", "TN"):
            _connect(bp, ibn, names(role, c), W["ibn_contra"], d1, f"ibn_contra_{role.lower()}")
        _connect(bp, ibn, opn, W["ibn_opn"], d1, "ibn_opn")
        _connect(bp, opn, ibn, W["opn_ibn"], d1, "opn_ibn")
        _connect(bp, opn, ebn, W["opn_ebn"], d1, "opn_ebn")
        # foveal SC cells excite the omnipause pool (fixation drive)
        if side == "left":
            for eye in EYES:
                for rf in params.grid.fields:
                    if rf.foveal:
                        for b in opn:
                            bp.edges.append(Edge(sc_name(eye, rf.id), b, W["sc_opn"], d1, False, "sc_opn"))
    else:  # vergence: direction-selective S cells veto the conjugate drive
        # S cells: excited by this side's disparity pattern, inhibited by the
        # opposite one, so a conjugate error (same hemifield in both eyes) cancels
        s_cells = _pool(bp, g("S"), Role.S, n, spread)
        for sgn, src_side, cls in ((1.0, side, "sc_s"), (-1.0, c, "sc_s_contra")):
            for eye, rf, dist in _sc_sources(params.grid, kind, src_side):
                w = sgn * W["sc_s"] * params.density(rf.side)
                for b in s_cells:
                    bp.edges.append(Edge(sc_name(eye, rf.id), b, w, d1, False, cls))
        for conj_side in ("left", "right"):
            _connect(bp, s_cells, [f"conj.{conj_side}.DSN[{k}]" for k in range(n)],
                     W["s_dsn"], d1, "s_dsn")
    return bp


# which MN groups push each servo axis in its positive / negative direction
AXIS_GROUPS = {
    "left_pan": (["conj.right.MN.L", "verg.conv.MN.L"], ["conj.left.MN.L", "verg.div.MN.L"]),
    "right_pan": (["conj.right.MN.R", "verg.div.MN.R"], ["conj.left.MN.R", "verg.conv.MN.R"]),
    "left_tilt": (["vert.up.MN.L"], ["vert.down.MN.L"]),
    "right_tilt": (["vert.up.MN.R"], ["vert.down.MN.R"]),
    "neck_pan": (["neck.right.MN"], ["neck.left.MN"]),
    "neck_tilt": (["neck.up.MN"], ["neck.down.MN"]),
}


@dataclass
class ControllerAssembly:
    network: Network
    names: list[str]
    index: dict[str, int]
    groups: dict[str, np.ndarray]  # group name -> cell ids
    sc_ids: dict[str, np.ndarray]  # eye -> cell id per RF id
    port_map: dict[int, list[int]]  # SC cell id -> synapse indices it drives
    mn_groups: dict[str, tuple[list[str], list[str]]]
    plastic: np.ndarray  # synapse indices registered as plastic
    edges: list[Edge]
    grid: RFGrid

    def group(self, name: str) -> np.ndarray:
        return self.groups[name]


def _mirror_name(name: str, grid: RFGrid) -> str:
    if name.startswith("sc."):
        eye = name[3]
        rf = int(name[5:-1])
        return sc_name("R" if eye == "L" else "L", int(grid.mirror_id(rf)))
    parts = name.split(".")
    swap = {"left": "right", "right": "left", "L": "R", "R": "L"}
    out = []
    for p in parts:
        head, bracket, tail = p.partition("[")
        out.append(swap.get(head, head) + bracket + tail)
    return ".".join(out)


def assemble_controller(cfg, grid: RFGrid | None = None) -> ControllerAssembly:
    """Merge all blueprints into one network with unique ids and routing tables."""
    bparams = BuildParams.from_config(cfg, grid)
    grid = bparams.grid
    blueprints = [build_subnetwork(k, s, bparams) for k in Kind for s in _SIDES[k]]

    names: list[str] = []
    params: list[NeuronParams] = []
    index: dict[str, int] = {}
    groups: dict[str, list[int]] = {}
    role_params = {}

    def add(name, role, scale=1.0):
        if name in index:
            return index[name]
        key = (role, scale)
        if key not in role_params:
            role_params[key] = params_from_config(cfg, role, scale)
        index[name] = len(names)
        names.append(name)
        params.append(role_params[key])
        return index[name]

    sc_ids = {}
    for eye in EYES:
        sc_ids[eye] = np.array([add(sc_name(eye, rf.id), Role.SC) for rf in grid.fields])
    for bp in blueprints:
        for group, members in bp.roster.items():
            ids = [add(m, bp.roles[m], bp.threshold_scale[m]) for m in members]
            groups.setdefault(group, ids)
    edges = [e for bp in blueprints for e in bp.edges]
    synapses = []
    for e in edges:
        if e.pre not in index or e.post not in index:
            missing = e.pre if e.pre not in index else e.post
            raise ConfigError("connectome", f"edge {e.cls} references unknown cell {missing}")
        synapses.append(Synapse(index[e.pre], index[e.post], e.weight, e.delay, e.plastic))
    net = Network(params, synapses, dt=cfg["snn.dt"], names=names)

    port_map: dict[int, list[int]] = {}
    for i, s in enumerate(synapses):
        if params[s.pre].role is Role.SC:
            port_map.setdefault(s.pre, []).append(i)
    for eye in EYES:
        for rf_id, cid in enumerate(sc_ids[eye]):
            if int(cid) not in port_map:
                raise ConfigError("connectome", f"SC cell {names[cid]} (RF {rf_id}) has no route")

    mn_groups = {a: (pos, neg) for a, (pos, neg) in AXIS_GROUPS.items()}
    seen = set()
    for pos, neg in mn_groups.values():
        for grp in pos + neg:
            if grp not in groups:
                raise ConfigError("connectome", f"motor group {grp} missing")
            if grp in seen:
                raise ConfigError("connectome", f"motor group {grp} drives two axes")
            seen.add(grp)

    return ControllerAssembly(
        network=net, names=names, index=index,
        groups={k: np.array(v) for k, v in groups.items()}, sc_ids=sc_ids,
        port_map=port_map, mn_groups=mn_groups,
        plastic=np.flatnonzero(net.plastic), edges=edges, grid=grid,
    )


def check_mirror_symmetry(asm: ControllerAssembly) -> list[str]:
    """Edges whose left/right mirror image is missing or has a different weight."""
    table = {(e.pre, e.post, e.cls): (e.weight, e.delay) for e in asm.edges}
    problems = []
    for (pre, post, cls), wd in table.items():
        key = (_mirror_name(pre, asm.grid), _mirror_name(post, asm.grid), cls)
        if table.get(key) != wd:
            problems.append(f"{pre} -> {post} ({cls})")
    return problems


def dump_connectome(asm: ControllerAssembly) -> str:
    """Columnar edge list: pre role/id, post role/id, weight, delay, plastic flag."""
    net = asm.network
    lines = ["pre_role pre_id pre_name post_role post_id post_name weight delay plastic"]
    for s in net.synapses:
        lines.append(f"{net.roles[s.pre].value} {s.pre} {asm.names[s.pre]} "
                     f"{net.roles[s.post].value} {s.post} {asm.names[s.post]} "
                     f"{s.weight:.9f} {s.delay:g} {int(s.plastic)}")
    return "\n".join(lines) + "\n"
