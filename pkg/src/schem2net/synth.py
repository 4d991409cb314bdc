"""Seeded synthetic schematics with ground truth.

Components sit on a coarse grid; nets are Manhattan-routed between pin
nodes with A*, drawn as solid lines, and branch points get junction dots.
Wires of different nets may only cross perpendicularly, both going straight
through the crossing node, and never share a node otherwise.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from schem2net.errors import InvalidInput, RenderGiveUp
from schem2net.netlist import GROUND, SUPPLY, Component, Net, Netlist, emit_spice
from schem2net.raster import BinaryRaster, PixelCoord
from schem2net.schema import ComponentBox, ComponentCategory, Orientation, pin_windows, save_annotations

C = ComponentCategory

DEVICE_WEIGHTS = {
    C.NMOS4: 0.18, C.PMOS4: 0.14, C.NMOS3: 0.10, C.PMOS3: 0.08,
    C.NPN: 0.05, C.PNP: 0.04,
    C.RESISTOR: 0.13, C.CAPACITOR: 0.08, C.INDUCTOR: 0.03,
    C.DIODE: 0.05, C.VSOURCE: 0.06, C.ISOURCE: 0.06,
}
_LETTER = {
    C.NMOS3: "m", C.NMOS4: "m", C.PMOS3: "m", C.PMOS4: "m", C.NPN: "q", C.PNP: "q",
    C.RESISTOR: "r", C.CAPACITOR: "c", C.INDUCTOR: "l", C.DIODE: "d",
    C.VSOURCE: "v", C.ISOURCE: "i",
}

MAX_PLACEMENTS = 10
MAX_REORDERS = 6
SLOT_SPARSITY = 1.5     # placement slots per symbol
SLOT_NODES = 8          # grid nodes per placement slot (5-node footprint + 3 free tracks)
BEND_COST = 3
CROSS_COST = 4
HEURISTIC_WEIGHT = 2

_DIRS = ((0, 1), (-1, 0), (0, -1), (1, 0))  # indexed by angle // 90


def _range(value, name):
    if isinstance(value, int):
        return (value, value)
    lo, hi = value
    if lo > hi:
        raise InvalidInput(f"{name}: empty range {lo}..{hi}")
    return (int(lo), int(hi))


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    component_count: tuple[int, int] = (3, 30)
    crossing_probability: float = 0.4
    omit_junction_probability: float = 0.0
    dangling_probability: float = 0.0
    line_width: tuple[int, int] = (1, 3)
    pitch: int = 12

    def __post_init__(self):
        object.__setattr__(self, "component_count", _range(self.component_count, "component_count"))
        object.__setattr__(self, "line_width", _range(self.line_width, "line_width"))
        if not 0 <= self.seed < 2**64:
            raise InvalidInput("seed must be a non-negative 64-bit integer")
        for name in ("crossing_probability", "omit_junction_probability", "dangling_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidInput(f"{name} must be in [0, 1], got {p}")
        if self.component_count[0] < 1:
            raise InvalidInput("component_count must be at least 1")
        lo, hi = self.line_width
        if lo < 1 or hi > 3:
            raise InvalidInput("line_width must lie within 1..3 pixels")
        if self.pitch < 4 * hi:
            raise InvalidInput(f"pitch {self.pitch} is below 4 x line width {hi}")

    def with_seed(self, seed: int) -> "SynthConfig":
        return SynthConfig(seed, self.component_count, self.crossing_probability,
                           self.omit_junction_probability, self.dangling_probability,
                           self.line_width, self.pitch)


@dataclass
class SynthLayout:
    netlist: Netlist
    placements: dict[str, tuple[ComponentBox, Orientation]]
    routes: dict[str, list[tuple[PixelCoord, PixelCoord]]]
    crossing_points: list[PixelCoord] = field(default_factory=list)
    junction_dots: list[PixelCoord] = field(default_factory=list)
    omitted_dots: list[PixelCoord] = field(default_factory=list)
    stub_nets: list[str] = field(default_factory=list)
    line_width: int = 1
    pitch: int = 12

    def to_json(self) -> dict:
        return {
            "title": self.netlist.title,
            "line_width": self.line_width,
            "pitch": self.pitch,
            "placements": {cid: {"category": b.category.value, "orientation": o.value,
                                 "bounds": [b.x0, b.y0, b.x1, b.y1]}
                           for cid, (b, o) in sorted(self.placements.items())},
            "routes": {name: [[list(a), list(b)] for a, b in segs] for name, segs in self.routes.items()},
            "crossing_points": [list(p) for p in self.crossing_points],
            "junction_dots": [list(p) for p in self.junction_dots],
            "omitted_dots": [list(p) for p in self.omitted_dots],
            "stub_nets": list(self.stub_nets),
            "golden": emit_spice(self.netlist),
        }


def _rng(cfg: SynthConfig, *stream):
    return np.random.default_rng([cfg.seed, *stream])


# -- netlist sampling --------------------------------------------------------

def _allowed(net, term, kinds):
    rails = {kinds[cid] for cid, _ in net} | {kinds[term[0]]}
    return not (C.GND in rails and C.VDD in rails)


def sample_netlist(cfg: SynthConfig) -> Netlist:
    """Random connected netlist with exactly one ground, deterministic in the seed.

    Every net joins at least two terminals (counting the ground and supply
    symbols), except stub nets added with ``dangling_probability``.
    """
    rng = _rng(cfg, 0)
    lo, hi = cfg.component_count
    n = int(rng.integers(lo, hi + 1))
    cats = list(DEVICE_WEIGHTS)
    weights = np.array([DEVICE_WEIGHTS[c] for c in cats])
    picks = rng.choice(len(cats), size=n, p=weights / weights.sum())
    counters = {}
    comps = []
    for k in picks:
        cat = cats[int(k)]
        letter = _LETTER[cat]
        counters[letter] = counters.get(letter, 0) + 1
        comps.append(Component(f"{letter}{counters[letter]}", cat))
    kinds = {c.id: c.category for c in comps}
    kinds["gnd1"] = C.GND

    stubs = []
    if rng.random() < cfg.dangling_probability:
        n_stub = 1 + int(rng.random() < 0.3)
        pool = [(c.id, r) for c in comps for r in c.category.roles]
        for i in rng.permutation(len(pool)).tolist():
            cid, role = pool[i]
            left = [r for r in kinds[cid].roles if (cid, r) not in stubs and r != role]
            if left:
                stubs.append((cid, role))
            if len(stubs) == n_stub:
                break

    free = {c.id: [r for r in c.category.roles if (c.id, r) not in stubs] for c in comps}
    for cid in free:
        free[cid] = [free[cid][i] for i in rng.permutation(len(free[cid])).tolist()]
    free["gnd1"] = ["t1"]

    order = [comps[i].id for i in rng.permutation(n).tolist()]
    if n >= 2 and rng.random() < 0.5:
        kinds["vdd1"] = C.VDD
        free["vdd1"] = ["t1"]
        order.insert(1 + int(rng.integers(0, n)), "vdd1")

    nets: list[list[tuple[str, str]]] = []
    connected = ["gnd1"]
    for node in order:
        term = (node, free[node].pop())
        pairs = [(u, r) for u in connected for r in free[u] if _allowed([(u, r)], term, kinds)]
        joins = [i for i, net in enumerate(nets) if _allowed(net, term, kinds)]
        if not pairs and not joins:
            if node == "vdd1":
                del kinds["vdd1"]
                continue
            raise AssertionError("unreachable: ground terminal is always available first")
        if pairs and (not joins or rng.random() < 0.6):
            u, r = pairs[int(rng.integers(len(pairs)))]
            free[u].remove(r)
            nets.append([(u, r), term])
        else:
            nets[joins[int(rng.integers(len(joins)))]].append(term)
        connected.append(node)

    leftover = [(cid, r) for cid in connected for r in free[cid]]
    leftover = [leftover[i] for i in rng.permutation(len(leftover)).tolist()]
    while leftover:
        term = leftover.pop()
        partners = [u for u in leftover if u[0] != term[0] and _allowed([u], term, kinds)]
        joins = [i for i, net in enumerate(nets) if _allowed(net, term, kinds)]
        if partners and (not joins or rng.random() < 0.55):
            u = partners[int(rng.integers(len(partners)))]
            leftover.remove(u)
            nets.append([u, term])
        else:
            nets[joins[int(rng.integers(len(joins)))]].append(term)

    if cfg.omit_junction_probability > 0 and all(len(net) < 3 for net in nets) and len(nets) > 1:
        # Guarantee a branch point so omitted dots have somewhere to happen.
        for j in range(1, len(nets)):
            if _allowed(nets[0], nets[j][0], kinds) and _allowed(nets[0], nets[j][1], kinds):
                nets[0].extend(nets.pop(j))
                break

    named = []
    generic = []
    for net in nets:
        members = frozenset(m for m in net if m[0] in {c.id for c in comps})
        if any(kinds[cid] is C.GND for cid, _ in net):
            named.append(Net(GROUND, members))
        elif any(kinds[cid] is C.VDD for cid, _ in net):
            named.append(Net(SUPPLY, members))
        else:
            generic.append(members)
    generic.extend(frozenset([s]) for s in stubs)
    generic.sort(key=min)
    out = named + [Net(f"net{k}", m) for k, m in enumerate(generic, start=1)]
    return Netlist(tuple(comps), tuple(out), f"seed_{cfg.seed:06d}")


def netlist_connected(n: Netlist) -> bool:
    """True if every component reaches every other through shared nets."""
    ids = [c.id for c in n.components]
    if not ids:
        return True
    adj = {i: set() for i in ids}
    for net in n.nets:
        owners = sorted({cid for cid, _ in net.members})
        for a in owners:
            adj[a].update(owners)
    seen = {ids[0]}
    stack = [ids[0]]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(ids)


# -- routing -----------------------------------------------------------------

FREE, FIXED, HPASS, VPASS, BEND = 0, 1, 2, 3, 4


class _RouteFail(Exception):
    def __init__(self, net):
        super().__init__(net)
        self.net = net


class _Grid:
    def __init__(self, rows: int, cols: int):
        self.kind = np.zeros((rows, cols), dtype=np.int8)
        self.owner = np.full((rows, cols), -1, dtype=np.int32)
        self.rows, self.cols = rows, cols

    def copy(self) -> "_Grid":
        other = _Grid(self.rows, self.cols)
        other.kind[:] = self.kind
        other.owner[:] = self.owner
        return other

    def reachable(self, net: int, start, targets) -> bool:
        """Cheap necessary condition for :meth:`route`, ignoring headings."""
        passes = (self.kind == HPASS) | (self.kind == VPASS)
        open_ = (self.kind == FREE) | (passes & (self.owner != net))
        open_[start] = True
        for t in targets:
            open_[t] = True
        labels, _ = ndimage.label(open_)
        return any(labels[t] == labels[start] for t in targets)

    def crossable(self, net: int) -> bool:
        passes = (self.kind == HPASS) | (self.kind == VPASS)
        return bool(np.any(passes & (self.owner != net)))

    def route(self, net: int, start, start_dir: int, targets: set, need_cross: bool):
        """A* over (node, heading, crossed) states; returns ``(row, col, heading)`` list or None.

        Moves never reverse.  Another net's straight wire may be crossed only
        perpendicularly and straight through; with ``need_cross`` the path
        must cross at least once.
        """
        if not self.reachable(net, start, targets):
            return None
        rows, cols = self.rows, self.cols
        kind = self.kind.ravel().tolist()
        foreign = (self.owner.ravel() != net).tolist()
        goal = {r * cols + c for r, c in targets}
        t_lo_r = min(t[0] for t in targets)
        t_hi_r = max(t[0] for t in targets)
        t_lo_c = min(t[1] for t in targets)
        t_hi_c = max(t[1] for t in targets)
        cross_cost = 0 if need_cross else CROSS_COST
        steps = [(dr, dc, dr * cols + dc) for dr, dc in _DIRS]

        # state = (cell * 4 + heading) * 2 + crossed
        s0 = ((start[0] * cols + start[1]) * 4 + start_dir) * 2
        best = {s0: 0}
        parent = {s0: -1}
        heap = [(0, 0, s0)]
        while heap:
            _, g, state = heapq.heappop(heap)
            if best[state] < g:
                continue
            crossed = state & 1
            d = (state >> 1) & 3
            cell = state >> 3
            r, c = divmod(cell, cols)
            if cell in goal and state != s0 and (crossed or not need_cross):
                path = []
                while state != -1:
                    cl = state >> 3
                    path.append((cl // cols, cl % cols, (state >> 1) & 3))
                    state = parent[state]
                return path[::-1]
            k0 = kind[cell]
            at_crossing = (k0 == HPASS or k0 == VPASS) and foreign[cell]
            for nd in range(4):
                if nd == (d + 2) % 4 or (at_crossing and nd != d):
                    continue
                dr, dc, dcell = steps[nd]
                rr, cc = r + dr, c + dc
                if rr < 0 or rr >= rows or cc < 0 or cc >= cols:
                    continue
                ncell = cell + dcell
                step = 1 if nd == d else 1 + BEND_COST
                ncross = crossed
                if ncell not in goal:
                    k = kind[ncell]
                    if k == FREE:
                        pass
                    elif (k == HPASS or k == VPASS) and foreign[ncell]:
                        if (k == HPASS) == (nd == 0 or nd == 2):
                            continue
                        step += cross_cost
                        ncross = 1
                    else:
                        continue
                ns = ((ncell << 2) + nd) * 2 + ncross
                ng = g + step
                if ng < best.get(ns, ng + 1):
                    best[ns] = ng
                    parent[ns] = state
                    hr = t_lo_r - rr if rr < t_lo_r else (rr - t_hi_r if rr > t_hi_r else 0)
                    hc = t_lo_c - cc if cc < t_lo_c else (cc - t_hi_c if cc > t_hi_c else 0)
                    # Greedy weighting: paths need to be tidy, not shortest.
                    est = hr + hc + (BEND_COST if hr and hc else 0)
                    heapq.heappush(heap, (ng + HEURISTIC_WEIGHT * est, ng, ns))
        return None


@dataclass
class _Symbol:
    id: str
    category: ComponentCategory
    orientation: Orientation
    node: tuple[int, int]
    box: ComponentBox = None
    pins: dict = field(default_factory=dict)  # role -> (pin node, outward dir index)


def _rail_id(base: str, taken) -> str:
    k = 1
    while f"{base}{k}" in taken:
        k += 1
    return f"{base}{k}"


def _drawing_nets(n: Netlist, gnd_id: str, vdd_id: str):
    nets = []
    for net in n.nets:
        terms = sorted(net.members)
        if net.name == GROUND:
            terms.append((gnd_id, "t1"))
        elif net.name == SUPPLY:
            terms.append((vdd_id, "t1"))
        nets.append((net.name, terms))
    return nets


def _half_sizes(category, orientation, pitch):
    if len(category.roles) == 2:
        if orientation.quarter_turns % 2 == 0:
            return pitch, pitch // 2  # (rows, cols): pins up and down
        return pitch // 2, pitch
    return pitch, pitch


def _try_layout(cfg, n: Netlist, w: int, rng):
    pitch = cfg.pitch
    margin = pitch
    ids = {c.id for c in n.components}
    names = {net.name for net in n.nets}
    gnd_id = _rail_id("gnd", ids)
    vdd_id = _rail_id("vdd", ids)
    specs = [(c.id, c.category) for c in n.components]
    if GROUND in names:
        specs.append((gnd_id, C.GND))
    if SUPPLY in names:
        specs.append((vdd_id, C.VDD))

    slots_needed = math.ceil(len(specs) * SLOT_SPARSITY) + 1
    cols = math.ceil(math.sqrt(slots_needed))
    rows = math.ceil(slots_needed / cols)
    grid = _Grid(rows * SLOT_NODES + 1, cols * SLOT_NODES + 1)
    height = 2 * margin + (grid.rows - 1) * pitch + 1
    width = 2 * margin + (grid.cols - 1) * pitch + 1

    def px(node):
        return PixelCoord(margin + node[0] * pitch, margin + node[1] * pitch)

    slots = rng.permutation(rows * cols)[:len(specs)].tolist()
    orients = rng.integers(0, 8, size=len(specs)).tolist()
    all_orients = list(Orientation)
    symbols = {}
    for (cid, cat), slot, o in zip(specs, slots, orients):
        node = (3 + SLOT_NODES * (slot // cols), 3 + SLOT_NODES * (slot % cols))
        orient = all_orients[o]
        sym = _Symbol(cid, cat, orient, node)
        cy, cx = px(node)
        hy, hx = _half_sizes(cat, orient, pitch)
        sym.box = ComponentBox(cid, cat, orient, cx - hx, cy - hy, cx + hx + 1, cy + hy + 1)
        grid.kind[node[0] - 1:node[0] + 2, node[1] - 1:node[1] + 2] = FIXED
        for win in pin_windows(cat, orient):
            d = int(round(win.angle)) % 360 // 90
            dr, dc = _DIRS[d]
            pin = (node[0] + 2 * dr, node[1] + 2 * dc)
            sym.pins[win.role] = (pin, d)
            grid.kind[pin] = FIXED
        symbols[cid] = sym

    nets = _drawing_nets(n, gnd_id, vdd_id)
    for i, (_, terms) in enumerate(nets):
        for cid, role in terms:
            grid.owner[symbols[cid].pins[role][0]] = i
    order = rng.permutation(len(nets)).tolist()
    for _ in range(MAX_REORDERS):
        try:
            routes, crossings, dots = _route_nets(cfg, grid.copy(), symbols, nets, order, rng, px)
            return symbols, routes, crossings, dots, (height, width), nets
        except _RouteFail as exc:
            # Rip up everything and give the stuck net first pick.
            order.remove(exc.net)
            order.insert(0, exc.net)
    raise _RouteFail(None)


def _simple(path):
    """``path`` unless it visits a node twice (states carry heading and crossed flag)."""
    if path is None or len({(r, c) for r, c, _ in path}) != len(path):
        return None
    return path


def _route_nets(cfg, grid, symbols, nets, order, rng, px):
    routes = {name: [] for name, _ in nets}
    crossings = []
    dots = []
    for i in order:
        name, terms = nets[i]
        if len(terms) < 2:
            continue
        terms = [terms[j] for j in rng.permutation(len(terms)).tolist()]
        want_cross = rng.random() < cfg.crossing_probability
        tree = set()
        for k in range(1, len(terms)):
            pin, d = symbols[terms[k][0]].pins[terms[k][1]]
            if k == 1:
                targets = {symbols[terms[0][0]].pins[terms[0][1]][0]}
            else:
                targets = {t for t in tree if grid.kind[t] in (HPASS, VPASS, BEND)}
                if not targets:
                    raise _RouteFail(i)
            need = want_cross and k == 1 and grid.crossable(i)
            path = _simple(grid.route(i, pin, d, targets, need))
            if path is None and need:
                path = _simple(grid.route(i, pin, d, targets, False))
            if path is None:
                raise _RouteFail(i)
            nodes = [(s[0], s[1]) for s in path]
            heads = [s[2] for s in path]
            for j in range(1, len(nodes) - 1):
                node = nodes[j]
                if grid.kind[node] in (HPASS, VPASS) and grid.owner[node] != i:
                    grid.kind[node] = FIXED
                    crossings.append(px(node))
                elif heads[j] == heads[j + 1]:
                    grid.kind[node] = HPASS if heads[j] in (0, 2) else VPASS
                else:
                    grid.kind[node] = BEND
                grid.owner[node] = i
            end = nodes[-1]
            if k > 1:
                grid.kind[end] = FIXED
                dots.append(px(end))
            tree.update(nodes)
            routes[name].extend((px(a), px(b)) for a, b in zip(nodes, nodes[1:]))

    return routes, crossings, dots


def _fill(ink, r0, c0, r1, c1, w):
    a, b = (w - 1) // 2, w // 2
    ink[min(r0, r1) - a:max(r0, r1) + b + 1, min(c0, c1) - a:max(c0, c1) + b + 1] = True


def render(cfg: SynthConfig, n: Netlist):
    """Draw ``n``; returns ``(BinaryRaster, annotation bytes, SynthLayout)``."""
    rng_w = _rng(cfg, 1)
    lo, hi = cfg.line_width
    w = int(rng_w.integers(lo, hi + 1))
    for attempt in range(MAX_PLACEMENTS):
        rng = _rng(cfg, 2, attempt)
        try:
            symbols, routes, crossings, dots, shape, nets = _try_layout(cfg, n, w, rng)
            break
        except _RouteFail:
            continue
    else:
        raise RenderGiveUp(f"seed {cfg.seed}: no routable placement in {MAX_PLACEMENTS} attempts")

    ink = np.zeros(shape, dtype=bool)
    for sym in symbols.values():
        b = sym.box
        ink[b.y0 + 2:b.y1 - 2, b.x0 + 2] = True
        ink[b.y0 + 2:b.y1 - 2, b.x1 - 3] = True
        ink[b.y0 + 2, b.x0 + 2:b.x1 - 2] = True
        ink[b.y1 - 3, b.x0 + 2:b.x1 - 2] = True
        cy, cx = (b.y0 + b.y1 - 1) // 2, (b.x0 + b.x1 - 1) // 2
        for pin, _ in sym.pins.values():
            py, pxx = cfg.pitch + pin[0] * cfg.pitch, cfg.pitch + pin[1] * cfg.pitch
            _fill(ink, cy, cx, py, pxx, w)
    for segs in routes.values():
        for a, b in segs:
            _fill(ink, a[0], a[1], b[0], b[1], w)

    boxes = [sym.box for sym in symbols.values()]
    kept, omitted = [], []
    for dot in dots:
        if rng_w.random() < cfg.omit_junction_probability:
            omitted.append(dot)
            continue
        kept.append(dot)
        for dr in range(-w, w + 1):
            for dc in range(-w, w + 1):
                if dr * dr + dc * dc <= (w + 0.5) ** 2:
                    ink[dot[0] + dr, dot[1] + dc] = True
    taken = {b.id for b in boxes}
    for k, dot in enumerate(kept, start=1):
        jid = _rail_id("j", taken) if f"j{k}" in taken else f"j{k}"
        taken.add(jid)
        boxes.append(ComponentBox(jid, C.JUNCTION, Orientation.R0,
                                  dot[1] - w, dot[0] - w, dot[1] + w + 1, dot[0] + w + 1))

    boxes.sort(key=lambda b: (b.y0, b.x0, b.id))
    raster = BinaryRaster(ink)
    annotation = save_annotations(boxes, f"{n.title}.png", shape[1], shape[0])
    stub_nets = [name for name, terms in nets if len(terms) == 1]
    layout = SynthLayout(
        netlist=n,
        placements={sym.id: (sym.box, sym.orientation) for sym in symbols.values()},
        routes=routes,
        crossing_points=sorted(crossings),
        junction_dots=sorted(kept),
        omitted_dots=sorted(omitted),
        stub_nets=stub_nets,
        line_width=w,
        pitch=cfg.pitch,
    )
    return raster, annotation, layout


def synthesize(cfg: SynthConfig):
    """Sample a netlist for ``cfg.seed`` and render it."""
    return render(cfg, sample_netlist(cfg))
