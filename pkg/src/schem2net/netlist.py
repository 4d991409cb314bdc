"""Nets, SPICE emission, the emitted-dialect reader and netlist equivalence."""

from __future__ import annotations

import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from scipy.cluster.hierarchy import DisjointSet

from schem2net.errors import MissingPin, ParseError, RailShort
from schem2net.schema import ComponentCategory, Orientation

C = ComponentCategory

GROUND = "0"
SUPPLY = "VDD"
RAIL_NAMES = frozenset({GROUND, SUPPLY})

DEFAULT_PARAMS = {
    C.NMOS3: "NMOS W=1u L=1u", C.NMOS4: "NMOS W=1u L=1u",
    C.PMOS3: "PMOS W=1u L=1u", C.PMOS4: "PMOS W=1u L=1u",
    C.NPN: "NPN", C.PNP: "PNP",
    C.RESISTOR: "1k", C.CAPACITOR: "1p", C.INDUCTOR: "1n",
    C.DIODE: "DDEF", C.VSOURCE: "DC 1", C.ISOURCE: "DC 1m",
}

CARD_LETTER = {
    C.NMOS3: "M", C.NMOS4: "M", C.PMOS3: "M", C.PMOS4: "M",
    C.NPN: "Q", C.PNP: "Q",
    C.RESISTOR: "R", C.CAPACITOR: "C", C.INDUCTOR: "L",
    C.DIODE: "D", C.VSOURCE: "V", C.ISOURCE: "I",
}

# Roles in card order; three-terminal MOSFETs reuse the source for the bulk.
_CARD_ROLES = {
    C.NMOS4: ("drain", "gate", "source", "body"), C.PMOS4: ("drain", "gate", "source", "body"),
    C.NMOS3: ("drain", "gate", "source", "source"), C.PMOS3: ("drain", "gate", "source", "source"),
}


def card_roles(category: ComponentCategory) -> tuple[str, ...]:
    return _CARD_ROLES.get(category, category.roles)


@dataclass(frozen=True)
class Component:
    id: str
    category: ComponentCategory
    orientation: Orientation = Orientation.R0
    params: str = ""

    def __post_init__(self):
        object.__setattr__(self, "category", ComponentCategory(self.category))
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        if not self.params:
            object.__setattr__(self, "params", DEFAULT_PARAMS[self.category])


@dataclass(frozen=True)
class Net:
    name: str
    members: frozenset

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))


@dataclass(frozen=True)
class Netlist:
    components: tuple[Component, ...] = ()
    nets: tuple[Net, ...] = ()
    title: str = ""

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(sorted(self.components, key=lambda c: c.id)))
        object.__setattr__(self, "nets", tuple(self.nets))

    def net_of(self) -> dict[tuple[str, str], str]:
        """Map (component id, role) to net name."""
        return {m: n.name for n in self.nets for m in n.members}

    def component(self, cid: str) -> Component:
        for c in self.components:
            if c.id == cid:
                return c
        raise KeyError(cid)


@dataclass(frozen=True)
class Card:
    """Card-level view of one component: what SPICE can express."""

    kind: tuple[str, str]
    nets: tuple[str, ...]
    symmetric: bool = field(default=False)


def cards(n: Netlist) -> list[Card]:
    net_of = n.net_of()
    out = []
    for comp in n.components:
        nets = []
        for role in card_roles(comp.category):
            if (comp.id, role) not in net_of:
                raise MissingPin(comp.id, role)
            nets.append(net_of[(comp.id, role)])
        out.append(Card((CARD_LETTER[comp.category], comp.params), tuple(nets), comp.category.symmetric))
    return out


# -- net construction --------------------------------------------------------

def _natural_key(name: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", name)]


def build_nets(bindings, connections, categories) -> list[Net]:
    """Merge connection endpoints into named nets.

    ``bindings`` are :class:`~schem2net.pins.TerminalBinding` whose
    ``connection`` is ``(index into connections, "a" | "b")``.
    ``categories`` maps component id to its category.  Junction terminals
    join nets but are dropped from membership; ground, supply and port
    symbols name their net and are dropped too.
    """
    categories = {k: ComponentCategory(v) for k, v in categories.items()}
    ends = defaultdict(list)
    terms = []
    for b in bindings:
        idx, _ = b.connection
        key = (b.component, b.role)
        ends[idx].append(key)
        terms.append(key)
    ds = DisjointSet(terms)
    for idx in range(len(connections)):
        keys = ends.get(idx, [])
        for k in keys[1:]:
            ds.merge(keys[0], k)

    # Rail and port names are global: same-named nets are one node.
    forced_root = {}
    for key in terms:
        cat = categories[key[0]]
        name = {C.GND: GROUND, C.VDD: SUPPLY}.get(cat, key[0] if cat is C.PORT else None)
        if name is None:
            continue
        if name in forced_root:
            ds.merge(forced_root[name], key)
        else:
            forced_root[name] = key

    nets = []
    for subset in ds.subsets():
        cats = {categories[cid] for cid, _ in subset}
        if C.GND in cats and C.VDD in cats:
            raise RailShort(f"net joins ground and supply: {sorted(subset)}")
        if C.GND in cats:
            name = GROUND
        elif C.VDD in cats:
            name = SUPPLY
        elif C.PORT in cats:
            name = min(cid for cid, _ in subset if categories[cid] is C.PORT)
        else:
            name = None
        members = frozenset(m for m in subset if categories[m[0]].is_device)
        if members:
            nets.append((name, members))

    forced = {name for name, _ in nets if name is not None}
    generic = sorted((min(m), m) for name, m in nets if name is None)
    out = [Net(name, m) for name, m in sorted(((n, m) for n, m in nets if n is not None),
                                              key=lambda t: _natural_key(t[0]))]
    k = 0
    for _, members in generic:
        k += 1
        while f"net{k}" in forced:
            k += 1
        out.append(Net(f"net{k}", members))
    return out


# -- SPICE -------------------------------------------------------------------

def emit_spice(n: Netlist) -> str:
    """Render ``n`` as SPICE text: title line, one card per component, ``.end``."""
    lines = [n.title]
    for comp, card in zip(n.components, cards(n)):
        lines.append(" ".join((CARD_LETTER[comp.category] + comp.id, *card.nets, comp.params)))
    lines.append(".end")
    text = "\n".join(lines) + "\n"
    text.encode("ascii")
    return text


_FROM_LETTER = {
    "R": C.RESISTOR, "C": C.CAPACITOR, "L": C.INDUCTOR,
    "D": C.DIODE, "V": C.VSOURCE, "I": C.ISOURCE,
}
_MODEL_CATEGORY = {("M", "NMOS"): C.NMOS4, ("M", "PMOS"): C.PMOS4, ("Q", "NPN"): C.NPN, ("Q", "PNP"): C.PNP}
_ARITY = {"M": 4, "Q": 3, "R": 2, "C": 2, "L": 2, "D": 2, "V": 2, "I": 2}


def parse_spice(text: str) -> Netlist:
    """Read the dialect written by :func:`emit_spice` (and nothing more)."""
    if "\r" in text:
        raise ParseError("CR line endings are not part of the dialect")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) < 2:
        raise ParseError("expected a title line and a .end line")
    if lines[-1] != ".end":
        raise ParseError("missing .end terminator")
    title = lines[0]
    comps = []
    members = defaultdict(set)
    seen = set()
    for lineno, line in enumerate(lines[1:-1], start=2):
        tokens = line.split()
        if not tokens:
            raise ParseError(f"line {lineno}: empty card")
        name = tokens[0]
        letter, cid = name[:1], name[1:]
        if letter not in _ARITY or not cid:
            raise ParseError(f"line {lineno}: unknown card {name!r}")
        arity = _ARITY[letter]
        if len(tokens) < arity + 2:
            raise ParseError(f"line {lineno}: {name} needs {arity} nodes and parameters")
        if cid in seen:
            raise ParseError(f"line {lineno}: duplicate component id {cid!r}")
        seen.add(cid)
        nodes = tokens[1:1 + arity]
        params = " ".join(tokens[1 + arity:])
        if letter in ("M", "Q"):
            category = _MODEL_CATEGORY.get((letter, tokens[1 + arity]))
            if category is None:
                raise ParseError(f"line {lineno}: unknown model {tokens[1 + arity]!r}")
        else:
            category = _FROM_LETTER[letter]
        comps.append(Component(cid, category, Orientation.R0, params))
        for role, node in zip(category.roles, nodes):
            members[node].add((cid, role))
    nets = [Net(name, m) for name, m in sorted(members.items(), key=lambda t: _natural_key(t[0]))]
    return Netlist(tuple(comps), tuple(nets), title)


# -- equivalence -------------------------------------------------------------

def _slot_signatures(cs: list[Card]) -> dict[str, Counter]:
    sig = defaultdict(Counter)
    for card in cs:
        for slot, net in enumerate(card.nets):
            sig[net][(card.kind, "s" if card.symmetric else str(slot))] += 1
    return sig


def _orders(card: Card):
    yield card.nets
    if card.symmetric and len(card.nets) == 2 and card.nets[0] != card.nets[1]:
        yield card.nets[::-1]


def graph_equal(a: Netlist, b: Netlist) -> bool:
    """Component- and role-preserving isomorphism up to net renaming.

    Components must match in card kind (letter and parameters); R, C and L
    may swap their two terminals.  Ground ``0`` and ``VDD`` keep their names.
    """
    ca, cb = cards(a), cards(b)
    if len(ca) != len(cb):
        return False
    if Counter(c.kind for c in ca) != Counter(c.kind for c in cb):
        return False
    sig_a, sig_b = _slot_signatures(ca), _slot_signatures(cb)
    if sorted(map(_freeze, sig_a.values())) != sorted(map(_freeze, sig_b.values())):
        return False
    for rail in RAIL_NAMES:
        if (rail in sig_a) != (rail in sig_b):
            return False
        if rail in sig_a and sig_a[rail] != sig_b[rail]:
            return False

    by_kind = defaultdict(list)
    for j, card in enumerate(cb):
        by_kind[card.kind].append(j)

    # Visit components so each one shares a net with an already placed one
    # where possible; rare kinds first.
    rarity = Counter(c.kind for c in ca)
    order = []
    placed_nets = set()
    remaining = set(range(len(ca)))
    while remaining:
        touching = [i for i in remaining if placed_nets.intersection(ca[i].nets)]
        pool = touching or list(remaining)
        i = min(pool, key=lambda i: (rarity[ca[i].kind], -len(set(ca[i].nets) & placed_nets), i))
        order.append(i)
        remaining.discard(i)
        placed_nets.update(ca[i].nets)

    fwd: dict[str, str] = {r: r for r in RAIL_NAMES if r in sig_a}
    rev: dict[str, str] = dict(fwd)
    used = [False] * len(cb)

    def bind(na, nb, added):
        if na in fwd:
            return fwd[na] == nb
        if nb in rev or nb in RAIL_NAMES or na in RAIL_NAMES:
            return False
        if sig_a[na] != sig_b[nb]:
            return False
        fwd[na] = nb
        rev[nb] = na
        added.append(na)
        return True

    def search(pos):
        if pos == len(order):
            return True
        card = ca[order[pos]]
        for j in by_kind[card.kind]:
            if used[j]:
                continue
            for nets_b in _orders(cb[j]):
                added = []
                if all(bind(na, nb, added) for na, nb in zip(card.nets, nets_b)):
                    used[j] = True
                    if search(pos + 1):
                        return True
                    used[j] = False
                for na in added:
                    del rev[fwd.pop(na)]
        return False

    return search(0)


def _freeze(counter: Counter):
    return tuple(sorted(counter.items()))
