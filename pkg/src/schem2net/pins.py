"""Map connection endpoints onto named terminals by approach angle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from schem2net.errors import MissingPin, PinCollision, UnmappedPin
from schem2net.schema import ComponentBox, ComponentCategory, pin_windows

_RAILS = frozenset({ComponentCategory.GND, ComponentCategory.VDD, ComponentCategory.PORT})


@dataclass(frozen=True)
class TerminalBinding:
    component: str
    role: str
    connection: Any
    angle: float


def assign_terminals(c: ComponentBox, endpoints) -> list[TerminalBinding]:
    """Bind each ``(connection, angle)`` endpoint of ``c`` to a terminal role.

    Junctions take any number of endpoints on ``t1``; rail and port symbols
    take exactly one, at any angle.  Other categories need every endpoint in
    a distinct pin window and every role bound.  Symmetric parts (R, C, L)
    get ``t1``/``t2`` in ascending angle order, measured in the part's own
    frame (quarter turns undone) so that rotating the part and its wires
    together keeps the assignment.
    """
    endpoints = list(endpoints)
    if c.category is ComponentCategory.JUNCTION:
        return [TerminalBinding(c.id, "t1", ref, angle) for ref, angle in endpoints]
    if c.category in _RAILS:
        if not endpoints:
            raise MissingPin(c.id, "t1")
        if len(endpoints) > 1:
            raise PinCollision(c.id, f"{len(endpoints)} wires on a single-terminal symbol")
        ref, angle = endpoints[0]
        return [TerminalBinding(c.id, "t1", ref, angle)]

    windows = pin_windows(c.category, c.orientation)
    by_role: dict[str, tuple] = {}
    for ref, angle in endpoints:
        hits = [w for w in windows if w.contains(angle)]
        if not hits:
            raise UnmappedPin(c.id, f"approach angle {angle:.1f} lies in no pin window")
        role = hits[0].role
        if role in by_role:
            raise PinCollision(c.id, f"two wires in the {role} window")
        by_role[role] = (ref, angle)

    missing = [r for r in c.category.roles if r not in by_role]
    if missing:
        raise MissingPin(c.id, ", ".join(missing))

    if c.category.symmetric:
        turn = 90.0 * c.orientation.quarter_turns
        ordered = sorted(by_role.values(), key=lambda e: (e[1] - turn) % 360.0)
        return [TerminalBinding(c.id, role, ref, angle)
                for role, (ref, angle) in zip(c.category.roles, ordered)]
    return [TerminalBinding(c.id, role, *by_role[role]) for role in c.category.roles]
