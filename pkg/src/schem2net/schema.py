"""Component taxonomy, orientations, pin angle windows and the annotation format.

Angles are in degrees, counterclockwise from +x with screen-up at 90.
Orientations act on angles: the optional mirror (about the vertical axis)
maps ``a -> 180 - a``, then the rotation adds ``90 * quarter_turns``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

from schem2net.errors import AnnotationConflict, InvalidInput, ParseError

PIN_HALF_WIDTH = 44.0
FULL_CIRCLE = 180.0


class ComponentCategory(str, Enum):
    NMOS3 = "nmos3"
    NMOS4 = "nmos4"
    PMOS3 = "pmos3"
    PMOS4 = "pmos4"
    NPN = "npn"
    PNP = "pnp"
    RESISTOR = "resistor"
    CAPACITOR = "capacitor"
    INDUCTOR = "inductor"
    DIODE = "diode"
    VSOURCE = "vsource"
    ISOURCE = "isource"
    GND = "gnd"
    VDD = "vdd"
    PORT = "port"
    JUNCTION = "junction"

    def __str__(self):
        return self.value

    @property
    def roles(self) -> tuple[str, ...]:
        return _ROLES[self]

    @property
    def symmetric(self) -> bool:
        return self in _SYMMETRIC

    @property
    def is_device(self) -> bool:
        """True for categories that become SPICE cards."""
        return self not in _SYMBOLS


_MOS4 = ("drain", "gate", "source", "body")
_MOS3 = ("drain", "gate", "source")
_BJT = ("collector", "base", "emitter")
_TWO = ("t1", "t2")
_ONE = ("t1",)

C = ComponentCategory
_ROLES = {
    C.NMOS4: _MOS4, C.PMOS4: _MOS4,
    C.NMOS3: _MOS3, C.PMOS3: _MOS3,
    C.NPN: _BJT, C.PNP: _BJT,
    C.RESISTOR: _TWO, C.CAPACITOR: _TWO, C.INDUCTOR: _TWO,
    C.VSOURCE: _TWO, C.ISOURCE: _TWO,
    C.DIODE: ("anode", "cathode"),
    C.GND: _ONE, C.VDD: _ONE, C.PORT: _ONE, C.JUNCTION: _ONE,
}
_SYMMETRIC = frozenset({C.RESISTOR, C.CAPACITOR, C.INDUCTOR})
_SYMBOLS = frozenset({C.GND, C.VDD, C.PORT, C.JUNCTION})

# Canonical R0 geometry: (role, nominal angle, half-width).
_R0_TABLE = {
    C.NMOS4: (("drain", 90), ("gate", 180), ("source", 270), ("body", 0)),
    C.NMOS3: (("drain", 90), ("gate", 180), ("source", 270)),
    C.NPN: (("collector", 90), ("base", 180), ("emitter", 270)),
    C.DIODE: (("anode", 90), ("cathode", 270)),
    C.RESISTOR: (("t1", 90), ("t2", 270)),
}
_R0_TABLE[C.PMOS4] = _R0_TABLE[C.NMOS4]
_R0_TABLE[C.PMOS3] = _R0_TABLE[C.NMOS3]
_R0_TABLE[C.PNP] = _R0_TABLE[C.NPN]
for _c in (C.CAPACITOR, C.INDUCTOR, C.VSOURCE, C.ISOURCE):
    _R0_TABLE[_c] = _R0_TABLE[C.RESISTOR]
# Single-terminal symbols accept any approach angle; the nominal angle only
# tells the renderer where to draw the pin stub.
_FULL_CIRCLE_NOMINAL = {C.GND: 90, C.VDD: 270, C.PORT: 0, C.JUNCTION: 0}


class Orientation(str, Enum):
    R0 = "R0"
    R90 = "R90"
    R180 = "R180"
    R270 = "R270"
    MR0 = "MR0"
    MR90 = "MR90"
    MR180 = "MR180"
    MR270 = "MR270"

    def __str__(self):
        return self.value

    @property
    def mirrored(self) -> bool:
        return self.value.startswith("M")

    @property
    def quarter_turns(self) -> int:
        return int(self.value.lstrip("MR")) // 90

    @classmethod
    def from_parts(cls, mirrored: bool, quarter_turns: int) -> "Orientation":
        return cls(("M" if mirrored else "") + f"R{(quarter_turns % 4) * 90}")

    def apply(self, angle: float) -> float:
        """Map an R0 angle to this orientation."""
        if self.mirrored:
            angle = 180.0 - angle
        return (angle + 90.0 * self.quarter_turns) % 360.0

    def compose(self, other: "Orientation") -> "Orientation":
        """Orientation equivalent to applying ``other`` first, then ``self``."""
        sign = -1 if self.mirrored else 1
        offset_other = 180 * other.mirrored + 90 * other.quarter_turns
        offset_self = 180 * self.mirrored + 90 * self.quarter_turns
        mirrored = self.mirrored != other.mirrored
        offset = (sign * offset_other + offset_self) % 360
        return Orientation.from_parts(mirrored, ((offset - 180 * mirrored) % 360) // 90)


def angle_distance(a: float, b: float) -> float:
    """Smallest circular distance between two angles, in [0, 180]."""
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


@dataclass(frozen=True)
class PinWindow:
    role: str
    angle: float
    half_width: float

    def contains(self, angle: float) -> bool:
        return angle_distance(angle, self.angle) <= self.half_width


def pin_windows(category, orientation) -> list[PinWindow]:
    """Angular windows of each terminal role for a placed component."""
    category = ComponentCategory(category)
    orientation = Orientation(orientation)
    if category in _FULL_CIRCLE_NOMINAL:
        nominal = orientation.apply(_FULL_CIRCLE_NOMINAL[category])
        return [PinWindow("t1", nominal, FULL_CIRCLE)]
    return [PinWindow(role, orientation.apply(a), PIN_HALF_WIDTH) for role, a in _R0_TABLE[category]]


@dataclass(frozen=True)
class ComponentBox:
    """An annotated component; bounds are inclusive-exclusive pixels."""

    id: str
    category: ComponentCategory
    orientation: Orientation
    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def center(self) -> tuple[float, float]:
        """Box center as (row, col) in pixel-center coordinates."""
        return ((self.y0 + self.y1 - 1) / 2.0, (self.x0 + self.x1 - 1) / 2.0)

    def contains(self, row, col) -> bool:
        return self.y0 <= row < self.y1 and self.x0 <= col < self.x1

    def overlaps(self, other: "ComponentBox") -> bool:
        return (self.x0 < other.x1 and other.x0 < self.x1
                and self.y0 < other.y1 and other.y0 < self.y1)

    def halo_bounds(self, height: int, width: int) -> tuple[int, int, int, int]:
        """(y0, x0, y1, x1) of the box grown by one pixel, clipped to the page."""
        return (max(self.y0 - 1, 0), max(self.x0 - 1, 0),
                min(self.y1 + 1, height), min(self.x1 + 1, width))

    def angle_to(self, row: float, col: float) -> float:
        """Angle from the box center to a point, counterclockwise from +x."""
        cr, cc = self.center
        return math.degrees(math.atan2(cr - row, col - cc)) % 360.0


@dataclass(frozen=True)
class AnnotationDocument:
    image: str
    page_width: int
    page_height: int
    boxes: tuple[ComponentBox, ...]


_TOP_KEYS = ("image", "page_width", "page_height", "boxes")
_BOX_KEYS = ("id", "category", "orientation", "x0", "y0", "x1", "y1")


def _require_int(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{where}: expected integer, got {value!r}")
    return value


def _decode_box(i, rec, page_width, page_height) -> ComponentBox:
    where = f"boxes[{i}]"
    if not isinstance(rec, dict):
        raise ParseError(f"{where}: expected object")
    if set(rec) != set(_BOX_KEYS):
        extra = sorted(set(rec) - set(_BOX_KEYS))
        missing = sorted(set(_BOX_KEYS) - set(rec))
        raise ParseError(f"{where}: unknown fields {extra}, missing fields {missing}")
    box_id = rec["id"]
    if not isinstance(box_id, str) or not box_id or not box_id.isascii() or any(ch.isspace() for ch in box_id):
        raise ParseError(f"{where}: id must be a non-empty ASCII string without whitespace")
    where = f"{where} (id {box_id!r})"
    try:
        category = ComponentCategory(rec["category"])
    except ValueError:
        raise ParseError(f"{where}: unknown category {rec['category']!r}") from None
    try:
        orientation = Orientation(rec["orientation"])
    except ValueError:
        raise ParseError(f"{where}: unknown orientation {rec['orientation']!r}") from None
    x0, y0, x1, y1 = (_require_int(rec[k], f"{where}.{k}") for k in ("x0", "y0", "x1", "y1"))
    if not (0 <= x0 < x1 <= page_width and 0 <= y0 < y1 <= page_height):
        raise ParseError(f"{where}: bounds ({x0},{y0})-({x1},{y1}) invalid for {page_width}x{page_height} page")
    return ComponentBox(box_id, category, orientation, x0, y0, x1, y1)


def check_boxes(boxes) -> None:
    """Raise :class:`AnnotationConflict` on duplicate ids or overlapping boxes."""
    seen = set()
    for b in boxes:
        if b.id in seen:
            raise AnnotationConflict(f"duplicate box id {b.id!r}")
        seen.add(b.id)
    ordered = sorted(boxes, key=lambda b: b.x0)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if b.x0 >= a.x1:
                break
            if a.overlaps(b):
                raise AnnotationConflict(f"boxes {a.id!r} and {b.id!r} overlap")


def load_annotation_document(document) -> AnnotationDocument:
    if isinstance(document, (bytes, bytearray)):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"annotation file is not UTF-8: {exc}") from None
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"annotation file is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError("annotation file must be a JSON object")
    if set(data) != set(_TOP_KEYS):
        extra = sorted(set(data) - set(_TOP_KEYS))
        missing = sorted(set(_TOP_KEYS) - set(data))
        raise ParseError(f"annotation file: unknown fields {extra}, missing fields {missing}")
    if not isinstance(data["image"], str):
        raise ParseError("image: expected string")
    width = _require_int(data["page_width"], "page_width")
    height = _require_int(data["page_height"], "page_height")
    if width < 1 or height < 1:
        raise ParseError("page dimensions must be positive")
    if not isinstance(data["boxes"], list):
        raise ParseError("boxes: expected list")
    boxes = tuple(_decode_box(i, rec, width, height) for i, rec in enumerate(data["boxes"]))
    ids = [b.id for b in boxes]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise ParseError(f"duplicate box ids {dup}")
    check_boxes(boxes)
    return AnnotationDocument(data["image"], width, height, boxes)


def load_annotations(document) -> list[ComponentBox]:
    """Decode and validate an annotation file (bytes or str)."""
    return list(load_annotation_document(document).boxes)


def save_annotations(boxes, image: str, page_width: int, page_height: int) -> bytes:
    """Encode boxes in the annotation file format, keys in canonical order."""
    doc = {
        "image": image,
        "page_width": page_width,
        "page_height": page_height,
        "boxes": [
            {"id": b.id, "category": b.category.value, "orientation": b.orientation.value,
             "x0": b.x0, "y0": b.y0, "x1": b.x1, "y1": b.y1}
            for b in boxes
        ],
    }
    return (json.dumps(doc, indent=2) + "\n").encode("ascii")


def validate_against_page(boxes, height: int, width: int) -> None:
    for b in boxes:
        if not (0 <= b.x0 < b.x1 <= width and 0 <= b.y0 < b.y1 <= height):
            raise InvalidInput(f"box {b.id!r} lies outside the {height}x{width} page")
