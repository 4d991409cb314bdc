"""Extract SPICE netlists from rasterized schematic images.

The pipeline takes a page image plus component bounding boxes, splits the
page into schematics, traces wires, resolves junction-free crossings and
emits one SPICE netlist per schematic.  A seeded synthetic renderer
produces round-trip test corpora.
"""

from schem2net.errors import (
    AnnotationConflict,
    InvalidInput,
    MissingPin,
    ParseError,
    PinCollision,
    RailShort,
    RenderGiveUp,
    UnmappedPin,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationConflict",
    "InvalidInput",
    "MissingPin",
    "ParseError",
    "PinCollision",
    "RailShort",
    "RenderGiveUp",
    "UnmappedPin",
]
