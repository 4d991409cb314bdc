"""Page-level extraction: segment, trace, resolve, bind pins, build nets."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import PurePath

from schem2net.errors import PinError, RailShort
from schem2net.netlist import Component, Netlist, build_nets
from schem2net.pins import assign_terminals
from schem2net.raster import DEFAULT_CONNECTIVITY, BinaryRaster
from schem2net.resolve import DEFAULT_KERNEL, ResolutionReport, resolve_all
from schem2net.segment import Schematic, split_page
from schem2net.trace import find_groups


@dataclass
class SchematicResult:
    index: int
    schematic: Schematic
    report: ResolutionReport
    netlist: Netlist | None = None
    # (region id or None, reason, [y0, x0, y1, x1])
    exceptions: list[tuple] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.netlist is not None


@dataclass
class PageResult:
    image: str
    schematics: list[SchematicResult]
    stray_regions: int = 0


def schematic_name(image: str, index: int) -> str:
    """``<image stem>_s<index>``, the name used for titles and output files."""
    stem = PurePath(image).stem if image else "page"
    return f"{stem}_s{index}"


def _box_bbox(box):
    return [box.y0, box.x0, box.y1, box.x1]


def extract_schematic(r: BinaryRaster, s: Schematic, index: int, title: str,
                      kernel: int = DEFAULT_KERNEL,
                      connectivity: int = DEFAULT_CONNECTIVITY) -> SchematicResult:
    groups = find_groups(r, s, connectivity)
    boxes = {b.id: b for b in s.boxes}
    report = resolve_all(groups, kernel, boxes, connectivity)
    result = SchematicResult(index, s, report)
    if report.exceptions:
        by_region = {g.region_id: g for g in groups}
        result.exceptions = [(rid, reason, by_region[rid].bbox()) for rid, reason in report.exceptions]
        return result

    for j in report.junction_boxes:
        boxes[j.id] = j
    endpoints = {cid: [] for cid in boxes}
    for idx, conn in enumerate(report.connections):
        endpoints[conn.a.component].append(((idx, "a"), conn.a.angle))
        endpoints[conn.b.component].append(((idx, "b"), conn.b.angle))

    bindings = []
    for cid in sorted(boxes):
        try:
            bindings.extend(assign_terminals(boxes[cid], endpoints[cid]))
        except PinError as exc:
            result.exceptions.append((None, exc.reason, _box_bbox(boxes[cid])))
    if result.exceptions:
        return result

    categories = {cid: b.category for cid, b in boxes.items()}
    try:
        nets = build_nets(bindings, report.connections, categories)
    except RailShort:
        ys = [b.y0 for b in s.boxes] + [b.y1 for b in s.boxes]
        xs = [b.x0 for b in s.boxes] + [b.x1 for b in s.boxes]
        result.exceptions.append((None, RailShort.reason, [min(ys), min(xs), max(ys), max(xs)]))
        return result
    comps = tuple(Component(b.id, b.category, b.orientation) for b in s.boxes if b.category.is_device)
    result.netlist = Netlist(comps, tuple(nets), title)
    return result


def extract_page(r: BinaryRaster, boxes, image: str = "", kernel: int = DEFAULT_KERNEL,
                 connectivity: int = DEFAULT_CONNECTIVITY) -> PageResult:
    """Run the full pipeline on one page; schematic indices start at 1.

    Every netlist is titled with the image name.
    """
    schematics, stray = split_page(r, boxes, image, connectivity)
    results = [extract_schematic(r, s, i, image, kernel, connectivity)
               for i, s in enumerate(schematics, start=1)]
    return PageResult(image, results, stray)
