"""Split a page into schematics by growing component boxes along wire ink."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.cluster.hierarchy import DisjointSet

from schem2net.raster import DEFAULT_CONNECTIVITY, BinaryRaster, PixelCoord, structure
from schem2net.schema import ComponentBox, validate_against_page

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Schematic:
    """One connected drawing on a page.

    ``ink_region`` is a page-shaped boolean mask of the wire ink reachable
    from ``boxes``; use :meth:`pixels` for the coordinate set.
    """

    boxes: tuple[ComponentBox, ...]
    ink_region: np.ndarray
    page_ref: str = ""

    def pixels(self) -> frozenset[PixelCoord]:
        return frozenset(PixelCoord(int(r), int(c)) for r, c in np.argwhere(self.ink_region))


def box_mask(shape, boxes) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for b in boxes:
        mask[b.y0:b.y1, b.x0:b.x1] = True
    return mask


def wire_mask(r: BinaryRaster, boxes) -> np.ndarray:
    """Ink pixels not covered by any box, as a boolean mask."""
    return r.ink & ~box_mask(r.ink.shape, boxes)


def wire_pixels(r: BinaryRaster, boxes) -> frozenset[PixelCoord]:
    return frozenset(PixelCoord(int(y), int(x)) for y, x in np.argwhere(wire_mask(r, boxes)))


def halo_labels(labels: np.ndarray, box: ComponentBox) -> np.ndarray:
    """Nonzero labels present in the one-pixel ring around ``box``."""
    y0, x0, y1, x1 = box.halo_bounds(*labels.shape)
    found = np.unique(labels[y0:y1, x0:x1])
    return found[found != 0]


def split_page(r: BinaryRaster, boxes, page_ref: str = "",
               connectivity: int = DEFAULT_CONNECTIVITY) -> tuple[list[Schematic], int]:
    """Like :func:`segment_page`, also returning the number of stray ink regions."""
    boxes = list(boxes)
    validate_against_page(boxes, r.height, r.width)
    labels, count = ndimage.label(wire_mask(r, boxes), structure=structure(connectivity))

    owners = DisjointSet(b.id for b in boxes)
    label_owner: dict[int, str] = {}
    for b in boxes:
        for lab in halo_labels(labels, b).tolist():
            if lab in label_owner:
                owners.merge(label_owner[lab], b.id)
            else:
                label_owner[lab] = b.id

    by_id = {b.id: b for b in boxes}
    classes = []
    for subset in owners.subsets():
        members = sorted((by_id[i] for i in subset), key=lambda b: (b.y0, b.x0, b.id))
        classes.append(members)
    classes.sort(key=lambda members: (members[0].y0, members[0].x0, members[0].id))

    root_of_label = np.zeros(count + 1, dtype=np.int64)
    class_index = {}
    for k, members in enumerate(classes):
        for b in members:
            class_index[b.id] = k + 1
    for lab, owner in label_owner.items():
        root_of_label[lab] = class_index[owner]
    owner_map = root_of_label[labels]

    dropped = count - len(label_owner)
    if dropped:
        log.warning("%s: dropped %d stray ink region(s) not touching any box", page_ref or "page", dropped)

    out = []
    for k, members in enumerate(classes):
        region = owner_map == (k + 1)
        region.flags.writeable = False
        out.append(Schematic(tuple(members), region, page_ref))
    return out, dropped


def segment_page(r: BinaryRaster, boxes, page_ref: str = "",
                 connectivity: int = DEFAULT_CONNECTIVITY) -> list[Schematic]:
    """Partition ``boxes`` into schematics joined by wire ink.

    Two boxes share a schematic when a wire-ink path links pixels adjacent to
    each (8-adjacency to the box, diagonal contact included).  Output is
    ordered by the smallest ``(y0, x0)`` of each class.  Ink touching no box
    is dropped with a logged warning.
    """
    return split_page(r, boxes, page_ref, connectivity)[0]
