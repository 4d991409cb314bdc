"""Wire regions and the component terminals they touch."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from schem2net.errors import InvalidInput
from schem2net.raster import DEFAULT_CONNECTIVITY, BinaryRaster, PixelCoord, structure
from schem2net.segment import Schematic

log = logging.getLogger(__name__)

CONTACT_RADIUS = 5


@dataclass(frozen=True, eq=False)
class ConnectionGroup:
    """A maximal connected wire region.

    ``pixels`` is an (N, 2) integer array of (row, col), sorted row-major.
    ``touched`` holds one ``(component id, contact pixel)`` per box adjacent
    to the region; the contact is the smallest adjacent region pixel.
    ``contacts`` holds one ``(component id, contact pixel)`` per separate
    place where the region meets a box, so a box reached twice appears
    twice; ``self_loops`` lists those boxes.  Without it, ``contacts``
    defaults to ``touched``.
    """

    region_id: int
    pixels: np.ndarray
    touched: tuple[tuple[str, PixelCoord], ...]
    self_loops: tuple[str, ...] = field(default=())
    contacts: tuple[tuple[str, PixelCoord], ...] = field(default=None)

    def __post_init__(self):
        if self.contacts is None:
            object.__setattr__(self, "contacts", tuple(self.touched))

    @property
    def size(self) -> int:
        """Number of wire ends: separate contacts, not distinct boxes."""
        return len(self.contacts)

    def touched_ids(self) -> list[str]:
        return [cid for cid, _ in self.touched]

    def contact_of(self, component_id: str) -> PixelCoord:
        for cid, contact in self.touched:
            if cid == component_id:
                return contact
        raise InvalidInput(f"component {component_id!r} does not touch region {self.region_id}")

    def bbox(self) -> list[int]:
        """[y0, x0, y1, x1], end-exclusive."""
        lo = self.pixels.min(axis=0)
        hi = self.pixels.max(axis=0) + 1
        return [int(lo[0]), int(lo[1]), int(hi[0]), int(hi[1])]


def _ring_clusters(halo: np.ndarray, connectivity: int) -> list[tuple[int, int]]:
    """Smallest pixel of each connected cluster of ``halo``, row-major."""
    labels, count = ndimage.label(halo, structure=structure(connectivity))
    if count == 1:
        return [tuple(np.argwhere(halo)[0])]
    firsts = ndimage.minimum_position(np.arange(labels.size).reshape(labels.shape),
                                      labels, range(1, count + 1))
    return sorted(firsts)


def find_groups(r: BinaryRaster, s: Schematic,
                connectivity: int = DEFAULT_CONNECTIVITY) -> list[ConnectionGroup]:
    """One group per connected wire region of ``s``, sorted by smallest pixel."""
    labels, count = ndimage.label(s.ink_region, structure=structure(connectivity))
    if count == 0:
        return []
    h, w = labels.shape
    touched: dict[int, list[tuple[str, PixelCoord]]] = {}
    contacts: dict[int, list[tuple[str, PixelCoord]]] = {}
    loops: dict[int, list[str]] = {}
    for b in s.boxes:
        y0, x0, y1, x1 = b.halo_bounds(h, w)
        window = labels[y0:y1, x0:x1]
        present = np.unique(window)
        for lab in present[present != 0].tolist():
            hit = window == lab
            rr, cc = np.nonzero(hit)  # row-major, so the first hit is the smallest
            touched.setdefault(lab, []).append((b.id, PixelCoord(int(rr[0]) + y0, int(cc[0]) + x0)))
            firsts = _ring_clusters(hit, connectivity)
            contacts.setdefault(lab, []).extend((b.id, PixelCoord(r0 + y0, c0 + x0)) for r0, c0 in firsts)
            if len(firsts) > 1:
                loops.setdefault(lab, []).append(b.id)
                log.debug("region %d touches %s at %d places", lab, b.id, len(firsts))

    slices = ndimage.find_objects(labels)
    groups = []
    for lab in range(1, count + 1):
        sl = slices[lab - 1]
        local = np.argwhere(labels[sl] == lab)
        pix = local + np.array([sl[0].start, sl[1].start])
        entries = sorted(touched.get(lab, []), key=lambda t: (t[1], t[0]))
        ends = sorted(contacts.get(lab, []), key=lambda t: (t[1], t[0]))
        groups.append((tuple(pix[0]), pix, tuple(entries), tuple(sorted(loops.get(lab, []))), tuple(ends)))
    groups.sort(key=lambda g: g[0])
    return [ConnectionGroup(i, pix, entries, lp, ends) for i, (_, pix, entries, lp, ends) in enumerate(groups)]


def local_centroid(pixels: np.ndarray, anchor, radius: int = CONTACT_RADIUS) -> tuple[float, float]:
    """Centroid of the pixels within Manhattan distance ``radius`` of ``anchor``.

    ``pixels`` must be sorted row-major, as :attr:`ConnectionGroup.pixels` is.
    """
    lo, hi = np.searchsorted(pixels[:, 0], [anchor[0] - radius, anchor[0] + radius + 1])
    band = pixels[lo:hi]
    d = np.abs(band[:, 0] - anchor[0]) + np.abs(band[:, 1] - anchor[1])
    near = band[d <= radius]
    return float(near[:, 0].mean()), float(near[:, 1].mean())


def contact_angle(g: ConnectionGroup, component, radius: int = CONTACT_RADIUS, contact=None) -> float:
    """Approach angle of ``g`` at ``component``, measured from the box center.

    ``contact`` picks one of several places where ``g`` meets the box; the
    default is the smallest contact pixel.
    """
    if contact is None:
        contact = g.contact_of(component.id)
    row, col = local_centroid(g.pixels, contact, radius)
    return component.angle_to(row, col)
