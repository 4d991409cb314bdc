"""Reduce connection groups to two-ended connections.

Groups are classified by how many wire ends they have at boxes.  A lone stub gets a
synthetic junction at its far end; odd groups are flagged for manual
correction; even groups hold junction-free crossings.  A crossing is found
as the densest spot of the wire ink (box-filter count, argmax), cut out with
a blocking box, and the wires leaving it are paired with their opposites by
angle.  Pieces that still touch more than two terminals go back through the
same loop until every piece is a simple two-ended wire.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import ndimage

from schem2net.errors import Schem2NetError
from schem2net.raster import DEFAULT_CONNECTIVITY, PixelCoord, structure
from schem2net.schema import ComponentBox, ComponentCategory, Orientation, angle_distance
from schem2net.trace import CONTACT_RADIUS, ConnectionGroup, contact_angle, local_centroid

log = logging.getLogger(__name__)

DEFAULT_KERNEL = 5
ARM_RADIUS = 5
MIN_ARM_SEPARATION = 15.0
MAX_REDUCTION_STEPS = 10_000


class ArmAmbiguity(Schem2NetError):
    """Wires around a crossing cannot be paired unambiguously."""


class GroupCase(str, Enum):
    DANGLING = "Dangling"
    DIRECT = "Direct"
    ODD_EXCEPTION = "OddException"
    CROSSING = "Crossing"


@dataclass(frozen=True)
class Endpoint:
    component: str
    contact: PixelCoord
    angle: float


@dataclass(frozen=True)
class BinaryConnection:
    a: Endpoint
    b: Endpoint
    via: tuple[PixelCoord, ...] = ()


@dataclass(frozen=True, eq=False)
class Arm:
    """A wire leaving a blocked crossing; ``touched`` lists component ids."""

    pixels: np.ndarray
    touched: tuple[str, ...]
    angle: float


@dataclass
class ResolutionReport:
    connections: list[BinaryConnection] = field(default_factory=list)
    inserted_junctions: list[tuple[str, PixelCoord]] = field(default_factory=list)
    exceptions: list[tuple[int, str]] = field(default_factory=list)
    resolved_crossings: list[PixelCoord] = field(default_factory=list)
    junction_boxes: list[ComponentBox] = field(default_factory=list)


def classify_group(g: ConnectionGroup) -> GroupCase:
    n = g.size
    if n == 1:
        return GroupCase.DANGLING
    if n == 2:
        return GroupCase.DIRECT
    return GroupCase.ODD_EXCEPTION if n % 2 else GroupCase.CROSSING


# -- pixel-set helpers -------------------------------------------------------

def _to_mask(pixels: np.ndarray, pad: int = 0):
    """Crop mask of a pixel array plus its (row, col) origin."""
    lo = pixels.min(axis=0) - pad
    hi = pixels.max(axis=0) + pad + 1
    mask = np.zeros(tuple(hi - lo), dtype=bool)
    local = pixels - lo
    mask[local[:, 0], local[:, 1]] = True
    return mask, lo


def _components(pixels: np.ndarray, connectivity: int) -> list[np.ndarray]:
    """Connected pieces of a pixel set, each sorted row-major, ordered by first pixel."""
    if len(pixels) == 0:
        return []
    mask, lo = _to_mask(pixels)
    labels, count = ndimage.label(mask, structure=structure(connectivity))
    slices = ndimage.find_objects(labels)
    pieces = []
    for lab in range(1, count + 1):
        sl = slices[lab - 1]
        local = np.argwhere(labels[sl] == lab)
        pieces.append(local + lo + np.array([sl[0].start, sl[1].start]))
    pieces.sort(key=lambda p: tuple(p[0]))
    return pieces


def _holds(pixels: np.ndarray, p) -> bool:
    return bool(np.any((pixels[:, 0] == p[0]) & (pixels[:, 1] == p[1])))


def _box_sum(a: np.ndarray, kernel: int) -> np.ndarray:
    return ndimage.correlate(a, np.ones((kernel, kernel), dtype=a.dtype), mode="constant", cval=0)


def _check_kernel(kernel: int) -> None:
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError(f"kernel must be odd and >= 1, got {kernel}")


def window_counts(pixels: np.ndarray, kernel: int) -> np.ndarray:
    """Count of region pixels inside the kernel x kernel window at each pixel."""
    _check_kernel(kernel)
    mask, lo = _to_mask(pixels)
    counts = _box_sum(mask.astype(np.int64), kernel)
    local = pixels - lo
    return counts[local[:, 0], local[:, 1]]


def _mask_scores(mask: np.ndarray, kernel: int) -> tuple[np.ndarray, np.ndarray]:
    """Window counts on ``mask`` and, as tie-break, the windowed sum of those counts.

    Along a straight arm near a crossing every window holds the same number of
    pixels; summing the counts once more favors the pixel whose whole window
    sits on the densest ink, which for a thin crossing is its center.
    """
    counts = _box_sum(mask.astype(np.int64), kernel)
    counts[~mask] = 0
    return counts, _box_sum(counts, kernel)


def _densest(pixels: np.ndarray, kernel: int) -> tuple[int, np.ndarray]:
    """Index of the best pixel (most count, then most tie-break score, then smallest) and all counts."""
    _check_kernel(kernel)
    mask, lo = _to_mask(pixels)
    counts, second = _mask_scores(mask, kernel)
    local = pixels - lo
    c, s = counts[local[:, 0], local[:, 1]], second[local[:, 0], local[:, 1]]
    top = np.flatnonzero(c == c.max())
    # pixels are row-major, so argmax picks the smallest pixel among equal scores.
    return int(top[np.argmax(s[top])]), c


def locate_intersection(g, kernel: int = DEFAULT_KERNEL) -> PixelCoord:
    """Region pixel with the most region pixels in its kernel window.

    Equal counts are settled by the windowed sum of counts, then by the
    smallest (row, col).  Accepts a :class:`ConnectionGroup` or a raw (N, 2)
    pixel array (sorted row-major).
    """
    pixels = g.pixels if isinstance(g, ConnectionGroup) else _sorted(np.asarray(g))
    idx, _ = _densest(pixels, kernel)
    return PixelCoord(int(pixels[idx, 0]), int(pixels[idx, 1]))


def _sorted(pixels: np.ndarray) -> np.ndarray:
    return pixels[np.lexsort((pixels[:, 1], pixels[:, 0]))]


def blocking_rect(pixels: np.ndarray, kernel: int, connectivity: int = DEFAULT_CONNECTIVITY):
    """The located intersection and the rectangle cut out around it.

    The rectangle is the bounding box of the plateau of maximal window
    counts containing the argmax, grown by ``kernel // 2``; for a width-1
    crossing that is exactly the kernel x kernel square at the center.
    """
    idx, counts = _densest(pixels, kernel)
    center = PixelCoord(int(pixels[idx, 0]), int(pixels[idx, 1]))
    top = pixels[counts == counts[idx]]
    plateau = top
    for piece in _components(top, connectivity):
        if np.any((piece[:, 0] == center.row) & (piece[:, 1] == center.col)):
            plateau = piece
            break
    half = kernel // 2
    lo = plateau.min(axis=0) - half
    hi = plateau.max(axis=0) + half + 1
    return center, (int(lo[0]), int(lo[1]), int(hi[0]), int(hi[1]))


def _inside(pixels: np.ndarray, rect) -> np.ndarray:
    y0, x0, y1, x1 = rect
    r, c = pixels[:, 0], pixels[:, 1]
    return (r >= y0) & (r < y1) & (c >= x0) & (c < x1)


def _rect_gap(pixels: np.ndarray, rect) -> np.ndarray:
    """Chebyshev distance from each pixel to rect (0 inside)."""
    y0, x0, y1, x1 = rect
    r, c = pixels[:, 0], pixels[:, 1]
    dy = np.maximum(np.maximum(y0 - r, r - (y1 - 1)), 0)
    dx = np.maximum(np.maximum(x0 - c, c - (x1 - 1)), 0)
    return np.maximum(dy, dx)


def _angle_from(rect, pixels: np.ndarray) -> float:
    y0, x0, y1, x1 = rect
    cy, cx = (y0 + y1 - 1) / 2.0, (x0 + x1 - 1) / 2.0
    return math.degrees(math.atan2(cy - pixels[:, 0].mean(), pixels[:, 1].mean() - cx)) % 360.0


def _local_arms(rest: np.ndarray, rect, connectivity: int, radius: int = ARM_RADIUS):
    """Wires leaving rect, seen only within ``radius`` of it.

    Returns ``(anchor, angle)`` per arm, ordered by anchor; the anchor is the
    arm's smallest pixel touching the rect.  Looking locally keeps two arms
    apart even when the wires they start meet again far away.
    """
    gap = _rect_gap(rest, rect)
    arms = []
    for band in _components(rest[(gap >= 1) & (gap <= radius)], connectivity):
        ring = band[_rect_gap(band, rect) == 1]
        if len(ring):
            arms.append((PixelCoord(int(ring[0, 0]), int(ring[0, 1])), _angle_from(rect, band)))
    arms.sort()
    return arms


def pair_opposites(angles) -> list[tuple[int, int]]:
    """Pair each arm with the one half-way round the angle-sorted order.

    Returns index pairs into ``angles``.  Raises :class:`ArmAmbiguity` for an
    odd count or arms closer than 15 degrees.
    """
    n = len(angles)
    if n < 2 or n % 2:
        raise ArmAmbiguity(f"{n} arms cannot be paired")
    order = sorted(range(n), key=lambda i: (angles[i] % 360.0, i))
    for i in range(n):
        a, b = angles[order[i]], angles[order[(i + 1) % n]]
        if angle_distance(a, b) < MIN_ARM_SEPARATION:
            raise ArmAmbiguity(f"arms at {a:.1f} and {b:.1f} degrees are too close to pair")
    m = n // 2
    return [(order[i], order[i + m]) for i in range(m)]


def reroute_opposites(arms, center=None) -> list[BinaryConnection]:
    """Connect opposite arms of one crossing.

    ``arms`` is a sequence of ``(Endpoint, angle at center)``.  The crossing
    coordinate, if given, is recorded in each connection's ``via``.
    """
    arms = list(arms)
    if len(arms) < 4:
        raise ArmAmbiguity(f"a crossing needs at least four arms, got {len(arms)}")
    via = () if center is None else (PixelCoord(*center),)
    return [BinaryConnection(arms[i][0], arms[j][0], via)
            for i, j in pair_opposites([angle for _, angle in arms])]


def resolve_crossing(g: ConnectionGroup, center, kernel: int = DEFAULT_KERNEL, boxes=None,
                     connectivity: int = DEFAULT_CONNECTIVITY):
    """Cut the crossing at ``center`` out of ``g``.

    Returns ``(arms, reduced)``: the arms sorted by angle, and one
    :class:`ConnectionGroup` for each pair of opposite arms that together
    still reach more than two component contacts.  Such a pair is one
    rerouted wire that crosses something else further on, so it re-enters
    the reduction loop.  ``boxes`` is accepted for symmetry with
    :func:`resolve_all` and not needed here.  An arm reaching no component,
    an odd number of arms or arms too close to pair raise
    :class:`ArmAmbiguity`.
    """
    center = PixelCoord(*center)
    half = kernel // 2
    rect = (center.row - half, center.col - half, center.row + half + 1, center.col + half + 1)
    rest = g.pixels[~_inside(g.pixels, rect)]
    pieces = _components(rest, connectivity)
    arms, reach, anchors = [], [], []
    for pixel, angle in _local_arms(rest, rect, connectivity):
        piece = next(p for p in pieces if _holds(p, pixel))
        entries = tuple((cid, c) for cid, c in g.contacts if _holds(piece, c))
        if not entries:
            raise ArmAmbiguity("an arm of the crossing reaches no component")
        arms.append(Arm(piece, tuple(dict.fromkeys(cid for cid, _ in entries)), angle))
        reach.append(entries)
        anchors.append(pixel)
    if len(arms) % 2:
        raise ArmAmbiguity(f"crossing at {tuple(center)} has {len(arms)} arms")
    order = sorted(range(len(arms)), key=lambda i: arms[i].angle)
    arms = [arms[i] for i in order]
    reach = [reach[i] for i in order]
    anchors = [anchors[i] for i in order]
    reduced = []
    for i, j in pair_opposites([a.angle for a in arms]):
        entries = tuple(sorted(set(reach[i] + reach[j]), key=lambda t: (t[1], t[0])))
        if len(entries) <= 2:
            continue
        # A thin bridge across the cut keeps the rerouted wire one piece.
        pixels = np.unique(np.concatenate([arms[i].pixels, arms[j].pixels,
                                           _segment(anchors[i], anchors[j])]), axis=0)
        ids = tuple(dict.fromkeys(cid for cid, _ in entries))
        touched = tuple((cid, next(c for k, c in entries if k == cid)) for cid in ids)
        reduced.append(ConnectionGroup(g.region_id, pixels, touched, contacts=entries))
    return arms, reduced


def _segment(p, q) -> np.ndarray:
    """Pixels on the straight line from ``p`` to ``q``, both ends included."""
    n = max(abs(q[0] - p[0]), abs(q[1] - p[1])) + 1
    rows = np.rint(np.linspace(p[0], q[0], n)).astype(np.int64)
    cols = np.rint(np.linspace(p[1], q[1], n)).astype(np.int64)
    return np.stack([rows, cols], axis=1)


def geodesic_farthest(pixels: np.ndarray, start, connectivity: int = DEFAULT_CONNECTIVITY) -> PixelCoord:
    """Region pixel farthest from ``start`` along the region (BFS steps).

    Ties go to the smallest (row, col).
    """
    mask, lo = _to_mask(pixels)
    h, w = mask.shape
    dist = np.full(mask.shape, -1, dtype=np.int64)
    s = (start[0] - lo[0], start[1] - lo[1])
    dist[s] = 0
    queue = deque([s])
    steps = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)
             if (dr or dc) and (connectivity == 8 or not (dr and dc))]
    while queue:
        r, c = queue.popleft()
        d = dist[r, c] + 1
        for dr, dc in steps:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and dist[rr, cc] < 0:
                dist[rr, cc] = d
                queue.append((rr, cc))
    far = np.argwhere(dist == dist.max())[0]
    return PixelCoord(int(far[0] + lo[0]), int(far[1] + lo[1]))


def insert_dangling_junction(g: ConnectionGroup, component: ComponentBox, junction_id: str = "jx1",
                             connectivity: int = DEFAULT_CONNECTIVITY):
    """Terminate a one-sided wire with a synthetic junction at its far end.

    Returns the 3x3 junction box and the connection from ``component`` to it.
    """
    contact = g.contact_of(component.id)
    far = geodesic_farthest(g.pixels, contact, connectivity)
    junction = ComponentBox(junction_id, ComponentCategory.JUNCTION, Orientation.R0,
                            max(far.col - 1, 0), max(far.row - 1, 0), far.col + 2, far.row + 2)
    near_r, near_c = local_centroid(g.pixels, far, CONTACT_RADIUS)
    j_angle = junction.angle_to(near_r, near_c) if (near_r, near_c) != (far.row, far.col) else 0.0
    conn = BinaryConnection(
        Endpoint(component.id, contact, contact_angle(g, component)),
        Endpoint(junction_id, far, j_angle),
    )
    return junction, conn


def _plateau_cuts(mask, labels, pieces, kernel, connectivity):
    """Blocking rects for every maximal-count plateau of the given pieces.

    Plateaus are taken in row-major order of their smallest pixel; one whose
    rect overlaps an earlier rect waits for the next round.
    """
    counts, second = _mask_scores(mask, kernel)
    peak = np.zeros(labels.max() + 1, dtype=np.int64)
    np.maximum.at(peak, labels[mask], counts[mask])
    live = np.zeros_like(peak, dtype=bool)
    live[pieces] = True
    peak[~live] = 0
    top = mask & (peak[labels] > 0) & (counts == peak[labels])
    plateaus, n = ndimage.label(top, structure=structure(connectivity))
    if n == 0:
        return []
    # Center of each plateau: best tie-break score, then smallest pixel.
    flat = np.arange(top.size, dtype=np.int64).reshape(top.shape)
    key = second * top.size - flat
    centers = [tuple(int(v) for v in p) for p in
               ndimage.maximum_position(key, plateaus, range(1, n + 1))]
    where = np.flatnonzero(top)
    _, first = np.unique(plateaus.ravel()[where], return_index=True)
    firsts = [divmod(int(i), top.shape[1]) for i in where[first]]
    half = kernel // 2
    cuts = []
    for _, center, sl in sorted(zip(firsts, centers, ndimage.find_objects(plateaus))):
        rect = (sl[0].start - half, sl[1].start - half, sl[0].stop + half, sl[1].stop + half)
        if all(rect[0] >= o[2] or o[0] >= rect[2] or rect[1] >= o[3] or o[1] >= rect[3] for _, o in cuts):
            cuts.append((center, rect))
    return cuts


def _mask_arms(mask, rect, connectivity, radius: int = ARM_RADIUS):
    """Local ``(anchor, angle)`` arms of a rect already cleared from ``mask``."""
    y0, x0, y1, x1 = rect
    oy, ox = max(y0 - radius, 0), max(x0 - radius, 0)
    crop = mask[oy:y1 + radius, ox:x1 + radius]
    local = np.argwhere(crop) + (oy, ox)
    return _local_arms(local, rect, connectivity, radius)


def _reduce_crossing(g: ConnectionGroup, boxes, kernel: int, connectivity: int):
    """Reduce an even group to connections.

    The region is cut in rounds.  Each round labels the remaining wire
    pieces and finds the terminals on each: a component contact
    ``("c", index into g.contacts)`` or one arm of an already cut crossing
    ``("x", crossing index, arm index)``.  A piece with two terminals is a
    finished link; a piece with more is cut at every plateau of its densest
    window count.  Links are then chained through each crossing by pairing
    opposite arms.
    """
    _check_kernel(kernel)
    mask, lo = _to_mask(g.pixels, kernel + ARM_RADIUS)
    st = structure(connectivity)
    crossings = []  # (center, rect, arm angles)
    links = []
    anchor = {("c", k): (contact[0] - lo[0], contact[1] - lo[1])
              for k, (_, contact) in enumerate(g.contacts)}
    active = list(anchor)
    for _ in range(MAX_REDUCTION_STEPS):
        labels, n = ndimage.label(mask, structure=st)
        by_piece: dict[int, list] = {}
        for t in active:
            lab = int(labels[anchor[t]])
            if lab == 0:
                raise ArmAmbiguity("a crossing cut severs a terminal")
            by_piece.setdefault(lab, []).append(t)
        if len(by_piece) != n:
            raise ArmAmbiguity("a crossing cut isolates wire ink")
        if any(len(ts) < 2 for ts in by_piece.values()):
            raise ArmAmbiguity("a wire piece ends without reaching a terminal")
        links.extend(tuple(ts) for ts in by_piece.values() if len(ts) == 2)
        pending = sorted(lab for lab, ts in by_piece.items() if len(ts) > 2)
        if not pending:
            break
        mask &= np.isin(labels, pending)
        active = [t for lab in pending for t in by_piece[lab]]
        cuts = _plateau_cuts(mask, labels, pending, kernel, connectivity)
        for _, (y0, x0, y1, x1) in cuts:
            mask[max(y0, 0):y1, max(x0, 0):x1] = False
        for center, rect in cuts:
            arms = _mask_arms(mask, rect, connectivity)
            angles = [angle for _, angle in arms]
            pair_opposites(angles)
            x = len(crossings)
            crossings.append((PixelCoord(center[0] + int(lo[0]), center[1] + int(lo[1])), rect, angles))
            for i, (pixel, _) in enumerate(arms):
                anchor[("x", x, i)] = tuple(pixel)
                active.append(("x", x, i))
    else:
        raise ArmAmbiguity("crossing reduction did not terminate")

    partner: dict[tuple, tuple] = {}
    for a, b in links:
        if a in partner or b in partner or a == b:
            raise ArmAmbiguity("wire terminal used twice")
        partner[a] = b
        partner[b] = a
    through = {}
    for x, (_, _, angles) in enumerate(crossings):
        for i, j in pair_opposites(angles):
            through[("x", x, i)] = ("x", x, j)
            through[("x", x, j)] = ("x", x, i)

    chains = []
    seen = set()
    for k in range(len(g.contacts)):
        start = ("c", k)
        if start in seen:
            continue
        seen.add(start)
        via = []
        cur = partner[start]
        while cur[0] == "x":
            if cur in seen:
                raise ArmAmbiguity("crossing chain loops")
            seen.add(cur)
            if len(crossings[cur[1]][2]) >= 4:
                via.append(crossings[cur[1]][0])
            nxt = through[cur]
            seen.add(nxt)
            cur = partner[nxt]
        seen.add(cur)
        chains.append((k, cur[1], tuple(via)))
    if len(seen) != len(partner):
        raise ArmAmbiguity("closed wire loop through crossings")
    centers = [c for c, _, angles in crossings if len(angles) >= 4]
    return chains, centers


def _endpoint(g: ConnectionGroup, k: int, boxes) -> Endpoint:
    cid, contact = g.contacts[k]
    return Endpoint(cid, contact, contact_angle(g, boxes[cid], contact=contact))


def _junction_id(taken: set, n: int) -> str:
    while True:
        candidate = f"jx{n}"
        if candidate not in taken:
            return candidate
        n += 1


def resolve_all(groups, kernel: int = DEFAULT_KERNEL, boxes=None,
                connectivity: int = DEFAULT_CONNECTIVITY) -> ResolutionReport:
    """Apply case handling to every group of one schematic.

    ``boxes`` maps component id to :class:`ComponentBox` (a list is accepted
    too).  Exceptions are recorded in the report, never raised.
    """
    if boxes is None:
        boxes = {}
    elif not isinstance(boxes, dict):
        boxes = {b.id: b for b in boxes}
    report = ResolutionReport()
    taken = set(boxes)
    for g in sorted(groups, key=lambda g: g.region_id):
        case = classify_group(g)
        if case is GroupCase.DANGLING:
            jid = _junction_id(taken, len(report.inserted_junctions) + 1)
            taken.add(jid)
            (cid, _), = g.contacts
            junction, conn = insert_dangling_junction(g, boxes[cid], jid, connectivity)
            report.junction_boxes.append(junction)
            report.inserted_junctions.append((jid, conn.b.contact))
            report.connections.append(conn)
            continue
        if case is GroupCase.ODD_EXCEPTION:
            report.exceptions.append((g.region_id, "OddGroup"))
            continue
        if case is GroupCase.DIRECT:
            chains, centers = [(0, 1, ())], []
        else:
            try:
                chains, centers = _reduce_crossing(g, boxes, kernel, connectivity)
            except ArmAmbiguity:
                report.exceptions.append((g.region_id, "ArmAmbiguity"))
                continue
        looped = sorted({g.contacts[a][0] for a, b, _ in chains if g.contacts[a][0] == g.contacts[b][0]})
        if looped:
            log.warning("region %d wires %s back to itself", g.region_id, ", ".join(looped))
            report.exceptions.append((g.region_id, "SelfLoop"))
            continue
        for a, b, via in chains:
            report.connections.append(BinaryConnection(_endpoint(g, a, boxes), _endpoint(g, b, boxes), via))
        report.resolved_crossings.extend(centers)
    return report
