import numpy as np
from drawing import blank, box, hline, raster, vline
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import flood, halo_pixels

from schem2net.segment import segment_page, split_page, wire_pixels


def test_ink_inside_box_is_not_wire():
    ink = blank(20, 20)
    ink[5:10, 5:10] = True
    assert wire_pixels(raster(ink), [box("a", 5, 5, 10, 10)]) == frozenset()


def test_segment_outside_boxes():
    ink = hline(blank(20, 20), 3, 2, 11)
    assert wire_pixels(raster(ink), [box("a", 15, 15, 18, 18)]) == {(3, c) for c in range(2, 12)}


def test_segment_half_inside():
    ink = hline(blank(20, 20), 3, 0, 9)
    got = wire_pixels(raster(ink), [box("a", 0, 0, 5, 8)])
    assert got == {(3, c) for c in range(10) if not 0 <= c < 5}


def _ids(schematics):
    return [sorted(b.id for b in s.boxes) for s in schematics]


def test_wired_pair_and_isolated_box():
    ink = hline(blank(40, 60), 5, 10, 19)
    boxes = [box("A", 0, 0, 10, 10), box("B", 20, 0, 30, 10), box("C", 40, 30, 50, 40)]
    schematics = segment_page(raster(ink), boxes)
    assert _ids(schematics) == [["A", "B"], ["C"]]
    assert not schematics[1].ink_region.any()
    assert schematics[0].pixels() == {(5, c) for c in range(10, 20)}


def test_single_box_blank_page():
    (s,) = segment_page(raster(blank(20, 20)), [box("A", 2, 2, 6, 6)])
    assert [b.id for b in s.boxes] == ["A"]
    assert not s.ink_region.any()


def test_two_figures_on_one_page():
    ink = blank(60, 100)
    hline(ink, 10, 10, 19)
    hline(ink, 40, 70, 79)
    boxes = [box("a1", 0, 5, 10, 15), box("a2", 20, 5, 30, 15),
             box("b1", 60, 35, 70, 45), box("b2", 80, 35, 90, 45)]
    assert _ids(segment_page(raster(ink), boxes)) == [["a1", "a2"], ["b1", "b2"]]


def test_diagonal_contact_counts():
    ink = blank(20, 20)
    ink[10, 10] = True  # touches box A's corner diagonally
    vline(ink, 11, 11, 15)
    boxes = [box("A", 5, 5, 10, 10), box("B", 9, 16, 14, 19)]
    assert _ids(segment_page(raster(ink), boxes)) == [["A", "B"]]


def test_stray_ink_is_counted():
    ink = hline(blank(20, 20), 15, 10, 15)
    schematics, stray = split_page(raster(ink), [box("A", 0, 0, 4, 4)])
    assert stray == 1 and not schematics[0].ink_region.any()


# -- properties --------------------------------------------------------------

@st.composite
def pages(draw):
    h, w = 36, 36
    boxes = []
    for i, (gy, gx) in enumerate(draw(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)),
                                               unique=True, min_size=1, max_size=6))):
        boxes.append(box(f"b{i}", gx * 12 + 2, gy * 12 + 2, gx * 12 + 7, gy * 12 + 7))
    ink = np.array(draw(st.lists(st.lists(st.booleans(), min_size=w, max_size=w), min_size=h, max_size=h)))
    ink &= np.array(draw(st.lists(st.booleans(), min_size=h, max_size=h)))[:, None]
    return ink, boxes


def _oracle_groups(ink, boxes):
    wire = ink.copy()
    for b in boxes:
        wire[b.y0:b.y1, b.x0:b.x1] = False
    reach = {}
    for b in boxes:
        pix = set()
        for p in halo_pixels(b, ink.shape):
            pix |= flood(wire, p)
        reach[b.id] = pix
    # Boxes are linked when their reachable sets overlap.
    ids = [b.id for b in boxes]
    parent = {i: i for i in ids}

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i
    for i in ids:
        for j in ids:
            if reach[i] & reach[j]:
                parent[find(i)] = find(j)
    classes = {}
    for i in ids:
        classes.setdefault(find(i), set()).add(i)
    return {frozenset(c): set().union(*(reach[i] for i in c)) for c in classes.values()}


@settings(max_examples=40, deadline=None)
@given(pages())
def test_partition_matches_flood_fill(page):
    ink, boxes = page
    schematics = segment_page(raster(ink), boxes)
    got = {frozenset(b.id for b in s.boxes): set(s.pixels()) for s in schematics}
    assert got == _oracle_groups(ink, boxes)
    seen = np.zeros(ink.shape, dtype=int)
    for s in schematics:
        seen += s.ink_region
    assert seen.max(initial=0) <= 1


@settings(max_examples=30, deadline=None)
@given(pages(), st.randoms(use_true_random=False))
def test_box_order_does_not_matter(page, rnd):
    ink, boxes = page
    shuffled = list(boxes)
    rnd.shuffle(shuffled)
    a, b = segment_page(raster(ink), boxes), segment_page(raster(ink), shuffled)
    assert [s.boxes for s in a] == [s.boxes for s in b]
    assert all(np.array_equal(x.ink_region, y.ink_region) for x, y in zip(a, b))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(0, 3))
def test_bridge_pixel_merges(n, gap_at):
    # n boxes in a row joined by wires with one gap; filling the gap merges.
    ink = blank(20, 20 * n)
    boxes = [box(f"b{i}", 20 * i, 5, 20 * i + 8, 13) for i in range(n)]
    gap = gap_at % (n - 1)
    for i in range(n - 1):
        hline(ink, 9, 20 * i + 8, 20 * (i + 1) - 1)
    ink[9, 20 * gap + 13] = False
    before = segment_page(raster(ink), boxes)
    assert len(before) == 2
    ink[9, 20 * gap + 13] = True
    after = segment_page(raster(ink), boxes)
    assert len(after) == 1
    assert set(after[0].pixels()) >= set().union(*(s.pixels() for s in before))
