from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schem2net.errors import InvalidInput
from schem2net.netlist import Component, Net, Netlist, graph_equal
from schem2net.pipeline import extract_page
from schem2net.schema import ComponentCategory, angle_distance, load_annotations, pin_windows
from schem2net.segment import segment_page, wire_mask
from schem2net.synth import SynthConfig, netlist_connected, render, sample_netlist, synthesize
from schem2net.trace import find_groups

C = ComponentCategory


def test_config_validation():
    with pytest.raises(InvalidInput):
        SynthConfig(crossing_probability=1.5)
    with pytest.raises(InvalidInput):
        SynthConfig(line_width=(1, 4))
    with pytest.raises(InvalidInput):
        SynthConfig(line_width=3, pitch=11)
    with pytest.raises(InvalidInput):
        SynthConfig(seed=-1)
    assert SynthConfig(line_width=2).line_width == (2, 2)


def test_sampling_is_deterministic():
    cfg = SynthConfig(seed=42, component_count=(2, 2))
    a, b = sample_netlist(cfg), sample_netlist(cfg)
    assert a == b and len(a.components) == 2


def test_sampled_netlists_are_connected():
    for seed in range(1000):
        n = sample_netlist(SynthConfig(seed=seed, component_count=(3, 30)))
        assert 3 <= len(n.components) <= 30
        assert netlist_connected(n), seed
        # Every net joins two terminals, counting the ground and supply symbols.
        assert all(len(net.members) + (net.name in ("0", "VDD")) >= 2 for net in n.nets)
        # Exactly one ground: every net named "0" is the one ground net.
        assert sum(net.name == "0" for net in n.nets) == 1


def test_forced_stubs():
    for seed in range(30):
        _, _, layout = synthesize(SynthConfig(seed=seed, component_count=(3, 8), dangling_probability=1.0))
        assert layout.stub_nets
        by_name = {net.name: net for net in layout.netlist.nets}
        assert all(len(by_name[name].members) == 1 for name in layout.stub_nets)


def test_two_components_one_net():
    n = Netlist((Component("r1", C.RESISTOR), Component("r2", C.RESISTOR)),
                (Net("net1", {("r1", "t1"), ("r2", "t1")}), Net("0", {("r1", "t2"), ("r2", "t2")})), "two")
    raster, annotation, layout = render(SynthConfig(seed=3, line_width=1), n)
    boxes = load_annotations(annotation)
    device_ids = {b.id for b in boxes if b.category.is_device}
    assert device_ids == {"r1", "r2"}
    schematics = segment_page(raster, boxes)
    assert len(schematics) == 1
    groups = find_groups(raster, schematics[0])
    # Some region joins both resistors.
    assert any({"r1", "r2"} <= set(g.touched_ids()) for g in groups)


def test_forced_crossing():
    found = False
    for seed in range(20):
        n = sample_netlist(SynthConfig(seed=seed, component_count=(4, 4)))
        _, _, layout = render(SynthConfig(seed=seed, crossing_probability=1.0), n)
        if layout.crossing_points:
            found = True
            dots = set(map(tuple, layout.junction_dots))
            assert not dots & set(map(tuple, layout.crossing_points))
    assert found


def test_forced_omission_gives_odd_group():
    for seed in range(10):
        raster, annotation, layout = synthesize(SynthConfig(seed=seed, component_count=(3, 6),
                                                            omit_junction_probability=1.0))
        if not layout.omitted_dots:
            continue
        page = extract_page(raster, load_annotations(annotation))
        reasons = {reason for s in page.schematics for _, reason, _ in s.exceptions}
        assert reasons and reasons <= {"OddGroup", "ArmAmbiguity"}
        assert all(not s.ok for s in page.schematics)
        return
    pytest.fail("no instance had an omitted dot")


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**40))
def test_render_is_deterministic(seed):
    cfg = SynthConfig(seed=seed, component_count=(3, 12))
    r1, a1, l1 = synthesize(cfg)
    r2, a2, l2 = synthesize(cfg)
    assert r1 == r2 and a1 == a2 and l1.to_json() == l2.to_json()


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**40))
def test_layout_invariants(seed):
    cfg = SynthConfig(seed=seed, component_count=(3, 15))
    raster, annotation, layout = synthesize(cfg)
    boxes = {b.id: b for b in load_annotations(annotation)}
    pitch = layout.pitch
    # Every placement is annotated with its true category and orientation.
    for cid, (b, orientation) in layout.placements.items():
        assert boxes[cid] == b and b.orientation == orientation
    # Route segments are axis-aligned and run on grid lines.
    points = {}
    for name, segs in layout.routes.items():
        for a, b in segs:
            assert a[0] == b[0] or a[1] == b[1]
            for p in (a, b):
                assert p[0] % pitch == 0 and p[1] % pitch == 0
                points.setdefault(tuple(p), set()).add(name)
    # Grid nodes used by two nets are exactly the recorded crossings.
    cells = {}
    for name, segs in layout.routes.items():
        for a, b in segs:
            r0, r1 = sorted((a[0], b[0]))
            c0, c1 = sorted((a[1], b[1]))
            for r in range(r0, r1 + 1, pitch):
                for c in range(c0, c1 + 1, pitch):
                    cells.setdefault((r, c), set()).add(name)
    shared = {p for p, names in cells.items() if len(names) > 1}
    assert shared == set(map(tuple, layout.crossing_points))
    # Nodes where three or more same-net edges meet carry a dot (drawn or recorded as omitted).
    dotted = set(map(tuple, layout.junction_dots)) | set(map(tuple, layout.omitted_dots))
    for segs in layout.routes.values():
        edges = set()
        for a, b in segs:
            n = max(abs(b[0] - a[0]), abs(b[1] - a[1])) // pitch
            dr, dc = (b[0] - a[0]) // max(n, 1), (b[1] - a[1]) // max(n, 1)
            for i in range(n):
                p = (a[0] + i * dr, a[1] + i * dc)
                edges.add(frozenset([p, (p[0] + dr, p[1] + dc)]))
        degree = Counter(p for e in edges for p in e)
        assert {p for p, d in degree.items() if d >= 3} <= dotted
    # Every route end is a pin node: just outside a box, on one of its nominal pin angles.
    for segs in layout.routes.values():
        degree = Counter(tuple(p) for seg in segs for p in seg)
        for end in (p for p, d in degree.items() if d == 1):
            owners = [b for b in boxes.values() if b.category is not C.JUNCTION
                      and b.y0 - pitch <= end[0] < b.y1 + pitch and b.x0 - pitch <= end[1] < b.x1 + pitch
                      and not b.contains(*end)]
            assert any(angle_distance(b.angle_to(*end), w.angle) < 1e-9
                       for b in owners for w in pin_windows(b.category, b.orientation)), end
    assert wire_mask(raster, boxes.values()).any()


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**40))
def test_clean_render_round_trips(seed):
    cfg = SynthConfig(seed=seed, component_count=(3, 20), crossing_probability=0.0)
    raster, annotation, layout = synthesize(cfg)
    page = extract_page(raster, load_annotations(annotation))
    assert len(page.schematics) == 1 and page.schematics[0].ok
    assert graph_equal(page.schematics[0].netlist, layout.netlist)


def test_net_names_unique():
    for seed in range(50):
        n = sample_netlist(SynthConfig(seed=seed))
        names = [net.name for net in n.nets]
        assert len(names) == len(set(names))
        assert all(net.members for net in n.nets)
