import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from schem2net.errors import AnnotationConflict, ParseError
from schem2net.schema import (
    ComponentBox,
    ComponentCategory,
    Orientation,
    angle_distance,
    load_annotations,
    pin_windows,
    save_annotations,
)

C = ComponentCategory


def _doc(*boxes, width=100, height=100):
    return json.dumps({"image": "p.png", "page_width": width, "page_height": height, "boxes": list(boxes)})


def _rec(cid="m1", category="nmos4", x0=10, y0=10, x1=50, y1=70, orientation="R0"):
    return {"id": cid, "category": category, "orientation": orientation,
            "x0": x0, "y0": y0, "x1": x1, "y1": y1}


def test_role_lists():
    assert C.NMOS4.roles == C.PMOS4.roles == ("drain", "gate", "source", "body")
    assert C.NMOS3.roles == C.PMOS3.roles == ("drain", "gate", "source")
    assert C.NPN.roles == C.PNP.roles == ("collector", "base", "emitter")
    for c in (C.RESISTOR, C.CAPACITOR, C.INDUCTOR, C.VSOURCE, C.ISOURCE):
        assert c.roles == ("t1", "t2")
    assert C.DIODE.roles == ("anode", "cathode")
    for c in (C.GND, C.VDD, C.PORT, C.JUNCTION):
        assert c.roles == ("t1",)
    assert {c for c in C if c.symmetric} == {C.RESISTOR, C.CAPACITOR, C.INDUCTOR}


def test_load_single_box():
    (b,) = load_annotations(_doc(_rec()))
    assert b == ComponentBox("m1", C.NMOS4, Orientation.R0, 10, 10, 50, 70)


def test_overlapping_boxes_conflict():
    with pytest.raises(AnnotationConflict):
        load_annotations(_doc(_rec("a"), _rec("b", x0=40, y0=60, x1=60, y1=80)))


def test_touching_boxes_are_fine():
    assert len(load_annotations(_doc(_rec("a"), _rec("b", x0=50, x1=60)))) == 2


def test_unknown_category_names_record():
    with pytest.raises(ParseError, match="m1"):
        load_annotations(_doc(_rec(category="nmoss")))


@pytest.mark.parametrize("bad", [
    "not json",
    json.dumps([1]),
    _doc(_rec(orientation="R45")),
    _doc(_rec(x0=60)),
    _doc(_rec(x1=101)),
    _doc(_rec(x0=1.5)),
    _doc(_rec("a"), _rec("a", x0=60, x1=70)),
    _doc({**_rec(), "extra": 1}),
])
def test_malformed_documents(bad):
    with pytest.raises(ParseError):
        load_annotations(bad)


def _nominal(category, orientation):
    return {w.role: w.angle for w in pin_windows(category, orientation)}


def test_nmos4_windows():
    ws = pin_windows("nmos4", "R0")
    assert _nominal("nmos4", "R0") == {"drain": 90, "gate": 180, "source": 270, "body": 0}
    assert all(w.half_width == 44 for w in ws)
    assert _nominal("nmos4", "R180") == {"drain": 270, "gate": 0, "source": 90, "body": 180}


def test_resistor_windows():
    assert _nominal("resistor", "R0") == {"t1": 90, "t2": 270}


def test_windows_are_disjoint_by_brute_force():
    for category in C:
        for orientation in Orientation:
            ws = pin_windows(category, orientation)
            for deg in range(360):
                hits = [w.role for w in ws if angle_distance(deg, w.angle) <= w.half_width]
                assert len(hits) <= 1, (category, orientation, deg, hits)


def test_rotation_and_mirror_arithmetic():
    for category in C:
        r0 = _nominal(category, "R0")
        for q in range(4):
            rot = _nominal(category, f"R{90 * q}")
            mir = _nominal(category, f"MR{90 * q}")
            for role, a in r0.items():
                assert rot[role] == (a + 90 * q) % 360
                assert mir[role] == ((180 - a) + 90 * q) % 360


@given(st.sampled_from(list(Orientation)), st.sampled_from(list(Orientation)), st.floats(0, 359))
def test_orientation_compose(a, b, angle):
    assert a.compose(b).apply(angle) == pytest.approx(a.apply(b.apply(angle)) % 360.0, abs=1e-9)


@st.composite
def box_lists(draw):
    # Boxes on a grid of 20 px cells cannot overlap.
    cells = draw(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), unique=True, max_size=8))
    out = []
    for i, (gy, gx) in enumerate(cells):
        w = draw(st.integers(1, 20))
        h = draw(st.integers(1, 20))
        out.append(ComponentBox(f"b{i}", draw(st.sampled_from(list(C))), draw(st.sampled_from(list(Orientation))),
                                gx * 20, gy * 20, gx * 20 + w, gy * 20 + h))
    return out


@given(box_lists())
def test_save_load_round_trip(boxes):
    assert load_annotations(save_annotations(boxes, "p.png", 100, 100)) == boxes
