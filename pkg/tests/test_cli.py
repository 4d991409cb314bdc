import json

import pytest
from drawing import raster, side_by_side
from PIL import Image

from schem2net.cli import collect_stats, main
from schem2net.schema import load_annotations, save_annotations
from schem2net.synth import SynthConfig, synthesize


def _page(tmp_path, configs, name="page"):
    parts = []
    for cfg in configs:
        r, annotation, _ = synthesize(cfg)
        parts.append((r, load_annotations(annotation)))
    ink, boxes = side_by_side(parts)
    image = tmp_path / f"{name}.png"
    raster(ink).to_image().save(image)
    ann = tmp_path / f"{name}.json"
    ann.write_bytes(save_annotations(boxes, image.name, ink.shape[1], ink.shape[0]))
    return image, ann


def _omitting_seed():
    for seed in range(50):
        cfg = SynthConfig(seed=seed, component_count=(3, 6), omit_junction_probability=1.0)
        if synthesize(cfg)[2].omitted_dots:
            return cfg
    raise AssertionError("no seed omits a dot")


def test_extract_two_clean_schematics(tmp_path, capsys):
    image, ann = _page(tmp_path, [SynthConfig(seed=1, component_count=(3, 6), crossing_probability=0),
                                  SynthConfig(seed=2, component_count=(3, 6), crossing_probability=0)])
    out = tmp_path / "out"
    assert main(["extract", str(image), str(ann), "--out", str(out), "--overlay"]) == 0
    assert sorted(p.name for p in out.glob("*.sp")) == ["page_s1.sp", "page_s2.sp"]
    assert json.loads((out / "exceptions.json").read_text()) == []
    assert (out / "page_overlay.png").is_file()
    assert (out / "page_s1.sp").read_text().splitlines()[0] == "page.png"
    assert "page_s2" in capsys.readouterr().out


def test_extract_flags_odd_group(tmp_path):
    image, ann = _page(tmp_path, [SynthConfig(seed=1, component_count=(3, 6), crossing_probability=0),
                                  _omitting_seed()])
    out = tmp_path / "out"
    assert main(["extract", str(image), str(ann), "--out", str(out)]) == 2
    assert [p.name for p in out.glob("*.sp")] == ["page_s1.sp"]
    entries = json.loads((out / "exceptions.json").read_text())
    assert entries and {e["schematic"] for e in entries} == {"page_s2"}
    assert {e["reason"] for e in entries} <= {"OddGroup", "ArmAmbiguity"}
    assert list(entries[0]) == ["schematic", "region", "reason", "pixels_bbox"]


def test_extract_missing_annotations(tmp_path, capsys):
    image, _ = _page(tmp_path, [SynthConfig(seed=1, component_count=(3, 4))])
    out = tmp_path / "out"
    assert main(["extract", str(image), str(tmp_path / "nope.json"), "--out", str(out)]) == 1
    assert not out.exists()
    assert "nope.json" in capsys.readouterr().err


def test_extract_size_mismatch(tmp_path):
    image, ann = _page(tmp_path, [SynthConfig(seed=1, component_count=(3, 4))])
    Image.open(image).crop((0, 0, 10, 10)).save(image)
    assert main(["extract", str(image), str(ann), "--out", str(tmp_path / "o")]) == 1


@pytest.mark.parametrize("flags", [["--kernel", "4"], ["--threshold", "300"], ["--jobs", "0"]])
def test_bad_flags(tmp_path, flags):
    image, ann = _page(tmp_path, [SynthConfig(seed=1, component_count=(3, 4))])
    assert main(["extract", str(image), str(ann), "--out", str(tmp_path / "o"), *flags]) == 1


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"count": 2, "seed": 5, "components": [3, 5]}))
    out = tmp_path / "c"
    assert main(["synth", "--config", str(cfg), "--seed", "9", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert [i["seed"] for i in manifest["instances"]] == [9, 10]
    assert manifest["config"]["components"] == [3, 5]


def test_synth_seed_sequence_and_rerun(tmp_path):
    args = ["synth", "--seed", "7", "--count", "3", "--components", "3", "8"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([*args, "--out", str(a)]) == 0
    assert main([*args, "--out", str(b)]) == 0
    manifest = json.loads((a / "manifest.json").read_text())
    assert [i["seed"] for i in manifest["instances"]] == [7, 8, 9]
    assert manifest["failed"] == []
    assert (a / "seed_000008.golden.sp").is_file()
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    assert all((a / f).read_bytes() == (b / f).read_bytes() for f in files)


def test_synth_zero_count(tmp_path):
    assert main(["synth", "--count", "0", "--out", str(tmp_path / "z")]) == 0
    manifest = json.loads((tmp_path / "z" / "manifest.json").read_text())
    assert manifest["instances"] == [] and manifest["failed"] == []


def test_synth_requires_out(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["synth", "--count", "1"]) == 1


def _verify(corpus, out):
    code = main(["verify", str(corpus / "manifest.json"), "--out", str(out)])
    return code, json.loads((out / "verify_report.json").read_text())


def test_verify_clean_corpus(tmp_path):
    corpus = tmp_path / "corpus"
    main(["synth", "--seed", "1", "--count", "5", "--components", "3", "12", "--out", str(corpus)])
    code, report = _verify(corpus, tmp_path / "v")
    assert code == 0 and report["passed"] == report["total"] == 5 and report["accuracy"] == 1.0


def test_verify_omission_corpus(tmp_path):
    corpus = tmp_path / "corpus"
    main(["synth", "--seed", "1", "--count", "5", "--components", "3", "12", "--omit", "1", "--out", str(corpus)])
    code, report = _verify(corpus, tmp_path / "v")
    assert code == 0 and report["passed"] == 5
    assert all("flagged" in r["detail"] for r in report["instances"])


def test_verify_detects_split_net(tmp_path):
    corpus = tmp_path / "corpus"
    main(["synth", "--seed", "1", "--count", "3", "--components", "4", "8", "--out", str(corpus)])
    golden = corpus / "seed_000002.golden.sp"
    lines = golden.read_text().splitlines()
    # Rename the first occurrence of one shared net: that net splits in two.
    counts = {}
    for line in lines[1:-1]:
        for tok in line.split()[1:3]:
            counts[tok] = counts.get(tok, 0) + 1
    shared = next(t for t, n in counts.items() if n > 1 and t.startswith("net"))
    for i, line in enumerate(lines[1:-1], start=1):
        toks = line.split()
        if shared in toks[1:]:
            toks[toks.index(shared)] = "split_off"
            lines[i] = " ".join(toks)
            break
    golden.write_text("\n".join(lines) + "\n")
    code, report = _verify(corpus, tmp_path / "v")
    assert code == 2
    assert [r["status"] for r in report["instances"]] == ["pass", "fail", "pass"]


def test_verify_missing_file(tmp_path):
    corpus = tmp_path / "corpus"
    main(["synth", "--seed", "1", "--count", "2", "--components", "3", "5", "--out", str(corpus)])
    (corpus / "seed_000001.png").unlink()
    code, report = _verify(corpus, tmp_path / "v")
    assert code == 2 and report["instances"][0]["status"] == "error"


def test_stats_counts(tmp_path, capsys):
    d = tmp_path / "nets"
    d.mkdir()
    (d / "a.sp").write_text("a\nMm1 a b c 0 NMOS W=1u L=1u\nMm2 a b c 0 NMOS W=1u L=1u\nRr1 a 0 1k\n.end\n")
    out = tmp_path / "s"
    assert main(["stats", str(d), "--out", str(out)]) == 0
    report = json.loads((out / "stats.json").read_text())
    assert {k: v for k, v in report["components"].items() if v} == {"nmos4": 2, "resistor": 1}
    assert report["component_total"] == 3 and report["schematics"] == 1
    assert report["nets_per_schematic"] == {"4": 1}
    assert (out / "stats.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert "nmos4" in capsys.readouterr().out


def test_stats_empty_directory(tmp_path):
    report = collect_stats(tmp_path)
    assert report["schematics"] == 0 and report["component_total"] == 0
    assert set(report["components"].values()) == {0}
    assert report["invalid"] == [] and report["exceptions"] == {}


def test_stats_skips_invalid_files(tmp_path):
    (tmp_path / "good.sp").write_text("g\nRr1 a 0 1k\n.end\n")
    (tmp_path / "bad.sp").write_text("b\nZz1 a 0\n.end\n")
    (tmp_path / "exceptions.json").write_text(json.dumps([{"reason": "OddGroup"}, {"reason": "OddGroup"}]))
    report = collect_stats(tmp_path)
    assert report["schematics"] == 1 and report["component_total"] == 1
    assert [e["file"] for e in report["invalid"]] == ["bad.sp"]
    assert report["exceptions"] == {"OddGroup": 2}


def test_stats_totals_match_parts(tmp_path):
    corpus = tmp_path / "corpus"
    main(["synth", "--seed", "3", "--count", "4", "--components", "3", "10", "--out", str(corpus)])
    report = collect_stats(corpus)
    assert report["schematics"] == 4
    assert report["component_total"] == sum(report["components"].values())
    assert sum(report["nets_per_schematic"].values()) == report["schematics"]
