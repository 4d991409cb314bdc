"""Command line: extract, synth, verify and stats.

Exit codes are 0 for success, 1 for operational errors and 2 when a run
completes but flags exceptions (or failed instances).  JSON reports keep a
fixed key order; tables go to standard output, diagnostics to standard error.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from schem2net import __version__
from schem2net.errors import RenderGiveUp, Schem2NetError
from schem2net.netlist import emit_spice, graph_equal, parse_spice
from schem2net.pipeline import extract_page, schematic_name
from schem2net.raster import binarize, load_image
from schem2net.resolve import DEFAULT_KERNEL
from schem2net.schema import ComponentCategory, load_annotation_document
from schem2net.synth import SynthConfig, synthesize

log = logging.getLogger("schem2net")

EXIT_OK, EXIT_ERROR, EXIT_EXCEPTIONS = 0, 1, 2

RUN_DEFAULTS = {"out": ".", "kernel": DEFAULT_KERNEL, "threshold": 128, "connectivity": 8,
                "overlay": False, "jobs": 1}
SYNTH_DEFAULTS = {"seed": 0, "count": 1, "components": [3, 30], "crossing": 0.4, "omit": 0.0,
                  "dangling": 0.0, "line_width": [1, 3], "pitch": 12}


class UsageError(Exception):
    """Bad flags or configuration; reported with exit code 1."""


@dataclass(frozen=True)
class RunConfig:
    out: str = "."
    kernel: int = DEFAULT_KERNEL
    threshold: int = 128
    connectivity: int = 8
    overlay: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise UsageError(f"--kernel must be odd and >= 1, got {self.kernel}")
        if not 0 <= self.threshold <= 255:
            raise UsageError(f"--threshold must be in 0..255, got {self.threshold}")
        if self.connectivity not in (4, 8):
            raise UsageError(f"--connectivity must be 4 or 8, got {self.connectivity}")
        if self.jobs < 1:
            raise UsageError(f"--jobs must be >= 1, got {self.jobs}")


# -- helpers -------------------------------------------------------------------

def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _parallel_map(fn, items, jobs: int) -> list:
    """Order-preserving map, in worker processes when ``jobs`` > 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def _merged(args, defaults: dict) -> dict:
    """Flag values over config-file values over defaults."""
    config = {}
    if getattr(args, "config", None):
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise UsageError(f"config {args.config} must hold a JSON object")
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else config.get(key, default)
    return out


def _run_config(args) -> RunConfig:
    values = _merged(args, RUN_DEFAULTS)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise UsageError(str(exc)) from None


def _write(out: Path, name: str, data) -> None:
    path = out / name
    if isinstance(data, str):
        path.write_text(data, encoding="utf-8", newline="\n")
    else:
        path.write_bytes(data)


def _png(raster) -> bytes:
    buf = io.BytesIO()
    raster.to_image().save(buf, format="PNG")
    return buf.getvalue()


def _table(header, rows) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(line, widths)).rstrip()
             for line in [header, *rows]]
    return "\n".join(lines)


# -- extract -------------------------------------------------------------------

def _extract_one(job):
    image_path, ann_bytes, cfg = job
    raster = binarize(load_image(image_path), cfg.threshold)
    doc = load_annotation_document(ann_bytes)
    if (doc.page_width, doc.page_height) != (raster.width, raster.height):
        raise Schem2NetError(f"{image_path}: annotations describe a {doc.page_width}x{doc.page_height} "
                             f"page, image is {raster.width}x{raster.height}")
    page = extract_page(raster, doc.boxes, Path(image_path).name, cfg.kernel, cfg.connectivity)
    schematics = []
    for res in page.schematics:
        name = schematic_name(page.image, res.index)
        spice = emit_spice(res.netlist) if res.ok else None
        n_dev = sum(1 for b in res.schematic.boxes if b.category.is_device)
        n_nets = len(res.netlist.nets) if res.ok else None
        schematics.append((name, spice, res.exceptions, n_dev, n_nets))
    overlay = None
    if cfg.overlay:
        from schem2net.plotting import overlay_png
        overlay = overlay_png(raster, page)
    return schematics, page.stray_regions, overlay


def cmd_extract(args) -> int:
    cfg = _run_config(args)
    paths = args.inputs
    if len(paths) % 2:
        raise UsageError("extract takes IMAGE ANNOTATIONS pairs")
    pairs = list(zip(paths[0::2], paths[1::2]))
    stems = [Path(img).stem for img, _ in pairs]
    if len(set(stems)) != len(stems):
        raise UsageError("two input images share a file stem; outputs would collide")

    # Read and check everything before any output exists.
    jobs = []
    for img, ann in pairs:
        if not Path(img).is_file():
            raise Schem2NetError(f"image not found: {img}")
        try:
            ann_bytes = Path(ann).read_bytes()
        except OSError as exc:
            raise Schem2NetError(f"cannot read annotations {ann}: {exc.strerror}") from None
        load_annotation_document(ann_bytes)
        jobs.append((img, ann_bytes, cfg))
    results = _parallel_map(_extract_one, jobs, cfg.jobs)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    exceptions, rows = [], []
    for (img, _), (schematics, stray, overlay) in zip(pairs, results):
        if stray:
            log.warning("%s: %d ink region(s) touch no box and were dropped", img, stray)
        for name, spice, excs, n_dev, n_nets in schematics:
            if spice is not None:
                _write(out, f"{name}.sp", spice)
                rows.append((name, "ok", n_dev, n_nets))
            else:
                rows.append((name, "exception", n_dev, "-"))
            for region, reason, bbox in excs:
                exceptions.append({"schematic": name, "region": region, "reason": reason,
                                   "pixels_bbox": list(bbox)})
        if overlay is not None:
            _write(out, f"{Path(img).stem}_overlay.png", overlay)
    _write(out, "exceptions.json", _dump_json(exceptions))
    print(_table(("schematic", "status", "devices", "nets"), rows))
    return EXIT_EXCEPTIONS if exceptions else EXIT_OK


# -- synth ---------------------------------------------------------------------

def _synth_one(job):
    seed, cfg = job
    try:
        raster, annotation, layout = synthesize(cfg.with_seed(seed))
    except RenderGiveUp as exc:
        return seed, None, str(exc)
    return seed, (_png(raster), annotation, emit_spice(layout.netlist), _dump_json(layout.to_json())), None


def _synth_config(values) -> SynthConfig:
    try:
        return SynthConfig(
            seed=values["seed"], component_count=tuple(values["components"]),
            crossing_probability=values["crossing"], omit_junction_probability=values["omit"],
            dangling_probability=values["dangling"], line_width=tuple(values["line_width"]),
            pitch=values["pitch"])
    except (Schem2NetError, TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def cmd_synth(args) -> int:
    values = _merged(args, SYNTH_DEFAULTS)
    run = _run_config(args)
    cfg = _synth_config(values)
    count = values["count"]
    if count < 0:
        raise UsageError("--count must be >= 0")
    if _merged(args, {"out": None})["out"] is None:
        raise UsageError("synth needs --out")
    out = Path(run.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = range(cfg.seed, cfg.seed + count)
    instances, failed = [], []
    for seed, files, err in _parallel_map(_synth_one, [(s, cfg) for s in seeds], run.jobs):
        if files is None:
            failed.append({"seed": seed, "reason": err})
            log.warning("seed %d: %s", seed, err)
            continue
        stem = f"seed_{seed:06d}"
        names = {"image": f"{stem}.png", "annotations": f"{stem}.boxes.json",
                 "golden": f"{stem}.golden.sp", "layout": f"{stem}.layout.json"}
        for key, data in zip(("image", "annotations", "golden", "layout"), files):
            _write(out, names[key], data)
        instances.append({"seed": seed, **names})
    manifest = {
        "config": {"seed": cfg.seed, "count": count, "components": list(cfg.component_count),
                   "crossing": cfg.crossing_probability, "omit": cfg.omit_junction_probability,
                   "dangling": cfg.dangling_probability, "line_width": list(cfg.line_width),
                   "pitch": cfg.pitch},
        "instances": instances,
        "failed": failed,
    }
    _write(out, "manifest.json", _dump_json(manifest))
    print(f"rendered {len(instances)} of {count} instances into {out}")
    return EXIT_EXCEPTIONS if failed else EXIT_OK


# -- verify --------------------------------------------------------------------

def _verify_one(job):
    base, inst, cfg = job
    seed = inst.get("seed")
    try:
        raster = binarize(load_image(base / inst["image"]), cfg.threshold)
        doc = load_annotation_document((base / inst["annotations"]).read_bytes())
        golden = parse_spice((base / inst["golden"]).read_text(encoding="utf-8"))
        layout = json.loads((base / inst["layout"]).read_text(encoding="utf-8"))
    except (OSError, KeyError, ValueError, Schem2NetError) as exc:
        return {"seed": seed, "status": "error", "detail": f"{type(exc).__name__}: {exc}"}
    page = extract_page(raster, doc.boxes, doc.image, cfg.kernel, cfg.connectivity)
    flagged = sorted({e[1] for res in page.schematics for e in res.exceptions})
    if layout.get("omitted_dots"):
        ok = bool(flagged)
        detail = f"omitted junction flagged as {', '.join(flagged)}" if ok else "omitted junction not flagged"
    elif flagged:
        ok, detail = False, f"unexpected exceptions: {', '.join(flagged)}"
    elif len(page.schematics) != 1:
        ok, detail = False, f"expected one schematic, found {len(page.schematics)}"
    else:
        ok = graph_equal(page.schematics[0].netlist, golden)
        detail = "netlist matches" if ok else "netlist differs from golden"
    return {"seed": seed, "status": "pass" if ok else "fail", "detail": detail}


def cmd_verify(args) -> int:
    cfg = _run_config(args)
    manifest_path = Path(args.manifest)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        instances = manifest["instances"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise Schem2NetError(f"cannot read manifest {manifest_path}: {exc}") from None
    base = manifest_path.parent
    results = _parallel_map(_verify_one, [(base, inst, cfg) for inst in instances], cfg.jobs)
    passed = sum(r["status"] == "pass" for r in results)
    total = len(results)
    report = {"total": total, "passed": passed,
              "accuracy": round(passed / total, 6) if total else 1.0,
              "instances": results}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out, "verify_report.json", _dump_json(report))
    rows = [(r["seed"], r["status"], r["detail"]) for r in results if r["status"] != "pass"]
    if rows:
        print(_table(("seed", "status", "detail"), rows))
    print(f"passed {passed}/{total} ({100.0 * report['accuracy']:.1f}%)")
    return EXIT_OK if passed == total else EXIT_EXCEPTIONS


# -- stats ---------------------------------------------------------------------

def collect_stats(directory: Path) -> dict:
    """Counts over every ``.sp`` file in ``directory`` (not recursive).

    Files that do not parse are listed under ``invalid`` and left out of the
    totals.  Exception reasons come from an ``exceptions.json`` in the same
    directory, when present.
    """
    components = {c.value: 0 for c in ComponentCategory if c.is_device}
    nets_hist: Counter = Counter()
    invalid = []
    schematics = 0
    for path in sorted(directory.glob("*.sp")):
        try:
            n = parse_spice(path.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, Schem2NetError) as exc:
            invalid.append({"file": path.name, "error": str(exc)})
            continue
        schematics += 1
        for comp in n.components:
            components[comp.category.value] += 1
        nets_hist[len(n.nets)] += 1
    reasons: Counter = Counter()
    exc_path = directory / "exceptions.json"
    if exc_path.is_file():
        try:
            entries = json.loads(exc_path.read_text(encoding="utf-8"))
            reasons.update(e["reason"] for e in entries)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            invalid.append({"file": exc_path.name, "error": str(exc)})
    return {
        "schematics": schematics,
        "component_total": sum(components.values()),
        "components": components,
        "nets_per_schematic": {str(k): nets_hist[k] for k in sorted(nets_hist)},
        "exceptions": {k: reasons[k] for k in sorted(reasons)},
        "invalid": invalid,
    }


def cmd_stats(args) -> int:
    from schem2net.plotting import stats_png

    directory = Path(args.directory)
    if not directory.is_dir():
        raise Schem2NetError(f"not a directory: {directory}")
    out = Path(_merged(args, {"out": "."})["out"])
    report = collect_stats(directory)
    out.mkdir(parents=True, exist_ok=True)
    _write(out, "stats.json", _dump_json(report))
    _write(out, "stats.png", stats_png(report))
    rows = [(cat, n) for cat, n in report["components"].items() if n]
    rows.append(("total", report["component_total"]))
    print(_table(("category", "count"), rows))
    print(f"{report['schematics']} netlists, {len(report['invalid'])} invalid file(s)")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def _run_flags(p: argparse.ArgumentParser, overlay: bool = False) -> None:
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("--kernel", type=int, help=f"crossing window size, odd (default {DEFAULT_KERNEL})")
    p.add_argument("--threshold", type=int, help="ink threshold on 0..255 luminance (default 128)")
    p.add_argument("--connectivity", type=int, choices=(4, 8), help="pixel connectivity (default 8)")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--config", help="JSON file of option defaults; flags take precedence")
    if overlay:
        p.add_argument("--overlay", action="store_const", const=True,
                       help="also write <stem>_overlay.png per page")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schem2net",
                                     description="Schematic image plus component boxes to SPICE netlists.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract netlists from IMAGE ANNOTATIONS pairs")
    p.add_argument("inputs", nargs="+", metavar="PATH", help="IMAGE ANNOTATIONS [IMAGE ANNOTATIONS ...]")
    _run_flags(p, overlay=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", help="render a seeded synthetic corpus")
    p.add_argument("--seed", type=int, help="first seed (default 0)")
    p.add_argument("--count", type=int, help="number of instances (default 1)")
    p.add_argument("--components", type=int, nargs=2, metavar=("LO", "HI"),
                   help="device count range (default 3 30)")
    p.add_argument("--crossing", type=float, help="per-net crossing probability (default 0.4)")
    p.add_argument("--omit", type=float, help="junction dot omission probability (default 0)")
    p.add_argument("--dangling", type=float, help="stub net probability (default 0)")
    p.add_argument("--line-width", dest="line_width", type=int, nargs=2, metavar=("LO", "HI"),
                   help="line width range in pixels (default 1 3)")
    p.add_argument("--pitch", type=int, help="routing grid pitch in pixels (default 12)")
    _run_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("verify", help="round-trip a synthetic corpus against its golden netlists")
    p.add_argument("manifest", help="manifest.json written by synth")
    _run_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stats", help="summarize a directory of netlists")
    p.add_argument("directory")
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("--config", help="JSON file of option defaults; flags take precedence")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, Schem2NetError, OSError) as exc:
        print(f"schem2net {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


