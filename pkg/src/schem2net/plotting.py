"""Figures written by the command line: extraction overlays and corpus statistics."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402

# Fixed metadata keeps repeated runs byte-identical.
_PNG_META = {"Software": None}


def _png_bytes(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", metadata=_PNG_META)
    plt.close(fig)
    return buf.getvalue()


def overlay_png(raster, page) -> bytes:
    """Page with each schematic's wire ink tinted, boxes outlined and crossings marked.

    ``page`` is a :class:`~schem2net.pipeline.PageResult`.  Schematics that
    ended as exceptions are drawn in red.
    """
    h, w = raster.ink.shape
    rgb = np.ones((h, w, 3))
    rgb[raster.ink] = 0.0
    palette = plt.get_cmap("tab10")
    dpi = 100
    fig = plt.figure(figsize=(max(w, 64) / dpi, max(h, 64) / dpi), dpi=dpi)
    ax = fig.add_axes([0, 0, 1, 1])
    for k, res in enumerate(page.schematics):
        color = (0.85, 0.1, 0.1) if not res.ok else palette(k % 10)[:3]
        rgb[res.schematic.ink_region] = color
    ax.imshow(rgb, interpolation="nearest")
    for k, res in enumerate(page.schematics):
        edge = "red" if not res.ok else palette(k % 10)
        for b in res.schematic.boxes:
            ax.add_patch(Rectangle((b.x0 - 0.5, b.y0 - 0.5), b.x1 - b.x0, b.y1 - b.y0,
                                   fill=False, edgecolor=edge, linewidth=0.8))
        for j in res.report.junction_boxes:
            ax.add_patch(Rectangle((j.x0 - 0.5, j.y0 - 0.5), j.x1 - j.x0, j.y1 - j.y0,
                                   fill=False, edgecolor="magenta", linewidth=0.8))
        if res.report.resolved_crossings:
            pts = np.array(res.report.resolved_crossings)
            ax.plot(pts[:, 1], pts[:, 0], "x", color="black", markersize=4)
    ax.set_xlim(-0.5, w - 0.5)
    ax.set_ylim(h - 0.5, -0.5)
    ax.axis("off")
    return _png_bytes(fig)


def stats_png(report: dict) -> bytes:
    """Bar chart of component counts per category next to the nets-per-schematic histogram."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4), dpi=100)
    cats = [c for c, n in report["components"].items() if n]
    counts = [report["components"][c] for c in cats]
    left.barh(cats[::-1], counts[::-1], color="tab:blue")
    for y, n in enumerate(counts[::-1]):
        left.text(n, y, f" {n}", va="center", fontsize=8)
    left.set_xlabel("components")
    left.set_title(f"{report['component_total']} components in {report['schematics']} netlists")

    hist = report["nets_per_schematic"]
    xs = [int(k) for k in hist]
    right.bar(xs, [hist[k] for k in hist], width=0.8, color="tab:orange")
    right.set_xlabel("nets per netlist")
    right.set_ylabel("netlists")
    right.set_title("net count distribution")
    right.xaxis.set_major_locator(MaxNLocator(integer=True))
    right.yaxis.set_major_locator(MaxNLocator(integer=True))
    fig.tight_layout()
    return _png_bytes(fig)
