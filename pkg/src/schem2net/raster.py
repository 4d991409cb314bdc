"""Page images as immutable ink matrices.

Ink is dark-on-light: a sample is ink when it is strictly below the
threshold.  Color pages are reduced to luminance with the Rec. 601 weights
(what ``PIL.Image.convert("L")`` does) before thresholding.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image

from schem2net.errors import InvalidInput

DEFAULT_THRESHOLD = 128

# 8 follows "expand in all directions"; 4 is kept selectable for experiments.
DEFAULT_CONNECTIVITY = 8


class PixelCoord(NamedTuple):
    row: int
    col: int


def structure(connectivity: int = DEFAULT_CONNECTIVITY) -> np.ndarray:
    """Return the 3x3 structuring element for ``scipy.ndimage.label``."""
    if connectivity == 8:
        return np.ones((3, 3), dtype=bool)
    if connectivity == 4:
        return np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    raise InvalidInput(f"connectivity must be 4 or 8, got {connectivity}")


@dataclass(frozen=True, eq=False)
class BinaryRaster:
    """A height x width boolean ink matrix (True = ink).

    The wrapped array is made read-only on construction.
    """

    ink: np.ndarray

    def __post_init__(self):
        ink = np.array(self.ink, dtype=bool, copy=True)
        if ink.ndim != 2 or ink.shape[0] < 1 or ink.shape[1] < 1:
            raise InvalidInput(f"raster must be a non-empty 2D matrix, got shape {ink.shape}")
        ink.flags.writeable = False
        object.__setattr__(self, "ink", ink)

    @property
    def height(self) -> int:
        return self.ink.shape[0]

    @property
    def width(self) -> int:
        return self.ink.shape[1]

    def __eq__(self, other):
        if not isinstance(other, BinaryRaster):
            return NotImplemented
        return self.ink.shape == other.ink.shape and bool(np.array_equal(self.ink, other.ink))

    def __hash__(self):
        return hash((self.ink.shape, self.ink.tobytes()))

    def in_bounds(self, p) -> bool:
        return 0 <= p[0] < self.height and 0 <= p[1] < self.width

    def to_image(self) -> Image.Image:
        """Render as an 8-bit grayscale image, ink black on white."""
        return Image.fromarray(np.where(self.ink, 0, 255).astype(np.uint8), mode="L")


def _luminance(samples: np.ndarray) -> np.ndarray:
    if samples.ndim == 2:
        return samples
    if samples.ndim == 3 and samples.shape[2] in (3, 4):
        rgb = np.ascontiguousarray(samples[:, :, :3], dtype=np.uint8)
        return np.asarray(Image.fromarray(rgb, mode="RGB").convert("L"))
    raise InvalidInput(f"unsupported image shape {samples.shape}")


def binarize(image, threshold: int = DEFAULT_THRESHOLD) -> BinaryRaster:
    """Threshold an 8-bit image into a :class:`BinaryRaster`.

    A pixel becomes ink iff its (luminance) sample is ``< threshold``.
    """
    if not 0 <= threshold <= 255:
        raise InvalidInput(f"threshold must be in [0, 255], got {threshold}")
    samples = np.asarray(image)
    if samples.size == 0:
        raise InvalidInput("empty image")
    samples = _luminance(samples)
    return BinaryRaster(samples < threshold)


def load_image(path) -> np.ndarray:
    """Read a PNG or binary PGM (P5) page as an 8-bit luminance array."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.mode in ("1", "L", "P", "RGB", "RGBA", "LA", "I;16", "I"):
                gray = img.convert("L")
            else:
                raise InvalidInput(f"{path}: unsupported image mode {img.mode}")
            return np.asarray(gray, dtype=np.uint8).copy()
    except OSError as exc:
        raise InvalidInput(f"{path}: cannot read image ({exc})") from exc


def load_raster(path, threshold: int = DEFAULT_THRESHOLD) -> BinaryRaster:
    return binarize(load_image(path), threshold)


def neighbors(r: BinaryRaster, p, connectivity: int = DEFAULT_CONNECTIVITY) -> list[PixelCoord]:
    """In-bounds neighbors of ``p`` in row-major order."""
    if not r.in_bounds(p):
        raise InvalidInput(f"pixel {tuple(p)} outside {r.height}x{r.width} raster")
    row, col = p
    out = []
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            if connectivity == 4 and dr and dc:
                continue
            q = PixelCoord(row + dr, col + dc)
            if r.in_bounds(q):
                out.append(q)
    return out
