"""Feature-matrix -> colormap PNG conversion.

Values are min-max scaled to 256 color indices (round-half-up, constant
matrices map to index 0) and pushed through a fixed 256-entry RGB table
shipped with the package, so renders are bit-identical across platforms.
Images are laid out with time left-to-right and coefficient 0 at the
bottom row. Every colormap entry is a distinct RGB triple, which makes the
PNG round-trip lossless on the index matrix.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources

import numpy as np
from PIL import Image

from .errors import ArpaError
from .features import FeatureMatrix


class NonFiniteEntryError(ArpaError):
    """Matrix contains NaN or infinity; cannot be scaled to indices."""


@dataclass
class Colormap:
    table: np.ndarray  # (256, 3) uint8

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.uint8)
        if self.table.shape != (256, 3):
            raise ValueError("colormap must be 256 RGB triples")
        if tuple(self.table[0]) == tuple(self.table[-1]):
            raise ValueError("first and last colormap entries must differ")


@dataclass
class ColormapImage:
    width: int  # frames
    height: int  # coefficients
    pixels: np.ndarray  # (height, width, 3) uint8
    value_min: float
    value_max: float


def default_colormap() -> Colormap:
    text = resources.files("arpa.assets").joinpath("colormap_256.csv").read_text()
    rows = [line.split(",") for line in text.splitlines() if line and not line.startswith("#")]
    return Colormap(np.array(rows, dtype=np.uint8))


def to_color_indices(m: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Map entries to 0..255: idx(v) = round_half_up(255 (v - min) / (max - min))."""
    values = m.values if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise NonFiniteEntryError("matrix has non-finite entries")
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.zeros(values.shape, dtype=np.uint8)
    scaled = 255.0 * (values - lo) / (hi - lo)
    return np.floor(scaled + 0.5).astype(np.uint8)


def render_png(m: FeatureMatrix, cmap: Colormap | None = None, path=None) -> ColormapImage:
    """Render to an 8-bit RGB image; when path is given, write the PNG plus a
    {kind, F, C, value_min, value_max} JSON sidecar next to it."""
    cmap = cmap or default_colormap()
    indices = to_color_indices(m)
    f, c = indices.shape
    pixels = cmap.table[np.flipud(indices.T)]  # (frame f, coeff c) -> column f, row C-1-c
    image = ColormapImage(f, c, pixels, float(m.values.min()), float(m.values.max()))
    if path is not None:
        tmp = f"{path}.tmp"
        Image.fromarray(pixels, mode="RGB").save(tmp, format="PNG")
        os.replace(tmp, path)
        sidecar = {
            "kind": m.kind.name.lower(),
            "F": f,
            "C": c,
            "value_min": image.value_min,
            "value_max": image.value_max,
        }
        sidecar_tmp = f"{path}.json.tmp"
        with open(sidecar_tmp, "w") as fh:
            json.dump(sidecar, fh, sort_keys=True)
            fh.write("\n")
        os.replace(sidecar_tmp, f"{path}.json")
    return image


def decode_png_indices(path, cmap: Colormap | None = None) -> np.ndarray:
    """Invert render_png: read the PNG and map pixels back to the (F, C) index
    matrix. Possible because colormap entries are pairwise distinct."""
    cmap = cmap or default_colormap()
    pixels = np.asarray(Image.open(path).convert("RGB"))
    lookup = {tuple(rgb): i for i, rgb in enumerate(cmap.table)}
    flat = np.array([lookup[tuple(px)] for px in pixels.reshape(-1, 3)], dtype=np.uint8)
    by_row = flat.reshape(pixels.shape[0], pixels.shape[1])
    return np.flipud(by_row).T.copy()
