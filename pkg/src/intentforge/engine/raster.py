"""Portable graymap/pixmap export through PyMuPDF pixmaps."""

from __future__ import annotations

import logging
from pathlib import Path

import fitz
import numpy as np

logger = logging.getLogger(__name__)


def to_gray(values: np.ndarray, vmax: float | None = None) -> np.ndarray:
    """Linear map of the finite range onto 0..255; non-finite cells become 0."""
    arr = np.asarray(values, dtype=float)
    finite = np.isfinite(arr)
    out = np.zeros(arr.shape, dtype=np.uint8)
    if not finite.any():
        return out
    lo = float(arr[finite].min())
    hi = float(arr[finite].max()) if vmax is None else float(vmax)
    span = hi - lo if hi > lo else 1.0
    scaled = np.clip((arr[finite] - lo) / span, 0.0, 1.0)
    out[finite] = np.round(scaled * 255).astype(np.uint8)
    return out


def upscale(gray: np.ndarray, cell_size: int) -> np.ndarray:
    """Each cell becomes a ``cell_size`` × ``cell_size`` block."""
    return np.repeat(np.repeat(gray, cell_size, axis=0), cell_size, axis=1)


def write_gray(gray: np.ndarray, path: str | Path) -> tuple[int, int]:
    """Write a uint8 (h, w) image; format follows the suffix (``.pgm``)."""
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    h, w = gray.shape
    pix = fitz.Pixmap(fitz.csGRAY, w, h, gray.tobytes(), 0)
    pix.save(str(path))
    return w, h


def array_to_pgm(
    values: np.ndarray, path: str | Path, cell_size: int = 1, vmax: float | None = None,
) -> tuple[int, int]:
    """Heatmap of a scalar lattice array; returns the raster (width, height)."""
    size = write_gray(upscale(to_gray(values, vmax), cell_size), path)
    logger.debug("wrote %s (%dx%d)", path, *size)
    return size


def mask_to_pgm(cmap: np.ndarray, path: str | Path, cell_size: int = 1) -> tuple[int, int]:
    """Walkable cells white, obstacles black."""
    gray = np.where(np.asarray(cmap) > 0, 255, 0).astype(np.uint8)
    size = write_gray(upscale(gray, cell_size), path)
    logger.debug("wrote mask %s (%dx%d)", path, *size)
    return size


def pdf_to_ppm(pdf_bytes: bytes, prefix: str | Path) -> list[Path]:
    """Rasterize every page at 72 dpi, one point per pixel.

    A single page is written to ``<prefix>.ppm``, several pages to
    ``<prefix>-01.ppm``, ``<prefix>-02.ppm`` ...
    """
    prefix = Path(prefix)
    written: list[Path] = []
    with fitz.open(stream=pdf_bytes, filetype="pdf") as doc:
        many = doc.page_count > 1
        for n, page in enumerate(doc, start=1):
            pix = page.get_pixmap(alpha=False)
            name = f"{prefix.name}-{n:02d}.ppm" if many else f"{prefix.name}.ppm"
            path = prefix.with_name(name)
            pix.save(str(path))
            written.append(path)
    logger.info("rasterized %d page(s) to %s*", len(written), prefix)
    return written
