"""FigureContext — lattice-aware drawing utilities wrapping a ReportLab canvas."""

from __future__ import annotations

import math

import numpy as np
from reportlab.lib.colors import Color, HexColor
from reportlab.pdfgen.canvas import Canvas

from .models import Cell, Lattice, Source

PALETTE: dict[str, str] = {
    "background": "#F7F4EF",
    "ink": "#111110",
    "obstacle": "#2E2A25",
    "muted": "#A09890",
    "accent": "#8A9E8C",
    "primary": "#1F4E79",
    "secondary": "#C0504D",
    "observed": "#1F4E79",
    "predicted": "#C0504D",
    "truth": "#8A9E8C",
    "source": "#D9A400",
    "heat_low": "#F7F4EF",
    "heat_high": "#8B1A1A",
}


def hex_to_color(hex_str: str) -> Color:
    """Convert a hex color string to a ReportLab Color."""
    return HexColor(hex_str)


def blend(low: Color, high: Color, t: float) -> Color:
    t = min(max(t, 0.0), 1.0)
    return Color(
        low.red + (high.red - low.red) * t,
        low.green + (high.green - low.green) * t,
        low.blue + (high.blue - low.blue) * t,
    )


class FigureContext:
    """Wraps a ReportLab canvas; one lattice cell is ``cell_size`` points.

    Cells use image orientation (y grows downward); conversion to
    ReportLab's bottom-left origin happens here.
    """

    def __init__(self, canvas: Canvas, cell_size: int = 8, palette: dict[str, str] | None = None) -> None:
        self.c = canvas
        self.cs = cell_size
        self.palette = dict(PALETTE)
        if palette:
            self.palette.update(palette)
        self.lattice = Lattice(1, 1)
        self._page_num = 0

    @property
    def page_num(self) -> int:
        return self._page_num

    @property
    def W(self) -> float:
        return self.lattice.width * self.cs

    @property
    def H(self) -> float:
        return self.lattice.height * self.cs

    # -- Colors ---------------------------------------------------------------

    def color(self, name: str) -> Color:
        return hex_to_color(self.palette.get(name, "#000000"))

    # -- Page management ------------------------------------------------------

    def start_page(self, lattice: Lattice, background: str | None = "background") -> None:
        """Size the page to ``lattice`` and optionally fill it. Increments page counter."""
        self._page_num += 1
        self.lattice = lattice
        self.c.setPageSize((self.W, self.H))
        if background:
            self.c.setFillColor(self.color(background))
            self.c.rect(0, 0, self.W, self.H, fill=1, stroke=0)

    def new_page(self) -> None:
        self.c.showPage()

    # -- Geometry -------------------------------------------------------------

    def cell_origin(self, cell: Cell) -> tuple[float, float]:
        """Bottom-left corner of ``cell`` in page points."""
        return cell[0] * self.cs, self.H - (cell[1] + 1) * self.cs

    def cell_center(self, cell) -> tuple[float, float]:
        return (cell[0] + 0.5) * self.cs, self.H - (cell[1] + 0.5) * self.cs

    # -- Cells ----------------------------------------------------------------

    def fill_cell(self, cell: Cell, color: Color) -> None:
        x, y = self.cell_origin(cell)
        self.c.setFillColor(color)
        self.c.rect(x, y, self.cs, self.cs, fill=1, stroke=0)

    def draw_mask(self, cmap: np.ndarray, color_name: str = "obstacle") -> None:
        color = self.color(color_name)
        for y, x in zip(*np.nonzero(cmap < 0)):
            self.fill_cell((int(x), int(y)), color)

    def draw_heat(self, values: np.ndarray, offset: Cell = (0, 0), vmax: float | None = None) -> None:
        """Cells shaded from ``heat_low`` to ``heat_high``; non-finite cells left blank."""
        arr = np.asarray(values, dtype=float)
        finite = np.isfinite(arr)
        if not finite.any():
            return
        lo = float(arr[finite].min())
        hi = float(arr[finite].max()) if vmax is None else vmax
        span = hi - lo if hi > lo else 1.0
        low, high = self.color("heat_low"), self.color("heat_high")
        for y, x in zip(*np.nonzero(finite)):
            t = (arr[y, x] - lo) / span
            self.fill_cell((int(x) + offset[0], int(y) + offset[1]), blend(low, high, t))

    # -- Vectors and paths ----------------------------------------------------

    def draw_arrow(self, cell: Cell, vec, color: Color, length: float = 0.8) -> None:
        """Unit-length arrow along ``vec`` from the cell centre; nothing for a zero vector."""
        norm = math.hypot(vec[0], vec[1])
        if norm == 0:
            return
        ux, uy = vec[0] / norm, -vec[1] / norm
        x0, y0 = self.cell_center(cell)
        half = length * self.cs / 2
        x1, y1 = x0 + ux * half, y0 + uy * half
        xs, ys = x0 - ux * half, y0 - uy * half
        self.c.setStrokeColor(color)
        self.c.setLineWidth(max(0.3, self.cs / 16))
        self.c.line(xs, ys, x1, y1)
        head = half * 0.5
        for turn in (2.6, -2.6):
            hx = ux * math.cos(turn) - uy * math.sin(turn)
            hy = ux * math.sin(turn) + uy * math.cos(turn)
            self.c.line(x1, y1, x1 + hx * head, y1 + hy * head)

    def draw_path(
        self,
        cells: list[Cell],
        color: Color,
        width: float = 1.0,
        dash: tuple[float, float] | None = None,
    ) -> None:
        if len(cells) < 2:
            if cells:
                self.draw_marker(cells[0], color, radius=width)
            return
        self.c.setStrokeColor(color)
        self.c.setLineWidth(width)
        if dash:
            self.c.setDash(*dash)
        p = self.c.beginPath()
        p.moveTo(*self.cell_center(cells[0]))
        for cell in cells[1:]:
            p.lineTo(*self.cell_center(cell))
        self.c.drawPath(p, stroke=1, fill=0)
        self.c.setDash()

    def draw_marker(self, cell, color: Color, radius: float | None = None) -> None:
        x, y = self.cell_center(cell)
        self.c.setFillColor(color)
        self.c.circle(x, y, radius or self.cs * 0.3, fill=1, stroke=0)

    def draw_source(self, source: Source, color_name: str = "source") -> None:
        """Marker at μ and the 2-sigma axis-aligned extent."""
        color = self.color(color_name)
        self.draw_marker(source.mu, color, radius=self.cs * 0.45)
        rx = 2 * math.sqrt(max(float(source.sigma[0, 0]), 0.0)) * self.cs
        ry = 2 * math.sqrt(max(float(source.sigma[1, 1]), 0.0)) * self.cs
        x, y = self.cell_center(source.mu)
        self.c.setStrokeColor(color)
        self.c.setLineWidth(0.75)
        self.c.ellipse(x - rx, y - ry, x + rx, y + ry, stroke=1, fill=0)

    def draw_box(self, box, color_name: str = "truth") -> None:
        x0, y0, x1, y1 = box
        left, bottom = self.cell_origin((x0, y1))
        self.c.setStrokeColor(self.color(color_name))
        self.c.setLineWidth(0.75)
        self.c.rect(left, bottom, (x1 - x0 + 1) * self.cs, (y1 - y0 + 1) * self.cs, fill=0, stroke=1)

    # -- Text -----------------------------------------------------------------

    def draw_label(self, text: str, cell: Cell = (0, 0), size: float | None = None) -> None:
        size = size or max(5.0, self.cs * 0.9)
        x, y = self.cell_origin(cell)
        self.c.setFont("Helvetica", size)
        self.c.setFillColor(self.color("ink"))
        self.c.drawString(x + 1, y + self.cs - size, text)
