"""Scalar lattice array as a shaded heatmap."""

from __future__ import annotations

import numpy as np

from ..config import RenderConfig
from ..context import FigureContext
from ..models import Lattice


def render(ctx: FigureContext, data: dict, config: RenderConfig) -> None:
    """data fields: values (h, w), cmap (optional), vmax (optional), title (optional)."""
    values = np.asarray(data["values"], dtype=float)
    h, w = values.shape
    ctx.start_page(Lattice(w, h))
    ctx.draw_heat(values, vmax=data.get("vmax"))
    if data.get("cmap") is not None:
        ctx.draw_mask(data["cmap"])
    if data.get("title"):
        ctx.draw_label(data["title"])
    ctx.new_page()
