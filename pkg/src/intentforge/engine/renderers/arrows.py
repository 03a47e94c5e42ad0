"""Force field drawn as one arrow per cell."""

from __future__ import annotations

import numpy as np

from ..config import RenderConfig
from ..context import FigureContext


def render(ctx: FigureContext, data: dict, config: RenderConfig) -> None:
    """Render a force-field page.

    data fields:
        scene: Scene
        field: VectorField
        cmap: ndarray (optional)
        sources: list[Source] (optional)
        stride: int — every n-th cell per axis (default ``config.arrow_stride``)
        title: str (optional)
    """
    scene = data["scene"]
    field_ = data["field"]
    cmap = scene.cmap if data.get("cmap") is None else np.asarray(data["cmap"])
    stride = max(1, int(data.get("stride") or config.arrow_stride))

    ctx.start_page(scene.lattice)
    ctx.draw_mask(cmap)
    color = ctx.color("primary")
    h, w = scene.lattice.shape
    for y in range(0, h, stride):
        for x in range(0, w, stride):
            if cmap[y, x] > 0:
                ctx.draw_arrow((x, y), field_.at((x, y)), color)
    for src in data.get("sources") or []:
        ctx.draw_source(src)
    if data.get("title"):
        ctx.draw_label(data["title"])
    ctx.new_page()
