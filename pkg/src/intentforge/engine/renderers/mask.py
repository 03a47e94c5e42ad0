"""Constraint map with sources and ground-truth boxes."""

from __future__ import annotations

from ..config import RenderConfig
from ..context import FigureContext


def render(ctx: FigureContext, data: dict, config: RenderConfig) -> None:
    """Render an obstacle mask page.

    data fields:
        scene: Scene
        cmap: ndarray — overrides ``scene.cmap`` (optional)
        sources: list[Source] (optional)
        boxes: list[Box] — drawn as outlines (optional)
        title: str (optional)
    """
    scene = data["scene"]
    cmap = data.get("cmap")
    ctx.start_page(scene.lattice)
    ctx.draw_mask(scene.cmap if cmap is None else cmap)
    for box in data.get("boxes") or []:
        ctx.draw_box(box)
    for src in data.get("sources") or []:
        ctx.draw_source(src)
    if data.get("title"):
        ctx.draw_label(data["title"])
    ctx.new_page()
