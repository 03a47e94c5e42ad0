"""Grid of per-cluster mean feature maps: one column per cluster, one row per map."""

from __future__ import annotations

from ..clustering import MAP_NAMES
from ..config import RenderConfig
from ..context import FigureContext
from ..models import Lattice


def render(ctx: FigureContext, data: dict, config: RenderConfig) -> None:
    """data fields: clusters (SourceClusters), title (optional)."""
    means = data["clusters"].mean_maps()
    size = means[0].shape[-1] if means else 1
    step = size + 1
    ctx.start_page(Lattice(max(1, len(means) * step - 1), len(MAP_NAMES) * step - 1))
    for col, stack in enumerate(means):
        for row, values in enumerate(stack):
            ctx.draw_heat(values, offset=(col * step, row * step))
    if data.get("title"):
        ctx.draw_label(data["title"])
    ctx.new_page()
