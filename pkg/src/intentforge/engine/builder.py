"""FigureBuilder — assembles figure pages into one PDF."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field

from reportlab.pdfgen.canvas import Canvas

from .config import RenderConfig
from .context import FigureContext
from .renderers import arrows, clusters, heatmap, likelihood, mask, trajectories

logger = logging.getLogger(__name__)


RENDERERS: dict[str, object] = {
    "mask": mask,
    "heatmap": heatmap,
    "arrows": arrows,
    "trajectories": trajectories,
    "likelihood": likelihood,
    "clusters": clusters,
}


@dataclass
class FigureSpec:
    """One page: a renderer kind and the objects it draws."""

    kind: str
    data: dict = field(default_factory=dict)


@dataclass
class FigureDocument:
    title: str = ""
    pages: list[FigureSpec] = field(default_factory=list)
    palette: dict[str, str] = field(default_factory=dict)

    def add(self, kind: str, **data) -> FigureDocument:
        self.pages.append(FigureSpec(kind, data))
        return self


class FigureBuilder:
    """Generate a PDF from a FigureDocument."""

    def __init__(self, config: RenderConfig | None = None) -> None:
        self.config = config or RenderConfig()

    def build(self, document: FigureDocument) -> bytes:
        """Render every page, return PDF bytes (identical inputs give identical bytes)."""
        buf = io.BytesIO()
        c = Canvas(buf, invariant=1)

        title = document.title or self.config.title
        if title:
            c.setTitle(title)

        ctx = FigureContext(c, self.config.cell_size, document.palette)

        for spec in document.pages:
            renderer_mod = RENDERERS.get(spec.kind)
            if renderer_mod is None:
                raise ValueError(f"Unknown figure kind: {spec.kind!r}")
            renderer_mod.render(ctx, spec.data, self.config)

        c.save()
        logger.debug("built %d figure page(s)", ctx.page_num)
        return buf.getvalue()
