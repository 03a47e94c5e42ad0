"""Observed prefixes, predicted futures and (optionally) true futures."""

from __future__ import annotations

from ..config import RenderConfig
from ..context import FigureContext


def render(ctx: FigureContext, data: dict, config: RenderConfig) -> None:
    """Render a trajectory overlay page.

    data fields:
        scene: Scene
        predictions: list[Prediction] (optional)
        cmap: ndarray (optional)
        sources: list[Source] (optional)
        truth: bool — draw true futures when the scene carries them
        title: str (optional)
    """
    scene = data["scene"]
    cmap = data.get("cmap")
    ctx.start_page(scene.lattice)
    ctx.draw_mask(scene.cmap if cmap is None else cmap)

    width = max(0.5, ctx.cs / 6)
    index = {a.id: i for i, a in enumerate(scene.agents)}
    truth = scene.truth if data.get("truth") else None
    if truth is not None:
        for agent, cells in zip(scene.agents, truth.trajectories):
            ctx.draw_path(cells[agent.t0 - 1:], ctx.color("truth"), width / 2)
    for pred in data.get("predictions") or []:
        if pred.agent_id in index:
            ctx.draw_path(pred.future, ctx.color("predicted"), width, dash=(2, 2))
    for agent in scene.agents:
        ctx.draw_path(agent.cells, ctx.color("observed"), width)
        ctx.draw_marker(agent.start_cell, ctx.color("observed"), radius=ctx.cs * 0.2)

    for src in data.get("sources") or []:
        ctx.draw_source(src)
    if data.get("title"):
        ctx.draw_label(data["title"])
    ctx.new_page()
