"""Trajectory-likelihood overlay for one start/goal pair.

Larger λ concentrates the mass on the least-action path; smaller λ
spreads it over near-optimal detours.
"""

from __future__ import annotations

from dataclasses import replace

from ..config import PathCostParams, RenderConfig
from ..context import FigureContext
from ..planner import path_likelihood_map


def render(ctx: FigureContext, data: dict, config: RenderConfig) -> None:
    """Render a likelihood heatmap page.

    data fields:
        scene: Scene
        field: VectorField — cumulative field of the goal
        start: Cell
        goal: Cell
        params: PathCostParams (optional)
        lam: float — overrides ``params.lam`` (optional)
        title: str (optional)
    """
    scene = data["scene"]
    params = data.get("params") or PathCostParams()
    if data.get("lam") is not None:
        params = replace(params, lam=float(data["lam"]))
    values = path_likelihood_map(scene, data["field"], tuple(data["start"]), tuple(data["goal"]), params)

    ctx.start_page(scene.lattice)
    ctx.draw_heat(values, vmax=1.0)
    ctx.draw_mask(scene.cmap)
    ctx.draw_marker(tuple(data["start"]), ctx.color("observed"))
    ctx.draw_marker(tuple(data["goal"]), ctx.color("source"), radius=ctx.cs * 0.45)
    ctx.draw_label(data.get("title") or f"lambda={params.lam:g}")
    ctx.new_page()
