"""Head for the source whose distance has shrunk the most since the first frame."""

from __future__ import annotations

import numpy as np

from ..models import Cell, Trajectory, euclidean
from ..predictor import Prediction, PredictionContext


def goal_scores(ctx: PredictionContext, origin: Cell, here: Cell) -> np.ndarray:
    """τ · (|μ_j − x| − |μ_j − x_origin|) for every source."""
    tau = ctx.greedy.effective_tau
    return np.array([
        tau * (euclidean(src.mu, here) - euclidean(src.mu, origin)) for src in ctx.sources
    ])


def predict(ctx: PredictionContext, i: int) -> Prediction:
    agent = ctx.scene.agents[i]
    origin = agent.start_cell
    cells = list(agent.cells)
    frame_goals: list[int] = []
    path: list[Cell] = []
    current = -1
    while len(cells) < agent.horizon:
        here = cells[-1]
        j = int(np.argmax(goal_scores(ctx, origin, here)))
        if j != current or not path or path[0] != here:
            current = j
            planned = ctx.plan(here, j)
            path = planned.cells if planned.reachable else [here]
        frame_goals.append(j)
        nxt = path[1] if len(path) > 1 else here
        path = path[1:] if len(path) > 1 else path
        cells.append(nxt)
    return Prediction(
        agent_id=agent.id,
        method="gm",
        trajectory=Trajectory(cells, agent.t0, agent.horizon, agent.start_frame),
        goals=list(dict.fromkeys(frame_goals)),
        frame_goals=frame_goals,
    )
