"""Straight line to the goal, disregarding obstacles."""

from __future__ import annotations

from ..models import Trajectory, euclidean
from ..planner import straight_line
from ..predictor import Prediction, PredictionContext, pad


def predict(ctx: PredictionContext, i: int) -> Prediction:
    agent = ctx.scene.agents[i]
    here = agent.last_cell
    goals = ctx.selected(i)
    j = min(goals, key=lambda k: (euclidean(here, ctx.goal(k)), k))
    line = straight_line(here, ctx.goal(j))
    cells = pad(agent.cells + line[1:], agent.horizon)
    return Prediction(
        agent_id=agent.id,
        method="sp",
        trajectory=Trajectory(cells, agent.t0, agent.horizon, agent.start_frame),
        goals=[j],
    )
