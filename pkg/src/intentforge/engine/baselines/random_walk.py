"""Uniform random walk over the legal actions."""

from __future__ import annotations

import math

from ..models import Cell, Scene, Trajectory
from ..predictor import Prediction, PredictionContext
from ..scene import legal_moves


def step_nll(scene: Scene, cell: Cell) -> float:
    """Predictive NLL of any realized step: ln of the number of legal actions."""
    n = len(legal_moves(scene, cell))
    return math.log(n) if n else math.inf


def predict(ctx: PredictionContext, i: int) -> Prediction:
    agent = ctx.scene.agents[i]
    cells = list(agent.cells)
    nlls = []
    while len(cells) < agent.horizon:
        here = cells[-1]
        moves = legal_moves(ctx.view, here)
        if not moves:
            cells.append(here)
            continue
        nlls.append(math.log(len(moves)))
        cells.append(moves[int(ctx.rng.integers(len(moves)))])
    return Prediction(
        agent_id=agent.id,
        method="rw",
        trajectory=Trajectory(cells, agent.t0, agent.horizon, agent.start_frame),
        nll=sum(nlls) / len(nlls) if nlls else None,
    )
