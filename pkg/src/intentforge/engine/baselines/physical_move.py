"""Follow the summed force of every source, one cell per frame."""

from __future__ import annotations

import numpy as np

from ..fields import VectorField
from ..models import Cell, Scene, Trajectory
from ..predictor import Prediction, PredictionContext
from ..scene import legal_moves


def best_move(scene: Scene, field_: VectorField, cell: Cell) -> Cell:
    """Legal move best aligned with the field; stay only where the field vanishes."""
    f = field_.at(cell)
    norm = float(np.hypot(*f))
    moves = [c for c in legal_moves(scene, cell) if c != cell]
    if norm == 0.0 or not moves:
        return cell
    d = np.array([(c[0] - cell[0], c[1] - cell[1]) for c in moves], dtype=float)
    cos = (d @ f) / (np.hypot(d[:, 0], d[:, 1]) * norm)
    return moves[int(np.argmax(cos))]


def predict(ctx: PredictionContext, i: int) -> Prediction:
    agent = ctx.scene.agents[i]
    field_ = ctx.lm_sum()
    cells = list(agent.cells)
    while len(cells) < agent.horizon:
        cells.append(best_move(ctx.view, field_, cells[-1]))
    return Prediction(
        agent_id=agent.id,
        method="pm",
        trajectory=Trajectory(cells, agent.t0, agent.horizon, agent.start_frame),
    )
