"""Comparison predictors, one module per baseline.

Each module exposes ``predict(ctx, i) -> Prediction`` for agent ``i`` of a
:class:`~intentforge.engine.predictor.PredictionContext`.
"""

from __future__ import annotations

from ...errors import InputError
from ..predictor import Prediction, PredictionContext
from . import greedy_move, physical_move, random_walk, shortest_path

BASELINES: dict[str, object] = {
    "sp": shortest_path,
    "rw": random_walk,
    "pm": physical_move,
    "gm": greedy_move,
}


def run_baseline(name: str, ctx: PredictionContext) -> list[Prediction]:
    """Predict every agent of ``ctx`` with the named baseline."""
    module = BASELINES.get(name)
    if module is None:
        raise InputError(f"Unknown baseline: {name!r}")
    return [module.predict(ctx, i) for i in range(len(ctx.scene.agents))]
