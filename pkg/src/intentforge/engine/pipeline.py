"""End-to-end runs: synth → infer → predict → evaluate, plus the batch suites."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from ..errors import InputError, PredictionError
from .baselines import BASELINES, run_baseline
from .clustering import SourceClusters, cluster_sources, purity
from .config import RunConfig
from .documents import InferredState
from .evaluation import EvalReport, evaluate
from .mcmc import ChainState, ProposalStats, Sampler
from .models import Scene, Trajectory
from .predictor import (
    Prediction,
    PredictionContext,
    online_run,
    pad,
    predict_agent,
)
from .synth import generate_archetype_suite, observe, synthesize

logger = logging.getLogger(__name__)

METHODS = ("offline", "online", *sorted(BASELINES))
RELATION_MODES = ("inferred", "truth")


@dataclass
class Inference:
    state: ChainState
    stats: ProposalStats
    trace: pd.DataFrame

    def diagnostics(self) -> dict:
        return {
            "proposals": self.stats.to_dict(),
            "n_sources": self.state.n_sources,
            "trace_rows": len(self.trace),
        }


def infer_scene(scene: Scene, run: RunConfig, seed: int | None = None) -> Inference:
    """One MCMC chain from ``run.chain``; ``seed`` overrides its seed."""
    chain = run.chain if seed is None else replace(run.chain, seed=seed)
    state, stats, trace = Sampler(scene, run.model, chain, run.fields).run()
    return Inference(state, stats, trace)


def truth_state(scene: Scene) -> InferredState:
    """The generating sources and relations, as if inferred."""
    truth = scene.truth
    if truth is None or not truth.sources or truth.relations.size == 0:
        raise InputError(f"scene {scene.name!r} carries no ground-truth relations")
    return InferredState(scene.cmap, list(truth.sources), truth.relations)


def prediction_context(
    scene: Scene, state, run: RunConfig, seed: int = 0,
) -> PredictionContext:
    """``state`` is a chain state or an :class:`InferredState`."""
    return PredictionContext(
        scene,
        state.sources,
        state.relations,
        run.model,
        run.predictor,
        run.fields,
        cmap=state.cmap,
        rng=np.random.default_rng(seed),
        greedy=run.greedy,
    )


def stay_prediction(ctx: PredictionContext, i: int, method: str) -> Prediction:
    """Agent ``i`` holds its last observed cell until the horizon."""
    agent = ctx.scene.agents[i]
    cells = pad(list(agent.cells), max(agent.horizon, agent.t0))
    return Prediction(
        agent_id=agent.id,
        method=method,
        trajectory=Trajectory(cells, agent.t0, len(cells), agent.start_frame),
        goals=ctx.selected(i),
        stop_reason="horizon",
    )


def predict_scene(ctx: PredictionContext, method: str = "offline") -> list[Prediction]:
    """Predictions for every agent with ``method`` (offline, online or a baseline name)."""
    if method == "offline":
        out = []
        for i, agent in enumerate(ctx.scene.agents):
            try:
                out.append(predict_agent(ctx, i))
            except PredictionError as exc:
                warnings.warn(f"{exc}; holding the last observed cell", stacklevel=2)
                out.append(stay_prediction(ctx, i, method))
        return out
    if method == "online":
        return online_run(ctx).predictions()
    if method in BASELINES:
        return run_baseline(method, ctx)
    raise InputError(f"Unknown prediction mode: {method!r}")


def evaluate_scene(
    scene: Scene,
    predictions: list[Prediction] | None,
    state,
    run: RunConfig,
    literal_relations: bool = False,
) -> EvalReport:
    return evaluate(
        scene,
        predictions,
        sources=state.sources if state is not None else None,
        relations=state.relations if state is not None else None,
        params=run.model,
        field_params=run.fields,
        cmap=state.cmap if state is not None else None,
        literal_relations=literal_relations,
    )


def run_scene(
    scene: Scene,
    run: RunConfig,
    method: str | None = "offline",
    relations: str = "inferred",
    seed: int = 0,
) -> EvalReport:
    """Infer (or take the truth), predict with ``method`` and score one scene."""
    if relations not in RELATION_MODES:
        raise InputError(f"Unknown relations mode: {relations!r}")
    state = truth_state(scene) if relations == "truth" else infer_scene(scene, run, seed).state
    predictions = None
    if method:
        predictions = predict_scene(prediction_context(scene, state, run, seed), method)
    report = evaluate_scene(scene, predictions, state, run)
    report.method = method or "inference"
    return report


# -- Batch suites ----------------------------------------------------------------


def toy_sweep(run: RunConfig) -> pd.DataFrame:
    """Every cell of the (|S|, |A|, seed, observed fraction) grid, one row per scene."""
    rows = []
    method = run.sweep.method or None
    for n_sources, n_agents, seed, fraction in run.sweep.grid():
        synth = replace(
            run.synth, n_sources=n_sources, n_agents=n_agents, seed=seed,
            observed_fraction=fraction,
        )
        scene = synthesize(synth)
        report = run_scene(scene, run, method, seed=seed)
        summary = report.summary_row()
        rows.append({
            "scene": scene.name,
            "n_sources": n_sources,
            "n_agents": n_agents,
            "seed": seed,
            "observed_fraction": fraction,
            **{k: (np.nan if v is None else v) for k, v in summary.items()},
        })
        logger.info(
            "%s @%.2f: S %.3f R %.3f S&R %.3f", scene.name, fraction,
            *(summary[k] if summary[k] is not None else float("nan")
              for k in ("s_accuracy", "r_accuracy", "sr_accuracy")),
        )
    return pd.DataFrame(rows)


def sweep_table(summary: pd.DataFrame, metric: str = "sr_accuracy") -> pd.DataFrame:
    """Mean of ``metric`` over seeds, rows |S|, columns |A|, one block per fraction."""
    return summary.pivot_table(
        index=["observed_fraction", "n_sources"], columns="n_agents",
        values=metric, aggfunc="mean",
    ).sort_index(ascending=[False, True])


INTENT_METHODS = ("online", "gm")


def intent_suite(run: RunConfig, relations: str = "truth") -> tuple[Scene, dict[str, EvalReport]]:
    """Intent reports on one scene drawn with ``run.synth`` (the suite preset).

    Behavior types are inferred offline from the fully observed tracks and
    scored next to the motion-cue baseline; online and GM goal predictions
    run from the preset's observed prefixes and are scored per frame.
    """
    scene = synthesize(run.synth)
    seed = run.synth.seed
    reports = {"offline": run_scene(observe(scene, scene.truth, 1.0), run, "offline", relations, seed)}
    for method in INTENT_METHODS:
        reports[method] = run_scene(scene, run, method, relations, seed)
    offline = reports["offline"]
    if offline.behaviors is not None and offline.cue_behaviors is not None:
        logger.info(
            "intent suite %s: AP %s, motion cues %s", scene.name,
            {z: round(v, 3) for z, v in offline.behaviors.ap.items()},
            {z: round(v, 3) for z, v in offline.cue_behaviors.ap.items()},
        )
    for method in INTENT_METHODS:
        logger.info("intent suite %s: %s intent accuracy %s", scene.name, method,
                    reports[method].summary_row().get("intent_accuracy"))
    return scene, reports


def cluster_scene(scene: Scene, state, run: RunConfig) -> tuple[SourceClusters, float | None]:
    """Cluster the sources of ``state``; purity when the scene carries archetype labels."""
    clusters = cluster_sources(scene, state.sources, state.relations, run.cluster)
    labels = scene.truth.archetypes if scene.truth is not None else None
    score = None
    if labels and len(labels) == len(state.sources):
        score = purity(clusters.result.labels, labels)
    return clusters, score


def archetype_clusters(run: RunConfig, seed: int | None = None) -> tuple[Scene, SourceClusters, float]:
    """Archetype suite → truth relations → clustering purity."""
    scene = generate_archetype_suite(seed=run.cluster.seed if seed is None else seed)
    clusters, score = cluster_scene(scene, truth_state(scene), run)
    logger.info("archetype suite %s: purity %.3f", scene.name, score)
    return scene, clusters, score
