"""Offline and online trajectory prediction from an inferred intent state."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ..errors import InputError, PredictionError
from .config import FieldParams, GreedyParams, ModelParams, PredictorConfig
from .fields import VectorField, lm_sum_field
from .mcmc import ChainModel, ChainState, propose_relation_row
from .models import BEHAVIORS, Agent, Cell, Scene, Source, Trajectory, euclidean
from .planner import (
    CostToGo,
    PlannedPath,
    cumulative_energy,
    dijkstra_path,
    edge_weight,
    path_energy,
    trajectory_log_likelihood,
)
from .posterior import NEG_INF, behavior_log_prior, fit_theta, relation_log_prior
from .scene import legal_moves

logger = logging.getLogger(__name__)

STOP_REASONS = ("horizon", "all-goals-visited", "out-of-scene")


@dataclass
class Prediction:
    """A full trajectory (observed prefix + predicted future) for one agent."""

    agent_id: str
    method: str
    trajectory: Trajectory
    goals: list[int] = field(default_factory=list)
    behavior: str | None = None
    switch_cell: Cell | None = None
    stop_reason: str | None = None
    score: float | None = None
    nll: float | None = None
    class_scores: dict[str, float] = field(default_factory=dict)
    goal_posterior: list[list[float]] = field(default_factory=list)
    frame_goals: list[int] = field(default_factory=list)

    @property
    def future(self) -> list[Cell]:
        """Predicted cells starting at the last observed cell."""
        return self.trajectory.cells[self.trajectory.t0 - 1:]

    def to_dict(self) -> dict:
        out = {
            "agent": self.agent_id,
            "method": self.method,
            "t0": self.trajectory.t0,
            "horizon": self.trajectory.horizon,
            "cells": [[x, y] for x, y in self.trajectory.cells],
            "goals": list(self.goals),
        }
        if self.behavior is not None:
            out["behavior"] = self.behavior
        if self.switch_cell is not None:
            out["switch_cell"] = list(self.switch_cell)
        if self.stop_reason is not None:
            out["stop_reason"] = self.stop_reason
        if self.score is not None:
            out["score"] = self.score if math.isfinite(self.score) else None
        if self.nll is not None:
            out["nll"] = self.nll
        if self.class_scores:
            out["class_scores"] = dict(self.class_scores)
        if self.goal_posterior:
            out["goal_posterior"] = self.goal_posterior
        if self.frame_goals:
            out["frame_goals"] = list(self.frame_goals)
        return out


class PredictionContext:
    """One inferred scene as seen by every predictor.

    Holds the constraint map, sources and relation matrix to predict with;
    force fields and cost-to-go tables are computed lazily per source.
    """

    def __init__(
        self,
        scene: Scene,
        sources: list[Source],
        relations: np.ndarray,
        params: ModelParams,
        config: PredictorConfig | None = None,
        field_params: FieldParams | None = None,
        cmap: np.ndarray | None = None,
        rng: np.random.Generator | None = None,
        greedy: GreedyParams | None = None,
    ) -> None:
        self.scene = scene
        self.cmap = np.array(scene.cmap if cmap is None else cmap, dtype=np.int8)
        self.view = scene.with_cmap(self.cmap)
        self.sources = list(sources)
        self.relations = np.array(relations, dtype=np.int8)
        self.params = params
        self.config = config or PredictorConfig()
        self.field_params = field_params or FieldParams()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.greedy = greedy or GreedyParams()
        self.model = ChainModel(scene, params, self.field_params)
        self._lm_sum: VectorField | None = None

        m, n = len(scene.agents), len(self.sources)
        if n == 0:
            raise InputError("prediction needs at least one source")
        if self.relations.shape != (m, n):
            raise InputError(f"relation matrix shape {self.relations.shape} != {(m, n)}")
        for i, agent in enumerate(scene.agents):
            if not self.relations[i].any():
                raise InputError(f"agent {agent.id}: no goal selected")

    @classmethod
    def from_state(
        cls,
        scene: Scene,
        state: ChainState,
        params: ModelParams,
        config: PredictorConfig | None = None,
        field_params: FieldParams | None = None,
        rng: np.random.Generator | None = None,
        greedy: GreedyParams | None = None,
    ) -> PredictionContext:
        return cls(
            scene, state.sources, state.relations, params, config, field_params,
            cmap=state.cmap, rng=rng, greedy=greedy,
        )

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    def goal(self, j: int) -> Cell:
        return self.sources[j].mu

    def field(self, j: int) -> VectorField:
        return self.model.cache.cumulative(self.view, self.goal(j))

    def table(self, j: int) -> CostToGo:
        return self.model.table(self.cmap, self.goal(j))

    def lm_sum(self) -> VectorField:
        """Repulsion plus the attraction of every source."""
        if self._lm_sum is None:
            self._lm_sum = lm_sum_field(self.view, self.sources, self.field_params)
        return self._lm_sum

    def selected(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.relations[i])]

    def plan(self, start: Cell, j: int) -> PlannedPath:
        if not self.view.is_walkable(start) and start != self.goal(j):
            return PlannedPath.unreachable()
        return dijkstra_path(self.view, self.field(j), start, self.goal(j), self.params.path)

    def closest(self, cell: Cell, goals: list[int]) -> int | None:
        """Goal with the lowest cost-to-go from ``cell``; ties to the lower index."""
        best, best_cost = None, math.inf
        for j in sorted(goals):
            c = self.table(j).cost_at(cell)
            if c < best_cost:
                best, best_cost = j, c
        return best


def pad(cells: list[Cell], horizon: int) -> list[Cell]:
    """Clip to ``horizon`` frames, or repeat the last cell up to it."""
    if len(cells) >= horizon:
        return list(cells[:horizon])
    return list(cells) + [cells[-1]] * (horizon - len(cells))


# -- Offline hypotheses -------------------------------------------------------


@dataclass
class Hypothesis:
    behavior: str
    goals: tuple[int, ...]
    cells: list[Cell]
    log_likelihood: float
    log_prior: float
    switch_cell: Cell | None = None

    @property
    def score(self) -> float:
        value = self.log_likelihood + self.log_prior
        return NEG_INF if math.isnan(value) else value


def visit_indices(cells: list[Cell], goal_cells: list[Cell]) -> list[int]:
    """Frames at which ``goal_cells`` are reached in order (exact cell equality)."""
    out: list[int] = []
    for t, cell in enumerate(cells):
        if len(out) == len(goal_cells):
            break
        if cell == goal_cells[len(out)]:
            out.append(t)
    return out


def segment_energy(ctx: PredictionContext, cells: list[Cell], goals: list[int]) -> tuple[float, int]:
    """Energy of an observed stretch heading through ``goals`` in order.

    Returns the energy and the number of goals already reached; each piece
    is measured under the field of the goal it heads to.
    """
    if not goals:
        return 0.0, 0
    visits = visit_indices(cells, [ctx.goal(j) for j in goals])
    energy, start = 0.0, 0
    for k, t in enumerate(visits):
        energy += path_energy(cells[start:t + 1], ctx.field(goals[k]))
        start = t
    heading = goals[min(len(visits), len(goals) - 1)]
    energy += path_energy(cells[start:], ctx.field(heading))
    return energy, len(visits)


def plan_legs(ctx: PredictionContext, start: Cell, goals: list[int]) -> tuple[list[Cell], float]:
    """Least-action legs through ``goals``, dwelling at every intermediate goal.

    The returned cells exclude ``start``; energy is inf when a leg is blocked.
    """
    dwell = ctx.config.dwell
    cells: list[Cell] = []
    energy, here = 0.0, start
    for k, j in enumerate(goals):
        leg = ctx.plan(here, j)
        if not leg.reachable:
            return [], math.inf
        cells.extend(leg.cells[1:])
        energy += leg.energy
        here = ctx.goal(j)
        if k < len(goals) - 1:
            cells.extend([here] * dwell)
    return cells, energy


def legs_energy(ctx: PredictionContext, start: Cell, goals: list[int]) -> float:
    """Optimal energy of :func:`plan_legs` read from cost-to-go tables."""
    energy, here = 0.0, start
    for j in goals:
        table = ctx.table(j)
        if not table.reachable(here):
            return math.inf
        energy += table.energy_at(here)
        here = ctx.goal(j)
    return energy


def sequential_hypothesis(ctx: PredictionContext, agent: Agent, goals: tuple[int, ...]) -> Hypothesis:
    prefix = agent.cells
    label = "single" if len(goals) == 1 else "sequential"
    prior = behavior_log_prior(
        label, len(goals), ctx.params.kappa, ctx.params.gamma, ctx.n_sources,
    )
    e_prefix, reached = segment_energy(ctx, prefix, list(goals))
    future, e_future = plan_legs(ctx, agent.last_cell, list(goals[reached:]))
    energy = e_prefix + e_future
    return Hypothesis(
        behavior=label,
        goals=goals,
        cells=pad(prefix + future, agent.horizon),
        log_likelihood=trajectory_log_likelihood(energy, ctx.params.path),
        log_prior=prior,
    )


def score_change_hypothesis(ctx: PredictionContext, agent: Agent, goals: tuple[int, ...]) -> Hypothesis:
    """Best switch point for an agent abandoning ``goals[0]`` for ``goals[1]``.

    Candidates are the prefix cell of closest approach to the abandoned goal
    and every ``switch_stride``-th cell of the least-action path toward it
    after the prefix; with ``exhaustive_switch`` every prefix cell and every
    path cell is tried. Goals after ``goals[1]`` are visited in order.
    """
    if len(goals) < 2:
        raise InputError("a change of intent needs two goals")
    first, after = goals[0], list(goals[1:])
    prior = behavior_log_prior("change", len(goals), ctx.params.kappa, ctx.params.gamma, ctx.n_sources)
    prefix = agent.cells
    infeasible = Hypothesis("change", goals, pad(prefix, agent.horizon), NEG_INF, prior)
    mu_first = ctx.goal(first)
    if mu_first in prefix:
        return infeasible

    field_first = ctx.field(first)
    cum_prefix = cumulative_energy(prefix, field_first)
    exhaustive = ctx.config.exhaustive_switch
    best: tuple[float, str, int] | None = None

    if exhaustive:
        prefix_candidates = range(len(prefix))
    else:
        dists = [euclidean(c, mu_first) for c in prefix]
        prefix_candidates = [int(np.argmin(dists))]
    for s in prefix_candidates:
        e_after, reached = segment_energy(ctx, prefix[s:], after)
        total = cum_prefix[s] + e_after + legs_energy(ctx, agent.last_cell, after[reached:])
        if best is None or total < best[0]:
            best = (total, "prefix", s)

    toward = ctx.plan(agent.last_cell, first)
    if toward.reachable:
        cum_path = cumulative_energy(toward.cells, field_first)
        stride = 1 if exhaustive else ctx.config.switch_stride
        for k in range(stride, len(toward.cells) - 1, stride):
            total = cum_prefix[-1] + cum_path[k] + legs_energy(ctx, toward.cells[k], after)
            if best is None or total < best[0]:
                best = (total, "path", k)

    if best is None or not math.isfinite(best[0]):
        return infeasible
    _, kind, idx = best
    if kind == "prefix":
        e_after, reached = segment_energy(ctx, prefix[idx:], after)
        future, e_future = plan_legs(ctx, agent.last_cell, after[reached:])
        energy = cum_prefix[idx] + e_after + e_future
        cells = prefix + future
        switch = prefix[idx]
    else:
        switch = toward.cells[idx]
        future, e_future = plan_legs(ctx, switch, after)
        energy = cum_prefix[-1] + cum_path[idx] + e_future
        cells = prefix + toward.cells[1:idx + 1] + future
    return Hypothesis(
        behavior="change",
        goals=goals,
        cells=pad(cells, agent.horizon),
        log_likelihood=trajectory_log_likelihood(energy, ctx.params.path),
        log_prior=prior,
        switch_cell=switch,
    )


def enumerate_hypotheses(ctx: PredictionContext, i: int) -> list[Hypothesis]:
    """Every behavior × goal-order hypothesis consistent with row ``i`` of R."""
    agent = ctx.scene.agents[i]
    goals = ctx.selected(i)
    out = []
    for order in itertools.permutations(goals):
        out.append(sequential_hypothesis(ctx, agent, order))
        if len(order) >= 2 and ctx.n_sources >= 2:
            out.append(score_change_hypothesis(ctx, agent, order))
    return out


def class_scores(hypotheses: list[Hypothesis]) -> dict[str, float]:
    """Softmax over behaviors of each behavior's best hypothesis score."""
    best = {z: NEG_INF for z in BEHAVIORS}
    for h in hypotheses:
        best[h.behavior] = max(best[h.behavior], h.score)
    scores = np.array([best[z] for z in BEHAVIORS])
    if not np.isfinite(scores).any():
        return {z: 0.0 for z in BEHAVIORS}
    probs = np.exp(scores - logsumexp(scores))
    return {z: float(p) for z, p in zip(BEHAVIORS, probs)}


def predict_agent(ctx: PredictionContext, i: int) -> Prediction:
    agent = ctx.scene.agents[i]
    hypotheses = enumerate_hypotheses(ctx, i)
    scores = [h.score for h in hypotheses]
    best = hypotheses[int(np.argmax(scores))]
    if best.score == NEG_INF:
        raise PredictionError(f"agent {agent.id}: every hypothesis is infeasible")
    logger.debug(
        "agent %s: %s via %s (score %.3f of %d hypotheses)",
        agent.id, best.behavior, list(best.goals), best.score, len(hypotheses),
    )
    return Prediction(
        agent_id=agent.id,
        method="offline",
        trajectory=Trajectory(best.cells, agent.t0, agent.horizon, agent.start_frame),
        goals=list(best.goals),
        behavior=best.behavior,
        switch_cell=best.switch_cell,
        score=best.score,
        class_scores=class_scores(hypotheses),
    )


def predict_offline(ctx: PredictionContext) -> list[Prediction]:
    """Maximum-score behavior, goal order and trajectory for every agent."""
    return [predict_agent(ctx, i) for i in range(len(ctx.scene.agents))]


# -- Online prediction ---------------------------------------------------------


@dataclass
class AgentTrack:
    """Frame-by-frame state of one agent under online prediction."""

    index: int
    agent_id: str
    cells: list[Cell]
    t0: int
    horizon: int
    start_frame: int
    row: np.ndarray
    energies: np.ndarray
    visited: list[int] = field(default_factory=list)
    posterior: list[list[float]] = field(default_factory=list)
    stop_reason: str | None = None

    @property
    def cell(self) -> Cell:
        return self.cells[-1]

    @property
    def t(self) -> int:
        return len(self.cells)

    @property
    def done(self) -> bool:
        return self.stop_reason is not None

    @property
    def remaining(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.row) if int(j) not in self.visited]

    def prediction(self) -> Prediction:
        goals = list(self.visited) + self.remaining
        return Prediction(
            agent_id=self.agent_id,
            method="online",
            trajectory=Trajectory(list(self.cells), self.t0, self.horizon, self.start_frame),
            goals=goals,
            behavior="single" if int(self.row.sum()) == 1 else "sequential",
            stop_reason=self.stop_reason,
            goal_posterior=self.posterior,
        )


@dataclass
class OnlineState:
    frame: int
    tracks: list[AgentTrack]

    @property
    def done(self) -> bool:
        return all(t.done for t in self.tracks)

    def predictions(self) -> list[Prediction]:
        return [t.prediction() for t in self.tracks]


def goal_posterior(ctx: PredictionContext, track: AgentTrack) -> np.ndarray:
    """P(goal = j | cells so far) over every source."""
    theta = fit_theta(ctx.relations)
    logw = np.full(ctx.n_sources, NEG_INF)
    for j in range(ctx.n_sources):
        table = ctx.table(j)
        if theta[j] > 0 and table.reachable(track.cell):
            energy = track.energies[j] + table.energy_at(track.cell)
            logw[j] = trajectory_log_likelihood(energy, ctx.params.path) + math.log(theta[j])
    if not np.isfinite(logw).any():
        return np.full(ctx.n_sources, 1.0 / ctx.n_sources)
    return np.exp(logw - logsumexp(logw))


def _settle(ctx: PredictionContext, track: AgentTrack) -> None:
    """Mark goals reached at the current cell and decide whether the track stops."""
    for j in track.remaining:
        if track.cell == ctx.goal(j):
            track.visited.append(j)
    if not track.remaining:
        last = ctx.goal(track.visited[-1]) if track.visited else track.cell
        on_edge = ctx.scene.lattice.on_boundary(last)
        track.stop_reason = "out-of-scene" if on_edge else "all-goals-visited"
    elif track.t >= track.horizon:
        track.stop_reason = "horizon"


def _row_target(ctx: PredictionContext, track: AgentTrack, row: np.ndarray) -> float:
    pending = row.copy()
    pending[track.visited] = 0
    if not pending.any():
        return NEG_INF
    ll = ctx.model.agent_log_likelihood(ctx.cmap, ctx.sources, pending, track.cells)
    relations = ctx.relations.copy()
    relations[track.index] = row
    return ll + relation_log_prior(relations, fit_theta(relations))


def resample_relations(ctx: PredictionContext, track: AgentTrack) -> None:
    """Metropolis sweeps over this agent's relation row; visited goals stay selected."""
    free = np.ones(ctx.n_sources, dtype=bool)
    free[track.visited] = False
    budget = ctx.params.max_goals - len(track.visited)
    if budget < 1 or not free.any():
        return
    current = _row_target(ctx, track, track.row)
    for _ in range(ctx.config.relation_sweeps):
        sub = propose_relation_row(track.row[free], budget, ctx.rng)
        if sub is None:
            continue
        row = track.row.copy()
        row[free] = sub
        target = _row_target(ctx, track, row)
        if target == NEG_INF:
            continue
        if current == NEG_INF or math.log(ctx.rng.random() + 1e-300) < target - current:
            track.row, current = row, target
    ctx.relations[track.index] = track.row


def choose_move(ctx: PredictionContext, cell: Cell, j: int) -> Cell:
    """Next cell toward goal ``j`` under the configured online mode."""
    goal = ctx.goal(j)
    table = ctx.table(j)
    fld = ctx.field(j)
    cands = legal_moves(ctx.view, cell, goal=goal)
    if not cands:
        return cell
    moves = [k for k, c in enumerate(cands) if c != cell]

    if ctx.config.online_mode == "argmax":
        if not moves:
            return cell
        costs = [edge_weight(fld, cell, cands[k], ctx.params.path) + table.cost_at(cands[k]) for k in moves]
        if not np.isfinite(costs).any():
            return cell
        return cands[moves[int(np.argmin(costs))]]

    mag = float(np.hypot(*fld.at(cell)))
    logits = np.array([
        -ctx.params.lam * (mag * euclidean(cell, c) + table.cost_at(c)) for c in cands
    ])
    if not np.isfinite(logits).any():
        return cell
    p = np.exp(logits - logits.max())
    p /= p.sum()
    draws = ctx.rng.choice(len(cands), size=ctx.config.samples, p=p)
    disp = np.array([(c[0] - cell[0], c[1] - cell[1]) for c in cands], dtype=float)
    mean = disp[draws].mean(axis=0)
    norm = float(np.hypot(*mean))
    if norm < ctx.config.stay_threshold or not moves:
        if cell in cands:
            return cell
        return cands[int(np.argmin(np.hypot(*(disp - mean).T)))]
    unit = mean / norm
    k = min(moves, key=lambda k: float(np.hypot(*(disp[k] - unit))))
    return cands[k]


def online_start(ctx: PredictionContext, horizon: int | None = None) -> OnlineState:
    tracks = []
    for i, agent in enumerate(ctx.scene.agents):
        energies = np.array([path_energy(agent.cells, ctx.field(j)) for j in range(ctx.n_sources)])
        track = AgentTrack(
            index=i,
            agent_id=agent.id,
            cells=list(agent.cells),
            t0=agent.t0,
            horizon=agent.horizon if horizon is None else max(horizon, agent.t0),
            start_frame=agent.start_frame,
            row=ctx.relations[i].copy(),
            energies=energies,
        )
        _settle(ctx, track)
        tracks.append(track)
    return OnlineState(frame=0, tracks=tracks)


def online_step(ctx: PredictionContext, state: OnlineState) -> OnlineState:
    """Advance every active track by one frame; updates ``state`` in place."""
    for track in state.tracks:
        if track.done:
            continue
        if ctx.config.relation_sweeps:
            resample_relations(ctx, track)
            _settle(ctx, track)
            if track.done:
                continue
        j = ctx.closest(track.cell, track.remaining)
        nxt = track.cell if j is None else choose_move(ctx, track.cell, j)
        for k in range(ctx.n_sources):
            f = ctx.field(k).at(track.cell)
            track.energies[k] += abs(float(f[0]) * (nxt[0] - track.cell[0]) + float(f[1]) * (nxt[1] - track.cell[1]))
        track.cells.append(nxt)
        track.posterior.append(goal_posterior(ctx, track).tolist())
        _settle(ctx, track)
    state.frame += 1
    return state


def online_run(ctx: PredictionContext, horizon: int | None = None) -> OnlineState:
    """Step until every track has stopped."""
    state = online_start(ctx, horizon)
    limit = max((t.horizon - t.t for t in state.tracks), default=0)
    while not state.done:
        if state.frame > limit:
            raise PredictionError(f"online prediction did not stop after {state.frame} frames")
        online_step(ctx, state)
    reasons = [t.stop_reason for t in state.tracks]
    logger.info(
        "online prediction: %d frames, stops %s",
        state.frame, {r: reasons.count(r) for r in STOP_REASONS if r in reasons},
    )
    return state
