"""Data-driven MCMC over constraint map, sources and relations."""

from __future__ import annotations

import logging
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from ..errors import InferenceError, InputError
from .config import ChainConfig, FieldParams, ModelParams
from .fields import FieldCache
from .models import Agent, Cell, Scene, Source, chebyshev, euclidean
from .planner import CostToGo, cost_to_go, path_energy, trajectory_log_likelihood
from .posterior import (
    NEG_INF,
    AppearanceModel,
    LatentState,
    Leg,
    PosteriorTerms,
    prior_terms,
)

logger = logging.getLogger(__name__)

MOVES = ("flip", "birth", "death", "relation")
Q_FLOOR = 0.1
Q_CEIL = 0.99


@dataclass
class ProposalStats:
    proposed: dict[str, int] = field(default_factory=lambda: {m: 0 for m in MOVES})
    accepted: dict[str, int] = field(default_factory=lambda: {m: 0 for m in MOVES})

    def record(self, move: str, accepted: bool) -> None:
        self.proposed[move] += 1
        if accepted:
            self.accepted[move] += 1

    def rate(self, move: str) -> float:
        n = self.proposed[move]
        return self.accepted[move] / n if n else 0.0

    def to_dict(self) -> dict:
        return {m: {"proposed": self.proposed[m], "accepted": self.accepted[m]} for m in MOVES}


@dataclass
class ChainState:
    """One sample {C, S, R} with its cached posterior terms.

    ``goals[i]`` is the closest selected source of agent ``i`` and
    ``goal_energies[i]`` the energy of its completed trajectory.
    """

    cmap: np.ndarray
    sources: list[Source]
    relations: np.ndarray
    terms: PosteriorTerms
    goals: np.ndarray
    goal_energies: np.ndarray
    gmm: AppearanceModel | None = None

    @property
    def log_post(self) -> float:
        return self.terms.total

    @property
    def n_sources(self) -> int:
        return len(self.sources)


# -- Likelihood evaluation ----------------------------------------------------


class ChainModel:
    """Evaluates chain states against one scene, caching fields and tables.

    The likelihood of agent ``i`` is that of its observed prefix completed by
    the least-action path from its last observed cell to the closest selected
    source.
    """

    def __init__(
        self,
        scene: Scene,
        params: ModelParams,
        field_params: FieldParams | None = None,
        cache: FieldCache | None = None,
        table_slots: int = 64,
    ) -> None:
        self.scene = scene
        self.params = params
        self.field_params = field_params or FieldParams()
        self.cache = cache or FieldCache(scene.lattice.shape, self.field_params)
        self._slots = table_slots
        self._tables: OrderedDict[tuple[bytes, Cell], CostToGo] = OrderedDict()
        self._prefix: OrderedDict[tuple[bytes, Cell], np.ndarray] = OrderedDict()

        m = len(scene.agents)
        tails, deltas, owner = [], [], []
        for i, agent in enumerate(scene.agents):
            cells = np.asarray(agent.cells, dtype=int)
            if len(cells) >= 2:
                tails.append(cells[:-1])
                deltas.append(np.diff(cells, axis=0))
                owner.append(np.full(len(cells) - 1, i))
        self._tails = np.concatenate(tails) if tails else np.zeros((0, 2), dtype=int)
        self._deltas = np.concatenate(deltas) if deltas else np.zeros((0, 2), dtype=int)
        self._owner = np.concatenate(owner) if owner else np.zeros(0, dtype=int)
        self._m = m
        self._observed = [np.asarray(a.cells, dtype=int) for a in scene.agents]

    def view(self, cmap: np.ndarray) -> Scene:
        return self.scene.with_cmap(cmap)

    def _remember(self, store: OrderedDict, key, value) -> None:
        store[key] = value
        if len(store) > self._slots:
            store.popitem(last=False)

    def table(self, cmap: np.ndarray, mu: Cell) -> CostToGo:
        key = (FieldCache.key(cmap), mu)
        hit = self._tables.get(key)
        if hit is None:
            view = self.view(cmap)
            hit = cost_to_go(view, self.cache.cumulative(view, mu), mu, self.params.path)
            self._remember(self._tables, key, hit)
        else:
            self._tables.move_to_end(key)
        return hit

    def prefix_energies(self, cmap: np.ndarray, mu: Cell) -> np.ndarray:
        """Energy of every agent's observed prefix under the field of ``mu``."""
        key = (FieldCache.key(cmap), mu)
        hit = self._prefix.get(key)
        if hit is None:
            f = self.cache.cumulative(self.view(cmap), mu).data
            t = self._tails
            e = np.abs(f[t[:, 1], t[:, 0], 0] * self._deltas[:, 0] + f[t[:, 1], t[:, 0], 1] * self._deltas[:, 1])
            hit = np.bincount(self._owner, weights=e, minlength=self._m)
            self._remember(self._prefix, key, hit)
        else:
            self._prefix.move_to_end(key)
        return hit

    def closest_goal(self, cmap: np.ndarray, sources: list[Source], row: np.ndarray, cell: Cell) -> tuple[int, bool]:
        """Closest selected source by cost-to-go, else by Euclidean distance."""
        selected = np.flatnonzero(row)
        best, best_cost = -1, math.inf
        for j in selected:
            c = self.table(cmap, sources[j].mu).cost_at(cell)
            if c < best_cost:
                best, best_cost = int(j), c
        if best >= 0:
            return best, True
        if len(selected) == 0:
            return -1, False
        dists = [euclidean(cell, sources[j].mu) for j in selected]
        return int(selected[int(np.argmin(dists))]), False

    def likelihoods(self, cmap: np.ndarray, sources: list[Source], relations: np.ndarray):
        """Per-agent log-likelihood, closest goal and completed-trajectory energy."""
        m = self._m
        lls = np.zeros(m)
        goals = np.full(m, -1)
        energies = np.full(m, math.inf)
        walk = cmap > 0
        blocked = [not walk[obs[:, 1], obs[:, 0]].all() for obs in self._observed]
        if any(blocked):
            # the state is impossible; skip the cost-to-go tables
            lls[np.asarray(blocked, dtype=bool)] = NEG_INF
            return lls, goals, energies
        for i, agent in enumerate(self.scene.agents):
            j, reachable = self.closest_goal(cmap, sources, relations[i], agent.last_cell)
            goals[i] = j
            if not reachable:
                lls[i] = NEG_INF
                continue
            energy = self.prefix_energies(cmap, sources[j].mu)[i] + self.table(cmap, sources[j].mu).energy_at(agent.last_cell)
            energies[i] = energy
            lls[i] = trajectory_log_likelihood(energy, self.params.path)
        return lls, goals, energies

    def agent_log_likelihood(
        self, cmap: np.ndarray, sources: list[Source], row: np.ndarray, cells: list[Cell],
    ) -> float:
        """Likelihood of an arbitrary trajectory prefix under relation row ``row``."""
        walk = cmap > 0
        if any(not walk[y, x] for x, y in cells):
            return NEG_INF
        j, reachable = self.closest_goal(cmap, sources, row, cells[-1])
        if not reachable:
            return NEG_INF
        mu = sources[j].mu
        energy = path_energy(cells, self.cache.cumulative(self.view(cmap), mu))
        energy += self.table(cmap, mu).energy_at(cells[-1])
        return trajectory_log_likelihood(energy, self.params.path)

    def state(
        self,
        cmap: np.ndarray,
        sources: list[Source],
        relations: np.ndarray,
        gmm: AppearanceModel | None = None,
    ) -> ChainState:
        m = self._m
        latent = LatentState(
            cmap=cmap, sources=sources, relations=relations,
            behaviors=["single"] * m, gmm=gmm,
        )
        terms = prior_terms(latent, self.scene, self.params)
        lls, goals, energies = self.likelihoods(cmap, sources, relations)
        terms.trajectories = lls
        return ChainState(
            cmap=cmap, sources=sources, relations=relations, terms=terms,
            goals=goals, goal_energies=energies, gmm=gmm,
        )

    def latent_state(self, state: ChainState) -> LatentState:
        """The completed trajectories Γ' ⊕ least-action completion as a full state."""
        legs: list[list[Leg]] = []
        for i, agent in enumerate(self.scene.agents):
            j = int(state.goals[i])
            if j < 0 or not np.isfinite(state.goal_energies[i]):
                legs.append([Leg(max(j, 0), list(agent.cells))])
                continue
            tail = self.table(state.cmap, state.sources[j].mu).path_from(agent.last_cell)
            legs.append([Leg(j, list(agent.cells) + tail.cells[1:])])
        return LatentState(
            cmap=state.cmap, sources=state.sources, relations=state.relations,
            behaviors=["single"] * len(legs), legs=legs, gmm=state.gmm,
        )


# -- Data-driven helpers ------------------------------------------------------


def walkable_proposal(scene: Scene) -> np.ndarray:
    """Q(c(x) = +1): normalized mean observed speed, floored for unvisited cells."""
    total = np.zeros(scene.lattice.shape)
    count = np.zeros(scene.lattice.shape)
    for agent in scene.agents:
        cells = np.asarray(agent.cells, dtype=int)
        if len(cells) < 2:
            continue
        speed = np.hypot(*np.diff(cells, axis=0).T)
        np.add.at(total, (cells[:-1, 1], cells[:-1, 0]), speed)
        np.add.at(count, (cells[:-1, 1], cells[:-1, 0]), 1)
    mean = np.divide(total, count, out=np.zeros_like(total), where=count > 0)
    peak = mean.max()
    q = mean / peak if peak > 0 else mean
    q = np.clip(q, Q_FLOOR, Q_CEIL)
    q[count == 0] = Q_FLOOR
    return q


def stopping_locations(agents: list[Agent], stop_speed: float, stop_frames: int) -> list[Cell]:
    """Candidate sources ranked by frequency, ties by earlier time.

    A stop is a run of at least ``stop_frames`` frames with speed below
    ``stop_speed``; every agent's last observed cell counts as well.
    """
    counts: dict[Cell, int] = {}
    first: dict[Cell, int] = {}

    def _add(cell: Cell, t: int) -> None:
        counts[cell] = counts.get(cell, 0) + 1
        first[cell] = min(first.get(cell, t), t)

    for agent in agents:
        cells = agent.cells
        run_start = None
        for t in range(len(cells)):
            slow = t + 1 < len(cells) and euclidean(cells[t], cells[t + 1]) < stop_speed
            if slow and run_start is None:
                run_start = t
            if not slow and run_start is not None:
                if t - run_start >= stop_frames:
                    _add(cells[run_start], agent.start_frame + run_start)
                run_start = None
        _add(agent.last_cell, agent.start_frame + len(cells) - 1)

    return sorted(counts, key=lambda c: (-counts[c], first[c], c[1], c[0]))


def refit_extents(state: ChainState, scene: Scene, config: ChainConfig, radius: int = 2) -> list[Source]:
    """Re-estimate Σ_j from associated agents' stopping cells near μ_j."""
    out = []
    for j, src in enumerate(state.sources):
        pts = []
        for i, agent in enumerate(scene.agents):
            if state.goals[i] != j:
                continue
            for cell in stopping_locations([agent], config.stop_speed, config.stop_frames):
                if chebyshev(cell, src.mu) <= radius:
                    pts.append(cell)
        sigma = np.eye(2)
        if len(pts) >= 2:
            var = np.asarray(pts, dtype=float).var(axis=0)
            sigma = np.diag(np.maximum(var, 1.0))
        out.append(Source(src.mu, sigma))
    return out


def accept(
    state: ChainState, candidate: ChainState, log_ratio: float, rng: np.random.Generator,
) -> tuple[ChainState, bool]:
    """Metropolis–Hastings test: accept iff u < min(1, exp(log Q-ratio + Δ log π))."""
    u = rng.random()
    cur, new = state.log_post, candidate.log_post
    if new == NEG_INF and cur == NEG_INF:
        delta = 0.0
    elif cur == NEG_INF:
        return candidate, True
    elif new == NEG_INF:
        return state, False
    else:
        delta = new - cur
    log_alpha = min(0.0, log_ratio + delta)
    if u < math.exp(log_alpha):
        return candidate, True
    return state, False


# -- Sampler ------------------------------------------------------------------


class Sampler:
    """One sequential chain over {C, S, R} with a single random stream."""

    def __init__(
        self,
        scene: Scene,
        params: ModelParams,
        config: ChainConfig | None = None,
        field_params: FieldParams | None = None,
        rng: np.random.Generator | None = None,
        model: ChainModel | None = None,
    ) -> None:
        self.scene = scene
        self.params = params
        self.config = config or ChainConfig()
        self.field_params = field_params or FieldParams()
        self.rng = rng if rng is not None else np.random.default_rng(self.config.seed)
        self.model = model or ChainModel(scene, params, self.field_params)
        self.q_walkable = walkable_proposal(scene)
        self.stats = ProposalStats()

    # -- Initialization -------------------------------------------------------

    def initialize(self) -> ChainState:
        scene, rng = self.scene, self.rng
        if not scene.agents or all(len(a.cells) == 0 for a in scene.agents):
            raise InputError("scene has no observed trajectories")

        cmap = np.where(rng.random(scene.lattice.shape) < self.params.rho, 1, -1).astype(np.int8)
        for agent in scene.agents:
            for x, y in agent.cells:
                cmap[y, x] = 1

        candidates = stopping_locations(scene.agents, self.config.stop_speed, self.config.stop_frames)
        n = int(rng.poisson(self.params.eta))
        n = min(max(n, 1), len(candidates))
        sources = [Source(c) for c in candidates[:n]]

        gmm = self._fit_gmm(cmap)
        relations = self._sample_relations(cmap, sources)
        state = self.model.state(cmap, sources, relations, gmm)
        if state.log_post == NEG_INF:
            warnings.warn("initial chain state has zero posterior probability", stacklevel=2)
        logger.debug("initialized chain: N=%d, log_post=%.4f", n, state.log_post)
        return state

    def _sample_relations(self, cmap: np.ndarray, sources: list[Source]) -> np.ndarray:
        """One goal per agent from the multinomial, tilted by each agent's likelihood."""
        m, n = len(self.scene.agents), len(sources)
        theta = np.full(n, 1.0 / n)
        relations = np.zeros((m, n), dtype=np.int8)
        lam = self.params.lam
        energy = np.full((m, n), math.inf)
        for j, src in enumerate(sources):
            table = self.model.table(cmap, src.mu)
            prefix = self.model.prefix_energies(cmap, src.mu)
            for i, agent in enumerate(self.scene.agents):
                if table.reachable(agent.last_cell):
                    energy[i, j] = prefix[i] + table.energy_at(agent.last_cell)
        for i in range(m):
            logits = np.log(theta) - lam * energy[i]
            if not np.isfinite(logits).any():
                p = theta
            else:
                p = np.exp(logits - logits[np.isfinite(logits)].max())
                p = p / p.sum()
            relations[i, int(self.rng.choice(n, p=p))] = 1
        return relations

    def _fit_gmm(self, cmap: np.ndarray) -> AppearanceModel | None:
        feats = self.scene.features
        if feats is None:
            return None
        samples = feats[cmap > 0]
        if len(samples) < 2:
            return None
        return AppearanceModel.fit(samples, n_components=2, seed=self.config.seed)

    # -- Proposals ------------------------------------------------------------

    def propose_flip(self, state: ChainState) -> tuple[ChainState | None, float]:
        """Redraw one uniformly chosen cell's label from Q; None when unchanged."""
        h, w = self.scene.lattice.shape
        idx = int(self.rng.integers(h * w))
        y, x = divmod(idx, w)
        q = float(self.q_walkable[y, x])
        new = 1 if self.rng.random() < q else -1
        old = int(state.cmap[y, x])
        if new == old:
            return None, 0.0
        p_new = q if new > 0 else 1.0 - q
        p_old = q if old > 0 else 1.0 - q
        cmap = state.cmap.copy()
        cmap[y, x] = new
        cand = self.model.state(cmap, state.sources, state.relations, state.gmm)
        return cand, math.log(p_old) - math.log(p_new)

    def propose_birth_death(self, state: ChainState) -> tuple[ChainState | None, float, str]:
        if self.rng.random() < 0.5:
            return (*self._birth(state), "birth")
        return (*self._death(state), "death")

    def _birth(self, state: ChainState) -> tuple[ChainState | None, float]:
        free = state.cmap > 0
        for src in state.sources:
            free[src.mu[1], src.mu[0]] = False
        cells = np.flatnonzero(free.ravel())
        if len(cells) == 0:
            return None, 0.0
        idx = int(cells[int(self.rng.integers(len(cells)))])
        mu = self.scene.lattice.cell(idx)
        size = self.scene.lattice.extent
        sources = state.sources + [Source(mu, np.eye(2) * size**2)]
        relations = np.hstack([state.relations, np.zeros((len(state.relations), 1), dtype=np.int8)])
        return self.model.state(state.cmap, sources, relations, state.gmm), 0.0

    def _death(self, state: ChainState) -> tuple[ChainState | None, float]:
        n = state.n_sources
        if n == 0 or (n == 1 and len(self.scene.agents) > 0):
            return None, 0.0
        j = int(self.rng.integers(n))
        sources = state.sources[:j] + state.sources[j + 1:]
        relations = np.delete(state.relations, j, axis=1)
        for i in np.flatnonzero(relations.sum(axis=1) == 0):
            here = self.scene.agents[i].last_cell
            dists = [euclidean(here, s.mu) for s in sources]
            relations[i, int(np.argmin(dists))] = 1
        return self.model.state(state.cmap, sources, relations, state.gmm), 0.0

    def propose_relation(self, state: ChainState) -> tuple[ChainState | None, float]:
        """Change, add or remove one goal of one uniformly chosen agent."""
        m, n = state.relations.shape
        if m == 0 or n == 0:
            return None, 0.0
        i = int(self.rng.integers(m))
        row = state.relations[i]
        new_row = propose_relation_row(row, self.params.max_goals, self.rng)
        if new_row is None:
            return None, 0.0
        relations = state.relations.copy()
        relations[i] = new_row
        return self.model.state(state.cmap, state.sources, relations, state.gmm), 0.0

    # -- Main loop ------------------------------------------------------------

    def audit(self, state: ChainState) -> None:
        fresh = ChainModel(self.scene, self.params, self.field_params).state(
            state.cmap, state.sources, state.relations, state.gmm,
        )
        a, b = state.log_post, fresh.log_post
        if not (a == b or abs(a - b) <= 1e-6):
            raise InferenceError(f"cached log posterior drifted: {a!r} vs recomputed {b!r}")
        counts = state.relations.sum(axis=1)
        if len(counts) and (counts.min() < 1 or counts.max() > self.params.max_goals):
            raise InferenceError("relation matrix violates 1 <= goals per agent <= n")

    def step(self, state: ChainState) -> ChainState:
        mix = np.asarray(self.config.mix, dtype=float)
        kind = int(self.rng.choice(3, p=mix / mix.sum()))
        if kind == 0:
            cand, log_ratio = self.propose_flip(state)
            move = "flip"
        elif kind == 1:
            cand, log_ratio, move = self.propose_birth_death(state)
        else:
            cand, log_ratio = self.propose_relation(state)
            move = "relation"
        accepted = False
        if cand is not None:
            state, accepted = accept(state, cand, log_ratio, self.rng)
        self.stats.record(move, accepted)
        return state

    def run(self, state: ChainState | None = None) -> tuple[ChainState, ProposalStats, pd.DataFrame]:
        cfg = self.config
        if state is None:
            state = self.initialize()
        best = state if cfg.iterations == 0 else None
        rows = []
        for it in range(1, cfg.iterations + 1):
            state = self.step(state)
            if self.scene.features is not None and it % cfg.gmm_refit_period == 0:
                gmm = self._fit_gmm(state.cmap) or state.gmm
                state = self.model.state(state.cmap, state.sources, state.relations, gmm)
            if it % cfg.audit_period == 0:
                self.audit(state)
            if it > cfg.burn_in and (best is None or state.log_post > best.log_post):
                best = state
            if it % cfg.trace_period == 0:
                rows.append(self._trace_row(it, state, best))
                logger.debug("iter %d log_post=%.4f N=%d", it, state.log_post, state.n_sources)
        best = replace(best, sources=refit_extents(best, self.scene, cfg))
        logger.info(
            "chain finished: %d iterations, MAP log_post=%.4f, N=%d",
            cfg.iterations, best.log_post, best.n_sources,
        )
        trace = pd.DataFrame(rows, columns=TRACE_COLUMNS)
        return best, self.stats, trace

    def _trace_row(self, it: int, state: ChainState, best: ChainState | None) -> list:
        return [
            it,
            state.log_post,
            best.log_post if best is not None else NEG_INF,
            state.n_sources,
            *(self.stats.rate(m) for m in MOVES),
        ]


TRACE_COLUMNS = [
    "iteration", "log_post", "best_log_post", "n_sources",
    "acc_flip", "acc_birth", "acc_death", "acc_relation",
]


def propose_relation_row(row: np.ndarray, max_goals: int, rng: np.random.Generator) -> np.ndarray | None:
    """Apply one applicable edit (change / add / remove) to a relation row."""
    selected = np.flatnonzero(row)
    free = np.flatnonzero(row == 0)
    moves = []
    if len(selected) and len(free):
        moves.append("change")
    if len(selected) < max_goals and len(free):
        moves.append("add")
    if len(selected) > 1:
        moves.append("remove")
    if not moves:
        return None
    move = moves[int(rng.integers(len(moves)))]
    new = row.copy()
    if move == "change":
        new[selected[int(rng.integers(len(selected)))]] = 0
        new[free[int(rng.integers(len(free)))]] = 1
    elif move == "add":
        new[free[int(rng.integers(len(free)))]] = 1
    else:
        new[selected[int(rng.integers(len(selected)))]] = 0
    return new


def initialize(
    scene: Scene,
    params: ModelParams,
    seed: int = 0,
    config: ChainConfig | None = None,
    field_params: FieldParams | None = None,
) -> ChainState:
    config = replace(config or ChainConfig(), seed=seed)
    return Sampler(scene, params, config, field_params).initialize()


def run(
    scene: Scene,
    params: ModelParams,
    config: ChainConfig | None = None,
    field_params: FieldParams | None = None,
) -> tuple[ChainState, ProposalStats, pd.DataFrame]:
    """Initialize and run one chain; returns (MAP state, stats, trace)."""
    return Sampler(scene, params, config, field_params).run()
