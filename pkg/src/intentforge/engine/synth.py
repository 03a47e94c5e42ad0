"""Toy scene layouts and simulated agents with known intents."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import GenerationError, InputError
from .config import FieldParams, PathCostParams, SynthConfig
from .fields import FieldCache
from .models import (
    FEATURE_DIMS,
    Agent,
    Box,
    Cell,
    GroundTruth,
    Lattice,
    Scene,
    Source,
    chebyshev,
    euclidean,
)
from .planner import dijkstra_path, straight_line
from .scene import legal_moves

logger = logging.getLogger(__name__)

LAYOUT_ATTEMPTS = 100
RESPAWN_TRIES = 20
JITTER_PROB = 0.2
RATIO_TOLERANCE = 0.02
BOX_RADIUS = 2
MIN_SPAWN_GAP = 3


# -- Layout ---------------------------------------------------------------------


def is_connected(cmap: np.ndarray) -> bool:
    """True when the walkable cells form one 8-connected region."""
    walk = cmap > 0
    if not walk.any():
        return False
    _, n = ndimage.label(walk, structure=np.ones((3, 3), dtype=int))
    return n == 1


def obstacle_ratio(cmap: np.ndarray) -> float:
    return float((cmap < 0).mean())


def rectangle_layout(config: SynthConfig, rng: np.random.Generator) -> np.ndarray | None:
    """Drop random rectangles until the obstacle ratio is within tolerance.

    Rectangles that would overshoot the ratio or disconnect the walkable
    region are discarded; ``None`` when the layout stalls.
    """
    h, w = config.height, config.width
    cmap = np.ones((h, w), dtype=np.int8)
    target = config.obstacle_ratio
    if target == 0:
        return cmap
    max_w, max_h = max(2, w // 5), max(2, h // 5)
    rejected = 0
    while obstacle_ratio(cmap) < target - RATIO_TOLERANCE:
        rw = int(rng.integers(1, min(max_w, w) + 1))
        rh = int(rng.integers(1, min(max_h, h) + 1))
        x0 = int(rng.integers(0, w - rw + 1))
        y0 = int(rng.integers(0, h - rh + 1))
        trial = cmap.copy()
        trial[y0:y0 + rh, x0:x0 + rw] = -1
        if obstacle_ratio(trial) > target + RATIO_TOLERANCE or not is_connected(trial):
            rejected += 1
            if rejected > 50 * (w + h):
                return None
            continue
        cmap = trial
    return cmap


def truth_box(mu: Cell, lattice: Lattice, radius: int = BOX_RADIUS) -> Box:
    x, y = mu
    return (
        max(0, x - radius),
        max(0, y - radius),
        min(lattice.width - 1, x + radius),
        min(lattice.height - 1, y + radius),
    )


def place_sources(cmap: np.ndarray, n: int, gap: float, rng: np.random.Generator) -> list[Cell] | None:
    """``n`` walkable cells pairwise at least ``gap`` apart, or ``None``."""
    ys, xs = np.nonzero(cmap > 0)
    order = rng.permutation(len(xs))
    chosen: list[Cell] = []
    for k in order:
        cell = (int(xs[k]), int(ys[k]))
        if all(euclidean(cell, c) >= gap for c in chosen):
            chosen.append(cell)
            if len(chosen) == n:
                return chosen
    return None


def color_features(cmap: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Two-cluster color noise: ground-like walkable cells, darker obstacles."""
    h, w = cmap.shape
    ground = np.array([0.62, 0.60, 0.55, 1.0])
    blocked = np.array([0.30, 0.22, 0.15, 0.0])
    base = np.where((cmap > 0)[..., None], ground, blocked)
    noise = rng.normal(0.0, 0.05, size=(h, w, FEATURE_DIMS))
    noise[..., 3] = 0.0
    return base + noise


def generate_scene(config: SynthConfig, rng: np.random.Generator | None = None) -> Scene:
    """Random rectangle layout with ground-truth sources and boxes, no agents."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    lattice = Lattice(config.width, config.height)
    for attempt in range(1, LAYOUT_ATTEMPTS + 1):
        cmap = rectangle_layout(config, rng)
        if cmap is None:
            continue
        mus = place_sources(cmap, config.n_sources, config.min_source_gap, rng)
        if mus is None:
            continue
        sources = [Source(mu) for mu in mus]
        truth = GroundTruth(sources=sources, boxes=[truth_box(mu, lattice) for mu in mus])
        features = color_features(cmap, rng) if config.features else None
        logger.debug(
            "layout accepted after %d attempt(s): ratio %.3f, %d sources",
            attempt, obstacle_ratio(cmap), len(sources),
        )
        return Scene(lattice, cmap, features=features, truth=truth)
    raise GenerationError(
        f"no connected layout with obstacle ratio {config.obstacle_ratio} "
        f"and {config.n_sources} sources after {LAYOUT_ATTEMPTS} attempts"
    )


# -- Agents ----------------------------------------------------------------------


@dataclass
class Walker:
    """Moves simulated agents along least-action paths of the true sources."""

    scene: Scene
    config: SynthConfig
    rng: np.random.Generator
    field_params: FieldParams = field(default_factory=FieldParams)
    path_params: PathCostParams = field(default_factory=PathCostParams)

    def __post_init__(self) -> None:
        self.cache = FieldCache(self.scene.lattice.shape, self.field_params)
        self.sources = self.scene.truth.sources

    def goal(self, j: int) -> Cell:
        return self.sources[j].mu

    def plan(self, start: Cell, j: int) -> list[Cell]:
        fld = self.cache.cumulative(self.scene, self.goal(j))
        return dijkstra_path(self.scene, fld, start, self.goal(j), self.path_params).cells

    def _jitter(self, here: Cell, planned: Cell) -> Cell | None:
        alts = [
            c for c in legal_moves(self.scene, planned)
            if c != planned and chebyshev(c, here) == 1
        ]
        if not alts:
            return None
        return alts[int(self.rng.integers(len(alts)))]

    def walk(self, start: Cell, j: int, limit: int | None = None) -> list[Cell]:
        """Frames after ``start`` heading to source ``j``; at most ``limit`` moves."""
        goal = self.goal(j)
        out: list[Cell] = []
        here = start
        path = self.plan(here, j)
        k, moves = 1, 0
        while here != goal and (limit is None or moves < limit):
            if k >= len(path):
                break
            nxt = path[k]
            k += 1
            if self.config.noise > 0 and nxt != goal and self.rng.random() < JITTER_PROB:
                alt = self._jitter(here, nxt)
                replanned = self.plan(alt, j) if alt is not None else []
                if replanned:
                    nxt, path, k = alt, replanned, 1
            while self.config.speed < 1 and self.rng.random() > self.config.speed:
                out.append(here)
            out.append(nxt)
            here = nxt
            moves += 1
        return out

    def spawn(self, goals: list[int]) -> Cell | None:
        walk = self.scene.walkable
        ys, xs = np.nonzero(walk)
        targets = [self.goal(j) for j in goals]
        for _ in range(RESPAWN_TRIES):
            k = int(self.rng.integers(len(xs)))
            cell = (int(xs[k]), int(ys[k]))
            if any(chebyshev(cell, g) < MIN_SPAWN_GAP for g in targets):
                continue
            if all(self.plan(cell, j) for j in goals):
                return cell
        return None


def _draw_behavior(config: SynthConfig, n_sources: int, rng: np.random.Generator) -> str:
    z = ("single", "sequential", "change")[int(rng.choice(3, p=np.asarray(config.mix)))]
    if z != "single" and n_sources < 2:
        return "single"
    return z


def _draw_goals(z: str, config: SynthConfig, n_sources: int, rng: np.random.Generator) -> list[int]:
    if z == "single":
        return [int(rng.integers(n_sources))]
    if z == "change":
        return [int(j) for j in rng.choice(n_sources, size=2, replace=False)]
    k = int(rng.integers(2, min(config.max_goals, n_sources) + 1))
    return [int(j) for j in rng.choice(n_sources, size=k, replace=False)]


def simulate_agent(walker: Walker, z: str, goals: list[int]) -> tuple[list[Cell], Cell | None] | None:
    """Full ground-truth track for one agent, or ``None`` when no spawn works."""
    cfg, rng = walker.config, walker.rng
    start = walker.spawn(goals)
    if start is None:
        return None
    cells = [start]
    switch: Cell | None = None
    if z == "change":
        first, second = goals
        planned = len(walker.plan(start, first)) - 1
        lo = max(1, math.ceil(0.2 * planned))
        hi = max(lo, min(planned - 1, math.floor(0.8 * planned)))
        steps = int(rng.integers(lo, hi + 1))
        cells += walker.walk(start, first, limit=steps)
        switch = cells[-1]
        cells += walker.walk(switch, second)
    else:
        for k, j in enumerate(goals):
            cells += walker.walk(cells[-1], j)
            if k < len(goals) - 1:
                cells += [cells[-1]] * cfg.dwell
    # tracks end on arrival unless a final hold is configured
    hold = math.ceil(cfg.hold_factor * (len(cells) - 1)) + cfg.end_dwell
    cells += [cells[-1]] * hold
    return cells, switch


def simulate_agents(
    scene: Scene,
    config: SynthConfig,
    rng: np.random.Generator,
    field_params: FieldParams | None = None,
    path_params: PathCostParams | None = None,
) -> GroundTruth:
    """Ground-truth tracks, relations and behaviors for ``config.n_agents`` agents."""
    if scene.truth is None or not scene.truth.sources:
        raise InputError("simulation needs ground-truth sources")
    walker = Walker(
        scene, config, rng,
        field_params or FieldParams(), path_params or PathCostParams(),
    )
    n = len(walker.sources)
    relations = np.zeros((config.n_agents, n), dtype=np.int8)
    behaviors, tracks, goal_lists, switches = [], [], [], []
    for i in range(config.n_agents):
        z = _draw_behavior(config, n, rng)
        for _ in range(RESPAWN_TRIES):
            goals = _draw_goals(z, config, n, rng)
            made = simulate_agent(walker, z, goals)
            if made is not None:
                break
        else:
            raise GenerationError(f"agent {i}: no reachable spawn after {RESPAWN_TRIES} tries")
        cells, switch = made
        relations[i, goals] = 1
        behaviors.append(z)
        tracks.append(cells)
        goal_lists.append(goals)
        switches.append(switch)
    logger.debug(
        "simulated %d agents: %s", config.n_agents,
        {z: behaviors.count(z) for z in ("single", "sequential", "change")},
    )
    return GroundTruth(
        sources=scene.truth.sources,
        boxes=scene.truth.boxes,
        relations=relations,
        behaviors=behaviors,
        trajectories=tracks,
        goals=goal_lists,
        switch_cells=switches,
    )


def observed_length(length: int, fraction: float) -> int:
    return max(1, math.ceil(fraction * length - 1e-9))


def truncate_observations(trajectories: list[list[Cell]], fraction: float) -> list[list[Cell]]:
    """Keep the first ceil(fraction · length) frames of every trajectory."""
    if not (0 < fraction <= 1):
        raise InputError(f"observed fraction {fraction} outside (0, 1]")
    return [list(cells[:observed_length(len(cells), fraction)]) for cells in trajectories]


def observe(scene: Scene, truth: GroundTruth, fraction: float) -> Scene:
    """Attach agents whose observed prefixes are the truncated truth tracks."""
    prefixes = truncate_observations(truth.trajectories, fraction)
    agents = [
        Agent(id=f"a{i:03d}", cells=prefix, horizon=len(full))
        for i, (prefix, full) in enumerate(zip(prefixes, truth.trajectories))
    ]
    return Scene(
        scene.lattice, scene.cmap, agents=agents, features=scene.features,
        truth=truth, name=scene.name,
    )


def synthesize(config: SynthConfig, name: str = "") -> Scene:
    """Layout, agents and observed prefixes from one seed."""
    rng = np.random.default_rng(config.seed)
    scene = generate_scene(config, rng)
    truth = simulate_agents(scene, config, rng)
    out = observe(scene, truth, config.observed_fraction)
    out.name = name or f"toy-s{config.n_sources}-a{config.n_agents}-seed{config.seed}"
    logger.info(
        "synthesized %s: %dx%d, ratio %.3f, %d sources, %d agents",
        out.name, config.width, config.height, obstacle_ratio(scene.cmap),
        config.n_sources, config.n_agents,
    )
    return out


# -- Archetype suite ---------------------------------------------------------------

ARCHETYPES = ("queue", "dwell", "exit")
AXES: tuple[Cell, ...] = ((1, 0), (0, 1), (-1, 0), (0, -1))


def _clip(cell: Cell, lattice: Lattice) -> Cell:
    return (min(max(cell[0], 0), lattice.width - 1), min(max(cell[1], 0), lattice.height - 1))


def queue_track(mu: Cell, axis: Cell, side: int, rng: np.random.Generator, reach: int = 8) -> list[Cell]:
    """Approach along ``axis``, creep one slot every 3 frames, leave sideways."""
    start_gap = reach + int(rng.integers(0, 3))
    start = (mu[0] + axis[0] * start_gap, mu[1] + axis[1] * start_gap)
    cells = [start]
    for cell in straight_line(start, mu)[1:]:
        cells += [cells[-1]] * 2 + [cell]
    perp = (-axis[1] * side, axis[0] * side)
    out = (mu[0] + perp[0] * reach, mu[1] + perp[1] * reach)
    cells += straight_line(mu, out)[1:]
    return cells


def dwell_track(mu: Cell, rng: np.random.Generator, frames: int = 30, radius: int = 2, reach: int = 8) -> list[Cell]:
    """Walk in, then wander within ``radius`` of ``mu`` for about ``frames`` frames."""
    angle = rng.uniform(0, 2 * math.pi)
    start = (int(round(mu[0] + reach * math.cos(angle))), int(round(mu[1] + reach * math.sin(angle))))
    cells = straight_line(start, mu)
    for _ in range(frames + int(rng.integers(-5, 6))):
        x, y = cells[-1]
        dx, dy = int(rng.integers(-1, 2)), int(rng.integers(-1, 2))
        nxt = (x + dx, y + dy)
        if chebyshev(nxt, mu) > radius:
            nxt = (x, y)
        cells.append(nxt)
    return cells


def exit_track(mu: Cell, normal: Cell, rng: np.random.Generator, reach: int = 9) -> list[Cell]:
    """A straight approach from the half-plane facing ``normal``; ends at ``mu``."""
    base = math.atan2(normal[1], normal[0])
    angle = base + rng.uniform(-1.4, 1.4)
    start = (int(round(mu[0] + reach * math.cos(angle))), int(round(mu[1] + reach * math.sin(angle))))
    return straight_line(start, mu)


def generate_archetype_suite(
    seed: int = 0,
    n_sources: int = 30,
    tile: int = 25,
    agents_per_source: int = 8,
) -> Scene:
    """Open tiled scene with one source per tile and archetype-labelled agents.

    Every source is drawn as queue, dwell or exit in equal proportion; its
    agents are generated by the matching track generator and associated
    with it in the ground-truth relations.
    """
    rng = np.random.default_rng(seed)
    cols = math.ceil(math.sqrt(n_sources))
    rows = math.ceil(n_sources / cols)
    lattice = Lattice(cols * tile, rows * tile)
    labels = [ARCHETYPES[k % len(ARCHETYPES)] for k in range(n_sources)]
    labels = [labels[k] for k in rng.permutation(n_sources)]

    sources, agents, tracks, owners = [], [], [], []
    for j in range(n_sources):
        r, c = divmod(j, cols)
        mu = (c * tile + tile // 2, r * tile + tile // 2)
        sources.append(Source(mu))
        label = labels[j]
        axis = AXES[int(rng.integers(4))]
        side = 1 if rng.random() < 0.5 else -1
        for _ in range(agents_per_source):
            if label == "queue":
                cells = queue_track(mu, axis, side, rng)
            elif label == "dwell":
                cells = dwell_track(mu, rng)
            else:
                cells = exit_track(mu, axis, rng)
            cells = [_clip(cell, lattice) for cell in cells]
            tracks.append(cells)
            owners.append(j)

    relations = np.zeros((len(tracks), n_sources), dtype=np.int8)
    for i, (cells, j) in enumerate(zip(tracks, owners)):
        relations[i, j] = 1
        agents.append(Agent(id=f"a{i:04d}", cells=cells, horizon=len(cells)))
    truth = GroundTruth(
        sources=sources,
        boxes=[truth_box(s.mu, lattice) for s in sources],
        relations=relations,
        behaviors=["single"] * len(tracks),
        trajectories=[list(t) for t in tracks],
        goals=[[j] for j in owners],
        switch_cells=[None] * len(tracks),
        archetypes=labels,
    )
    return Scene(
        lattice, np.ones(lattice.shape, dtype=np.int8), sources=sources,
        agents=agents, truth=truth, name=f"archetypes-seed{seed}",
    )
