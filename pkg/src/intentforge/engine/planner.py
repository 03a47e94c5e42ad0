"""Least-action planning: Dijkstra paths, path energies and cost-to-go tables."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from ..errors import InputError, Unreachable
from .config import PathCostParams
from .fields import VectorField
from .models import Cell, Scene
from .scene import NEIGHBOR_OFFSETS


@dataclass
class PlannedPath:
    """A planned cell sequence; ``energy`` excludes the length regularizer."""

    cells: list[Cell] = field(default_factory=list)
    energy: float = 0.0
    reachable: bool = True
    cost: float = 0.0

    def require(self) -> PlannedPath:
        if not self.reachable:
            raise Unreachable("goal is not reachable from start")
        return self

    @classmethod
    def unreachable(cls) -> PlannedPath:
        return cls(cells=[], energy=math.inf, reachable=False, cost=math.inf)


def step_energy(field_: VectorField, cell: Cell, nxt: Cell) -> float:
    f = field_.at(cell)
    return abs(float(f[0]) * (nxt[0] - cell[0]) + float(f[1]) * (nxt[1] - cell[1]))


def path_energy(cells: list[Cell], field_: VectorField) -> float:
    """Sum of |F(x)·Δx| over consecutive steps, F sampled at the tail cell."""
    if len(cells) < 2:
        return 0.0
    arr = np.asarray(cells, dtype=int)
    d = np.diff(arr, axis=0)
    tails = arr[:-1]
    f = field_.data[tails[:, 1], tails[:, 0]]
    return float(np.abs(f[:, 0] * d[:, 0] + f[:, 1] * d[:, 1]).sum())


def cumulative_energy(cells: list[Cell], field_: VectorField) -> np.ndarray:
    """``out[s]`` is the energy of ``cells[:s + 1]``."""
    out = np.zeros(len(cells))
    if len(cells) >= 2:
        arr = np.asarray(cells, dtype=int)
        d = np.diff(arr, axis=0)
        tails = arr[:-1]
        f = field_.data[tails[:, 1], tails[:, 0]]
        out[1:] = np.cumsum(np.abs(f[:, 0] * d[:, 0] + f[:, 1] * d[:, 1]))
    return out


def edge_weight(field_: VectorField, cell: Cell, nxt: Cell, params: PathCostParams) -> float:
    length = math.hypot(nxt[0] - cell[0], nxt[1] - cell[1])
    return step_energy(field_, cell, nxt) + params.epsilon * length


def dijkstra_path(
    scene: Scene,
    field_: VectorField,
    start: Cell,
    goal: Cell,
    params: PathCostParams,
) -> PlannedPath:
    """Globally optimal path under w(x→x') = |F(x)·Δx| + ε‖Δx‖.

    Interior cells must be walkable; the goal may not be. Equal costs are
    resolved by fewer steps, then by the row-major index of the predecessor.
    """
    lat = scene.lattice
    lat.check(start)
    lat.check(goal)
    if not scene.is_walkable(start):
        raise InputError(f"start {start} is not walkable")
    if start == goal:
        return PlannedPath(cells=[start], energy=0.0, cost=0.0)

    walk = scene.walkable
    fx, fy = field_.fx, field_.fy
    eps = params.epsilon
    n = lat.size
    dist = [math.inf] * n
    steps = [math.inf] * n
    pred = [-1] * n
    done = [False] * n
    s_idx, g_idx = lat.index(start), lat.index(goal)
    dist[s_idx] = 0.0
    steps[s_idx] = 0
    heap = [(0.0, 0, s_idx)]
    w_ = lat.width

    while heap:
        cost, nsteps, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == g_idx:
            break
        ux, uy = u % w_, u // w_
        if not walk[uy, ux]:
            continue
        for dx, dy in NEIGHBOR_OFFSETS:
            vx, vy = ux + dx, uy + dy
            if not (0 <= vx < lat.width and 0 <= vy < lat.height):
                continue
            v = vy * w_ + vx
            if done[v] or not (walk[vy, vx] or v == g_idx):
                continue
            wgt = abs(fx[uy, ux] * dx + fy[uy, ux] * dy) + eps * math.hypot(dx, dy)
            nc, ns = cost + wgt, nsteps + 1
            if (nc, ns, u) < (dist[v], steps[v], pred[v] if pred[v] >= 0 else n):
                dist[v], steps[v], pred[v] = nc, ns, u
                heapq.heappush(heap, (nc, ns, v))

    if not done[g_idx]:
        return PlannedPath.unreachable()
    cells = []
    v = g_idx
    while v != -1:
        cells.append(lat.cell(v))
        v = pred[v]
    cells.reverse()
    return PlannedPath(cells=cells, energy=path_energy(cells, field_), cost=float(dist[g_idx]))


def multi_goal_path(
    scene: Scene,
    fields: list[VectorField],
    start: Cell,
    waypoints: list[Cell],
    params: PathCostParams,
) -> PlannedPath:
    """Concatenate per-leg optimal paths; leg ``k`` uses ``fields[k]``."""
    if not waypoints:
        raise InputError("multi_goal_path needs at least one waypoint")
    if len(fields) != len(waypoints):
        raise InputError(f"{len(fields)} fields for {len(waypoints)} legs")
    cells: list[Cell] = [start]
    energy = cost = 0.0
    here = start
    for fld, goal in zip(fields, waypoints):
        leg = dijkstra_path(scene, fld, here, goal, params)
        if not leg.reachable:
            raise Unreachable(f"leg {here} -> {goal} is not reachable")
        cells.extend(leg.cells[1:])
        energy += leg.energy
        cost += leg.cost
        here = goal
    return PlannedPath(cells=cells, energy=energy, cost=cost)


def trajectory_log_likelihood(energy: float, params: PathCostParams) -> float:
    """Unnormalized log-likelihood −λ·E."""
    return -params.lam * energy


def straight_line(start: Cell, goal: Cell) -> list[Cell]:
    """Rasterized segment, one Chebyshev step per frame."""
    n = max(abs(goal[0] - start[0]), abs(goal[1] - start[1]))
    if n == 0:
        return [start]
    t = np.arange(n + 1) / n
    xs = np.rint(start[0] + t * (goal[0] - start[0])).astype(int)
    ys = np.rint(start[1] + t * (goal[1] - start[1])).astype(int)
    return [(int(x), int(y)) for x, y in zip(xs, ys)]


# -- Cost-to-go tables --------------------------------------------------------


def transition_graph(
    scene: Scene, field_: VectorField, goal: Cell, params: PathCostParams,
) -> sparse.csr_matrix:
    """Sparse edge-weight matrix over row-major node indices."""
    lat = scene.lattice
    h, w = lat.shape
    walk = scene.walkable
    enter = walk.copy()
    enter[goal[1], goal[0]] = True
    ys, xs = np.mgrid[0:h, 0:w]
    rows, cols, vals = [], [], []
    for dx, dy in NEIGHBOR_OFFSETS:
        vx, vy = xs + dx, ys + dy
        ok = walk & (vx >= 0) & (vx < w) & (vy >= 0) & (vy < h)
        ok[ok] &= enter[vy[ok], vx[ok]]
        ux, uy = xs[ok], ys[ok]
        wgt = np.abs(field_.fx[uy, ux] * dx + field_.fy[uy, ux] * dy) + params.epsilon * math.hypot(dx, dy)
        rows.append(uy * w + ux)
        cols.append((uy + dy) * w + (ux + dx))
        vals.append(wgt)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(lat.size, lat.size))


@dataclass
class CostToGo:
    """Optimal cost and energy from every cell to one goal."""

    goal: Cell
    cost: np.ndarray  # (h, w), inf where unreachable
    energy: np.ndarray  # (h, w), energy part only
    successor: np.ndarray  # (h, w) row-major index of the next cell, -1 at goal/unreachable

    def reachable(self, cell: Cell) -> bool:
        return bool(np.isfinite(self.cost[cell[1], cell[0]]))

    def cost_at(self, cell: Cell) -> float:
        return float(self.cost[cell[1], cell[0]])

    def energy_at(self, cell: Cell) -> float:
        return float(self.energy[cell[1], cell[0]])

    def path_from(self, cell: Cell) -> PlannedPath:
        if not self.reachable(cell):
            return PlannedPath.unreachable()
        w = self.cost.shape[1]
        cells = [cell]
        here = cell
        while here != self.goal:
            nxt = int(self.successor[here[1], here[0]])
            here = (nxt % w, nxt // w)
            cells.append(here)
        return PlannedPath(
            cells=cells, energy=self.energy_at(cell), cost=self.cost_at(cell),
        )


def cost_to_go(scene: Scene, field_: VectorField, goal: Cell, params: PathCostParams) -> CostToGo:
    """One reverse Dijkstra from ``goal`` over the transposed edge graph."""
    lat = scene.lattice
    lat.check(goal)
    h, w = lat.shape
    graph = transition_graph(scene, field_, goal, params)
    g_idx = lat.index(goal)
    dist, pred = csgraph.dijkstra(
        graph.T.tocsr(), directed=True, indices=g_idx, return_predecessors=True,
    )
    # on the reversed graph, pred[u] is the next cell from u toward the goal
    succ = np.where(pred < 0, -1, pred)
    energy = np.full(lat.size, np.inf)
    energy[g_idx] = 0.0
    order = np.argsort(dist, kind="stable")
    fx = field_.fx.ravel()
    fy = field_.fy.ravel()
    for u in order:
        if not np.isfinite(dist[u]) or u == g_idx:
            continue
        v = succ[u]
        dx = (v % w) - (u % w)
        dy = (v // w) - (u // w)
        energy[u] = abs(fx[u] * dx + fy[u] * dy) + energy[v]
    return CostToGo(
        goal=goal,
        cost=dist.reshape(h, w),
        energy=energy.reshape(h, w),
        successor=succ.reshape(h, w),
    )


def cost_from(scene: Scene, field_: VectorField, start: Cell, goal: Cell, params: PathCostParams) -> np.ndarray:
    """Optimal cost from ``start`` to every cell, shape (h, w)."""
    graph = transition_graph(scene, field_, goal, params)
    dist = csgraph.dijkstra(graph, directed=True, indices=scene.lattice.index(start))
    return dist.reshape(scene.lattice.shape)


def path_likelihood_map(
    scene: Scene, field_: VectorField, start: Cell, goal: Cell, params: PathCostParams,
) -> np.ndarray:
    """Relative likelihood of the best start→goal path through each cell.

    ``exp(−λ (C(start→x) + C(x→goal) − C*))``: 1 on optimal paths, 0 where
    no path passes.
    """
    through = cost_from(scene, field_, start, goal, params) + cost_to_go(scene, field_, goal, params).cost
    best = through[start[1], start[0]]
    if not np.isfinite(best):
        return np.zeros(scene.lattice.shape)
    with np.errstate(invalid="ignore"):
        out = np.exp(-params.lam * (through - best))
    return np.where(np.isfinite(through), out, 0.0)
