"""Lattice neighborhoods and scene validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .models import BEHAVIORS, FEATURE_DIMS, Cell, Scene, chebyshev

# 8 neighbor offsets in row-major order of the target cell, then stay.
NEIGHBOR_OFFSETS: tuple[Cell, ...] = (
    (-1, -1), (0, -1), (1, -1),
    (-1, 0), (1, 0),
    (-1, 1), (0, 1), (1, 1),
)
STAY: Cell = (0, 0)
ACTIONS: tuple[Cell, ...] = NEIGHBOR_OFFSETS + (STAY,)

ACTION_LENGTH: dict[Cell, float] = {
    a: math.hypot(a[0], a[1]) for a in ACTIONS
}


def neighbors(scene: Scene, cell: Cell) -> list[Cell]:
    """All in-lattice 8-neighbors, row-major."""
    scene.lattice.check(cell)
    x, y = cell
    out = []
    for dx, dy in NEIGHBOR_OFFSETS:
        nxt = (x + dx, y + dy)
        if scene.lattice.contains(nxt):
            out.append(nxt)
    return out


def walkable_neighbors(scene: Scene, cell: Cell) -> list[Cell]:
    """In-lattice 8-neighbors with c = +1, row-major."""
    return [n for n in neighbors(scene, cell) if scene.is_walkable(n)]


def legal_moves(scene: Scene, cell: Cell, goal: Cell | None = None) -> list[Cell]:
    """Walkable targets of the 9 actions (stay last); ``goal`` is always enterable."""
    scene.lattice.check(cell)
    x, y = cell
    out = []
    for dx, dy in ACTIONS:
        nxt = (x + dx, y + dy)
        if not scene.lattice.contains(nxt):
            continue
        if scene.is_walkable(nxt) or nxt == goal:
            out.append(nxt)
    return out


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_scene(scene: Scene) -> ValidationReport:
    """Check every scene invariant.

    Sources on non-walkable cells are reported as warnings, not violations.
    """
    violations: list[str] = []
    warnings: list[str] = []
    lat = scene.lattice

    if lat.width < 2 or lat.height < 2:
        violations.append(f"lattice {lat.width}x{lat.height} smaller than 2x2")
    if scene.cmap.shape != lat.shape:
        violations.append(f"constraint map shape {scene.cmap.shape} != {lat.shape}")
        return ValidationReport(violations, warnings)
    if not np.all(np.isin(scene.cmap, (-1, 1))):
        violations.append("constraint map labels must be -1 or +1")

    for j, src in enumerate(scene.sources):
        if not lat.contains(src.mu):
            violations.append(f"source {j}: mu {src.mu} outside lattice")
            continue
        if not src.is_valid():
            violations.append(f"source {j}: sigma not symmetric positive-definite")
        if not scene.is_walkable(src.mu):
            warnings.append(f"source {j}: mu {src.mu} on non-walkable cell")

    for agent in scene.agents:
        violations.extend(_trajectory_violations(scene, agent.id, agent.cells, agent.horizon))

    if scene.features is not None:
        expected = lat.shape + (FEATURE_DIMS,)
        if scene.features.shape != expected:
            violations.append(f"feature channel shape {scene.features.shape} != {expected}")

    truth = scene.truth
    if truth is not None:
        m, n = len(scene.agents), len(truth.sources)
        if truth.relations.size and truth.relations.shape != (m, n):
            violations.append(f"truth relations shape {truth.relations.shape} != {(m, n)}")
        for i, z in enumerate(truth.behaviors):
            if z not in BEHAVIORS:
                violations.append(f"truth behavior {i}: unknown label {z!r}")
        for i, cells in enumerate(truth.trajectories):
            violations.extend(_trajectory_violations(scene, f"truth {i}", cells, len(cells)))
    return ValidationReport(violations, warnings)


def _trajectory_violations(scene: Scene, label, cells, horizon) -> list[str]:
    out = []
    if not cells:
        return [f"agent {label}: empty trajectory"]
    if not (0 < len(cells) <= horizon):
        out.append(f"agent {label}: t0={len(cells)} outside (0, T={horizon}]")
    for t, cell in enumerate(cells):
        if not scene.lattice.contains(cell):
            out.append(f"agent {label}: frame {t} cell {tuple(cell)} outside lattice")
    for t in range(1, len(cells)):
        if chebyshev(cells[t - 1], cells[t]) > 1:
            out.append(f"agent {label}: frame {t} step > 1")
    return out
