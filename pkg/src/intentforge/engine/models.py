"""Data models for scenes, agents, sources and intent state."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import OutOfBounds

Cell = tuple[int, int]  # (x, y)
Box = tuple[int, int, int, int]  # (x0, y0, x1, y1), inclusive

BEHAVIORS: tuple[str, ...] = ("single", "sequential", "change")

FEATURE_DIMS = 4  # r, g, b, ground flag


@dataclass(frozen=True)
class Lattice:
    """A width × height grid of cells with 8-connectivity."""

    width: int
    height: int

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape, indexed ``[y, x]``."""
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.width * self.height

    @property
    def extent(self) -> int:
        """Scene size used for birth covariances."""
        return max(self.width, self.height)

    def contains(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def check(self, cell: Cell) -> None:
        if not self.contains(cell):
            raise OutOfBounds(
                f"cell {tuple(cell)} outside {self.width}x{self.height} lattice"
            )

    def index(self, cell: Cell) -> int:
        """Row-major node index."""
        return cell[1] * self.width + cell[0]

    def cell(self, index: int) -> Cell:
        return (int(index % self.width), int(index // self.width))

    def on_boundary(self, cell: Cell) -> bool:
        x, y = cell
        return x in (0, self.width - 1) or y in (0, self.height - 1)


@dataclass
class Source:
    """A latent functional object: location ``mu`` and spatial covariance ``sigma``."""

    mu: Cell
    sigma: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self) -> None:
        self.mu = (int(self.mu[0]), int(self.mu[1]))
        self.sigma = np.asarray(self.sigma, dtype=float).reshape(2, 2)

    def is_valid(self) -> bool:
        if not np.all(np.isfinite(self.sigma)):
            return False
        if not np.allclose(self.sigma, self.sigma.T):
            return False
        return bool(np.all(np.linalg.eigvalsh(self.sigma) > 0))

    def to_dict(self) -> dict:
        return {
            "mu": [self.mu[0], self.mu[1]],
            "sigma": [[float(v) for v in row] for row in self.sigma],
        }

    @classmethod
    def from_dict(cls, data: dict) -> Source:
        return cls(mu=tuple(data["mu"]), sigma=np.array(data.get("sigma", np.eye(2))))


@dataclass
class Trajectory:
    """Time-ordered cells with an observed/predicted split.

    ``cells[:t0]`` were observed; the track is defined up to ``horizon``
    frames counted from ``start_frame``.
    """

    cells: list[Cell]
    t0: int
    horizon: int
    start_frame: int = 0

    @property
    def observed(self) -> list[Cell]:
        return self.cells[: self.t0]

    @property
    def predicted(self) -> list[Cell]:
        return self.cells[self.t0:]

    def frames(self) -> list[tuple[int, int, int]]:
        return [(self.start_frame + i, x, y) for i, (x, y) in enumerate(self.cells)]


@dataclass
class Agent:
    """A tracked person with an observed trajectory prefix."""

    id: str
    cells: list[Cell]
    horizon: int
    start_frame: int = 0

    def __post_init__(self) -> None:
        self.cells = [(int(x), int(y)) for x, y in self.cells]

    @property
    def start_cell(self) -> Cell:
        return self.cells[0]

    @property
    def last_cell(self) -> Cell:
        return self.cells[-1]

    @property
    def t0(self) -> int:
        return len(self.cells)

    def trajectory(self) -> Trajectory:
        return Trajectory(list(self.cells), self.t0, self.horizon, self.start_frame)


@dataclass
class GroundTruth:
    """Generating truth attached to synthetic scenes, used by evaluation."""

    sources: list[Source] = field(default_factory=list)
    boxes: list[Box] = field(default_factory=list)
    relations: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.int8))
    behaviors: list[str] = field(default_factory=list)
    trajectories: list[list[Cell]] = field(default_factory=list)
    goals: list[list[int]] = field(default_factory=list)
    switch_cells: list[Cell | None] = field(default_factory=list)
    archetypes: list[str] | None = None

    def __post_init__(self) -> None:
        self.relations = np.asarray(self.relations, dtype=np.int8)


@dataclass
class Scene:
    """The lattice world: constraint map, sources, agents and optional features.

    Arrays are read-only once the scene is built; use :meth:`with_cmap`
    or :func:`dataclasses.replace` to derive a new scene.
    """

    lattice: Lattice
    cmap: np.ndarray
    sources: list[Source] = field(default_factory=list)
    agents: list[Agent] = field(default_factory=list)
    features: np.ndarray | None = None
    truth: GroundTruth | None = None
    name: str = ""

    def __post_init__(self) -> None:
        self.cmap = np.array(self.cmap, dtype=np.int8)
        self.cmap.setflags(write=False)
        if self.features is not None:
            self.features = np.array(self.features, dtype=float)
            self.features.setflags(write=False)

    @classmethod
    def open(cls, width: int, height: int, **kwargs) -> Scene:
        """An all-walkable scene."""
        return cls(Lattice(width, height), np.ones((height, width), dtype=np.int8), **kwargs)

    @property
    def walkable(self) -> np.ndarray:
        return self.cmap > 0

    def is_walkable(self, cell: Cell) -> bool:
        return bool(self.cmap[cell[1], cell[0]] > 0)

    def with_cmap(self, cmap: np.ndarray) -> Scene:
        return replace(self, cmap=cmap)

    def with_sources(self, sources: list[Source]) -> Scene:
        return replace(self, sources=list(sources))

    def with_agents(self, agents: list[Agent]) -> Scene:
        return replace(self, agents=list(agents))


@dataclass
class IntentState:
    """Agent-to-source relations and behavior labels."""

    relations: np.ndarray
    behaviors: list[str]
    kappa: float = 0.3
    gamma: float = 0.1
    max_goals: int = 3

    def __post_init__(self) -> None:
        self.relations = np.asarray(self.relations, dtype=np.int8)

    def violations(self) -> list[str]:
        problems: list[str] = []
        counts = self.relations.sum(axis=1) if self.relations.size else np.zeros(
            len(self.relations), dtype=int,
        )
        for i, n in enumerate(counts):
            if n < 1:
                problems.append(f"agent {i}: no goal selected")
            elif n > self.max_goals:
                problems.append(f"agent {i}: {int(n)} goals exceed n={self.max_goals}")
        for i, z in enumerate(self.behaviors):
            if z not in BEHAVIORS:
                problems.append(f"agent {i}: unknown behavior {z!r}")
            elif z == "single" and i < len(counts) and counts[i] != 1:
                problems.append(f"agent {i}: single behavior with {int(counts[i])} goals")
        if not (0.0 <= self.kappa <= 1.0):
            problems.append(f"kappa {self.kappa} outside [0, 1]")
        if not (0.0 <= self.gamma <= 1.0):
            problems.append(f"gamma {self.gamma} outside [0, 1]")
        return problems


def euclidean(a: Cell, b: Cell) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))
