"""Functional classes of sources from how agents move around them.

Each source gets density, activeness and entropy maps of its associated
agents in a square window, summarized as log-polar histograms and grouped
by K-means that aligns descriptors over the 8 dihedral transforms.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import InputError
from .config import ClusterConfig
from .models import Cell, Scene, Source

logger = logging.getLogger(__name__)

MAP_NAMES = ("density", "activeness", "entropy")
DIRECTIONS = 8


@dataclass
class FeatureMaps:
    """Per-cell statistics in a (2w+1)² window centred on a source, indexed ``[dy + w, dx + w]``."""

    half_width: int
    density: np.ndarray
    activeness: np.ndarray
    entropy: np.ndarray

    @classmethod
    def zeros(cls, half_width: int) -> FeatureMaps:
        size = 2 * half_width + 1
        return cls(half_width, *(np.zeros((size, size)) for _ in MAP_NAMES))

    def stack(self) -> np.ndarray:
        return np.stack([self.density, self.activeness, self.entropy])


def direction_bin(dx: float, dy: float, bins: int = DIRECTIONS) -> int:
    """Angular sector of a direction, sectors centred on multiples of 2π/bins."""
    width = 2 * math.pi / bins
    return int(math.floor((math.atan2(dy, dx) + width / 2) / width)) % bins


def build_feature_maps(
    source: Source, trajectories: list[list[Cell]], half_width: int = 10,
) -> FeatureMaps:
    """Maps accumulated from the frames of ``trajectories`` falling in the window.

    Activeness is the mean step length leaving a cell; entropy is that of
    the cell's move-direction histogram, stays excluded.
    """
    w = half_width
    size = 2 * w + 1
    maps = FeatureMaps.zeros(w)
    speed_sum = np.zeros((size, size))
    speed_n = np.zeros((size, size))
    moves = np.zeros((size, size, DIRECTIONS))
    mx, my = source.mu
    for cells in trajectories:
        for t, (x, y) in enumerate(cells):
            ox, oy = x - mx + w, y - my + w
            if not (0 <= ox < size and 0 <= oy < size):
                continue
            maps.density[oy, ox] += 1
            if t + 1 < len(cells):
                nx, ny = cells[t + 1]
                dx, dy = nx - x, ny - y
                speed_sum[oy, ox] += math.hypot(dx, dy)
                speed_n[oy, ox] += 1
                if dx or dy:
                    moves[oy, ox, direction_bin(dx, dy)] += 1
    np.divide(speed_sum, speed_n, out=maps.activeness, where=speed_n > 0)
    counts = moves.sum(axis=2)
    busy = counts > 0
    if busy.any():
        maps.entropy[busy] = stats.entropy(moves[busy], axis=1)
    return maps


def radial_edges(half_width: int, radial_bins: int) -> np.ndarray:
    """Bin edges: [0, 1) for the centre, then log-spaced out to the window corner."""
    outer = half_width * math.sqrt(2) + 1e-9
    return np.concatenate([[0.0], np.geomspace(1.0, outer, radial_bins)])


def log_polar(values: np.ndarray, radial_bins: int = 5, angular_bins: int = DIRECTIONS) -> np.ndarray:
    """L1-normalized (radial, angular) histogram of one window map.

    The centre cell has no direction; its mass is spread evenly over the
    angular bins of the innermost ring.
    """
    size = values.shape[0]
    w = size // 2
    edges = radial_edges(w, radial_bins)
    hist = np.zeros((radial_bins, angular_bins))
    for oy in range(size):
        for ox in range(size):
            v = values[oy, ox]
            if v == 0:
                continue
            dx, dy = ox - w, oy - w
            if dx == 0 and dy == 0:
                hist[0, :] += v / angular_bins
                continue
            r = math.hypot(dx, dy)
            rb = min(int(np.searchsorted(edges, r, side="right")) - 1, radial_bins - 1)
            hist[rb, direction_bin(dx, dy, angular_bins)] += v
    total = hist.sum()
    return hist / total if total > 0 else hist


def descriptor(maps: FeatureMaps, radial_bins: int = 5, angular_bins: int = DIRECTIONS) -> np.ndarray:
    """Density, activeness and entropy histograms concatenated."""
    return np.concatenate([
        log_polar(m, radial_bins, angular_bins).ravel() for m in maps.stack()
    ])


def dihedral(desc: np.ndarray, rotation: int, mirror: bool, radial_bins: int = 5) -> np.ndarray:
    """Apply a quarter-turn rotation count and optional mirror as angular-bin permutations.

    One quarter turn of the window (``np.rot90``) rolls the angular index
    by −2; a mirror across the x axis maps bin ``a`` to ``−a``.
    """
    h = desc.reshape(len(MAP_NAMES), radial_bins, DIRECTIONS)
    if mirror:
        h = h[..., (-np.arange(DIRECTIONS)) % DIRECTIONS]
    h = np.roll(h, -2 * rotation, axis=-1)
    return h.ravel()


TRANSFORMS: tuple[tuple[int, bool], ...] = tuple(
    (r, m) for m in (False, True) for r in range(4)
)


def transform_window(stack: np.ndarray, t: int) -> np.ndarray:
    """``TRANSFORMS[t]`` applied to a (maps, rows, cols) window stack, matching :func:`dihedral`."""
    rotation, mirror = TRANSFORMS[t]
    if mirror:
        stack = stack[:, ::-1, :]
    return np.rot90(stack, rotation, axes=(1, 2))


@dataclass
class ClusterResult:
    labels: np.ndarray
    centroids: np.ndarray
    transforms: np.ndarray  # index into TRANSFORMS per descriptor
    inertia: float
    history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "labels": self.labels.tolist(),
            "transforms": [list(TRANSFORMS[t]) for t in self.transforms],
            "inertia": self.inertia,
            "history": self.history,
        }


def _aligned(descriptors: np.ndarray, radial_bins: int) -> np.ndarray:
    """All 8 dihedral versions of every descriptor, shape (n, 8, d)."""
    return np.stack([
        np.stack([dihedral(d, r, m, radial_bins) for r, m in TRANSFORMS]) for d in descriptors
    ])


def _kmeans_once(
    variants: np.ndarray, k: int, rng: np.random.Generator, max_iter: int,
) -> ClusterResult:
    n = variants.shape[0]
    centroids = variants[rng.choice(n, size=k, replace=False), 0].copy()
    labels = np.full(n, -1)
    transforms = np.zeros(n, dtype=int)
    history: list[float] = []
    for _ in range(max_iter):
        d2 = ((variants[:, :, None, :] - centroids[None, None]) ** 2).sum(axis=-1)  # (n, 8, k)
        flat = d2.reshape(n, -1)
        best = flat.argmin(axis=1)
        new_t, new_l = np.divmod(best, k)
        history.append(float(flat[np.arange(n), best].sum()))
        if np.array_equal(new_l, labels) and np.array_equal(new_t, transforms):
            break
        labels, transforms = new_l, new_t
        aligned = variants[np.arange(n), transforms]
        for c in range(k):
            members = labels == c
            if members.any():
                centroids[c] = aligned[members].mean(axis=0)
    return ClusterResult(labels, centroids, transforms, history[-1], history)


def cluster(
    descriptors: np.ndarray,
    k: int,
    rng: np.random.Generator,
    restarts: int = 10,
    max_iter: int = 100,
    radial_bins: int = 5,
) -> ClusterResult:
    """Dihedral-aligned K-means; the restart with the lowest inertia wins."""
    descriptors = np.atleast_2d(np.asarray(descriptors, dtype=float))
    n = descriptors.shape[0]
    if k < 1 or k > n:
        raise InputError(f"k={k} needs 1 <= k <= {n} descriptors")
    variants = _aligned(descriptors, radial_bins)
    best: ClusterResult | None = None
    for _ in range(max(1, restarts)):
        result = _kmeans_once(variants, k, rng, max_iter)
        if best is None or result.inertia < best.inertia:
            best = result
    logger.debug("k-means k=%d over %d descriptors: inertia %.6f", k, n, best.inertia)
    return best


def purity(labels, truth) -> float:
    """Share of items carrying their cluster's majority truth label."""
    labels = np.asarray(labels)
    truth = np.asarray(truth)
    if len(labels) == 0:
        return 1.0
    total = 0
    for c in np.unique(labels):
        _, counts = np.unique(truth[labels == c], return_counts=True)
        total += int(counts.max())
    return total / len(labels)


@dataclass
class SourceClusters:
    maps: list[FeatureMaps]
    descriptors: np.ndarray
    result: ClusterResult

    def mean_maps(self) -> list[np.ndarray]:
        """Per cluster, the (3, 2w+1, 2w+1) mean of its members' maps, each aligned first."""
        stacks = np.stack([
            transform_window(m.stack(), int(t)) for m, t in zip(self.maps, self.result.transforms)
        ])
        out = []
        for c in range(len(self.result.centroids)):
            members = self.result.labels == c
            out.append(stacks[members].mean(axis=0) if members.any() else np.zeros_like(stacks[0]))
        return out


def cluster_sources(
    scene: Scene, sources: list[Source], relations: np.ndarray, config: ClusterConfig,
) -> SourceClusters:
    """Descriptors of every source from its associated agents, then clustering."""
    relations = np.asarray(relations)
    if relations.shape != (len(scene.agents), len(sources)):
        raise InputError(f"relation matrix shape {relations.shape} != {(len(scene.agents), len(sources))}")
    maps = []
    for j, src in enumerate(sources):
        tracks = [scene.agents[i].cells for i in np.flatnonzero(relations[:, j])]
        maps.append(build_feature_maps(src, tracks, config.half_width))
    descriptors = np.stack([descriptor(m, config.radial_bins, config.angular_bins) for m in maps])
    rng = np.random.default_rng(config.seed)
    result = cluster(descriptors, config.k, rng, config.restarts, config.max_iter, config.radial_bins)
    logger.info("clustered %d sources into %d classes", len(sources), config.k)
    return SourceClusters(maps, descriptors, result)
