"""Repulsion, attraction and cumulative force fields on the lattice."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy import signal

from ..errors import DimensionError
from .config import FieldParams
from .models import Cell, Scene, Source


@dataclass(frozen=True)
class VectorField:
    """Per-cell 2D force vectors, ``data[y, x] = (fx, fy)``."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise DimensionError(f"vector field needs shape (h, w, 2), got {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def zeros(cls, shape: tuple[int, int]) -> VectorField:
        return cls(np.zeros(shape + (2,)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    @property
    def fx(self) -> np.ndarray:
        return self.data[..., 0]

    @property
    def fy(self) -> np.ndarray:
        return self.data[..., 1]

    def at(self, cell: Cell) -> np.ndarray:
        return self.data[cell[1], cell[0]]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.fx, self.fy)

    def __add__(self, other: VectorField) -> VectorField:
        if self.shape != other.shape:
            raise DimensionError(f"field shapes differ: {self.shape} vs {other.shape}")
        return VectorField(self.data + other.data)


def gaussian_falloff(dist_sq, sigma_sq: float):
    """Unnormalized force magnitude, peak 1 at distance 0."""
    return np.exp(-np.asarray(dist_sq, dtype=float) / (2.0 * sigma_sq))


def repulsion_radius(params: FieldParams) -> int:
    """Chebyshev cutoff beyond which obstacles exert no force."""
    return max(1, math.ceil(4.0 * math.sqrt(params.sigma_r_sq)))


def _repulsion_kernels(params: FieldParams) -> tuple[np.ndarray, np.ndarray]:
    r = repulsion_radius(params)
    offs = np.arange(-r, r + 1, dtype=float)
    dx, dy = np.meshgrid(offs, offs)
    dist = np.hypot(dx, dy)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(dist > 0, gaussian_falloff(dist**2, params.sigma_r_sq) / dist, 0.0)
    return g * dx, g * dy


def repulsion_field(scene: Scene, params: FieldParams) -> VectorField:
    """Summed short-range push away from every non-walkable cell."""
    obstacles = (scene.cmap < 0).astype(float)
    if not obstacles.any():
        return VectorField.zeros(scene.lattice.shape)
    kx, ky = _repulsion_kernels(params)
    fx = signal.convolve2d(obstacles, kx, mode="same", boundary="fill", fillvalue=0.0)
    fy = signal.convolve2d(obstacles, ky, mode="same", boundary="fill", fillvalue=0.0)
    return VectorField(np.stack([fx, fy], axis=-1))


def attraction_field(scene: Scene, source: Source, params: FieldParams) -> VectorField:
    """Gaussian pull toward ``source.mu``; zero at the source cell itself."""
    h, w = scene.lattice.shape
    ys, xs = np.mgrid[0:h, 0:w]
    dx = source.mu[0] - xs
    dy = source.mu[1] - ys
    dist = np.hypot(dx, dy)
    mag = gaussian_falloff(dist**2, params.sigma_a_sq)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(dist > 0, mag / dist, 0.0)
    return VectorField(np.stack([scale * dx, scale * dy], axis=-1))


def cumulative_field(attraction: VectorField, repulsion: VectorField) -> VectorField:
    """F_ij = attraction of the selected source + joint repulsion."""
    return attraction + repulsion


def lm_sum_field(scene: Scene, sources: list[Source], params: FieldParams) -> VectorField:
    """Repulsion plus the attraction of every source at once."""
    total = repulsion_field(scene, params)
    for src in sources:
        total = total + attraction_field(scene, src, params)
    return total


class FieldCache:
    """Memoizes fields per constraint map and source location.

    Repulsion is keyed by the constraint map bytes, attraction by ``mu``;
    cumulative fields by both. Only the most recent maps are retained.
    """

    def __init__(self, lattice_shape: tuple[int, int], params: FieldParams, maps: int = 8) -> None:
        self.shape = lattice_shape
        self.params = params
        self._maps = maps
        self._repulsion: OrderedDict[bytes, VectorField] = OrderedDict()
        self._attraction: dict[Cell, VectorField] = {}
        self._cumulative: OrderedDict[tuple[bytes, Cell], VectorField] = OrderedDict()

    @staticmethod
    def key(cmap: np.ndarray) -> bytes:
        return np.ascontiguousarray(cmap, dtype=np.int8).tobytes()

    def repulsion(self, scene: Scene) -> VectorField:
        k = self.key(scene.cmap)
        hit = self._repulsion.get(k)
        if hit is None:
            hit = repulsion_field(scene, self.params)
            self._repulsion[k] = hit
            if len(self._repulsion) > self._maps:
                self._repulsion.popitem(last=False)
        else:
            self._repulsion.move_to_end(k)
        return hit

    def attraction(self, scene: Scene, mu: Cell) -> VectorField:
        hit = self._attraction.get(mu)
        if hit is None:
            hit = attraction_field(scene, Source(mu), self.params)
            self._attraction[mu] = hit
        return hit

    def cumulative(self, scene: Scene, mu: Cell) -> VectorField:
        k = (self.key(scene.cmap), mu)
        hit = self._cumulative.get(k)
        if hit is None:
            hit = cumulative_field(self.attraction(scene, mu), self.repulsion(scene))
            self._cumulative[k] = hit
            if len(self._cumulative) > self._maps * 16:
                self._cumulative.popitem(last=False)
        return hit
