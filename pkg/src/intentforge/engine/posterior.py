"""Prior and likelihood terms of the generative model and the joint log-posterior."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln, logsumexp
from sklearn.mixture import GaussianMixture

from ..errors import DomainError, InputError, ModelError
from .config import FieldParams, ModelParams
from .fields import FieldCache
from .models import Cell, Scene, Source
from .planner import path_energy, trajectory_log_likelihood

NEG_INF = -math.inf


def _log(value: float) -> float:
    return math.log(value) if value > 0 else NEG_INF


def ising_log_prior(cmap: np.ndarray, beta: float) -> float:
    """β · Σ c(x)c(x') over unordered 4-neighbor pairs."""
    c = cmap.astype(np.int64)
    total = int((c[:, 1:] * c[:, :-1]).sum() + (c[1:, :] * c[:-1, :]).sum())
    return beta * total


@dataclass
class AppearanceModel:
    """Gaussian mixture density over per-cell feature vectors."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.covariances = np.asarray(self.covariances, dtype=float)
        if self.covariances.ndim == 2:
            self.covariances = self.covariances[None]
        for k, cov in enumerate(self.covariances):
            eig = np.linalg.eigvalsh(cov)
            if not np.all(np.isfinite(eig)) or eig.min() <= 0:
                raise ModelError(f"appearance component {k}: degenerate covariance")

    @classmethod
    def fit(cls, samples: np.ndarray, n_components: int = 2, seed: int = 0) -> AppearanceModel:
        """EM fit; covariances floored at 1e-6."""
        samples = np.asarray(samples, dtype=float)
        n_components = min(n_components, len(samples))
        if n_components < 1:
            raise ModelError("cannot fit an appearance model to zero samples")
        gmm = GaussianMixture(
            n_components=n_components,
            covariance_type="full",
            reg_covar=1e-6,
            random_state=seed,
        ).fit(samples)
        return cls(gmm.weights_, gmm.means_, gmm.covariances_)

    def log_density(self, samples: np.ndarray) -> np.ndarray:
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        parts = []
        for w, mean, cov in zip(self.weights, self.means, self.covariances):
            try:
                lp = stats.multivariate_normal.logpdf(samples, mean=mean, cov=cov)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise ModelError(f"appearance density failed: {exc}") from exc
            parts.append(np.atleast_1d(lp) + _log(float(w)))
        return logsumexp(np.stack(parts, axis=0), axis=0)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }


def appearance_log_likelihood(
    cmap: np.ndarray, features: np.ndarray | None, gmm: AppearanceModel | None,
) -> float:
    """Σ over walkable cells of log p(φ(x)); 0 without a feature channel."""
    if features is None or gmm is None:
        return 0.0
    walk = cmap > 0
    if not walk.any():
        return 0.0
    return float(gmm.log_density(features[walk]).sum())


def source_log_prior(sources: list[Source], cmap: np.ndarray, eta: float, rho: float) -> float:
    """Poisson count term plus a Bernoulli walkable-placement term per source."""
    n = len(sources)
    value = n * math.log(eta) - float(gammaln(n + 1)) - eta
    log_in, log_out = math.log(rho), math.log(1.0 - rho)
    for src in sources:
        value += log_in if cmap[src.mu[1], src.mu[0]] > 0 else log_out
    return value


def fit_theta(relations: np.ndarray) -> np.ndarray:
    """Add-one smoothed multinomial weights θ_j ∝ b_j + 1."""
    n = relations.shape[1] if relations.ndim == 2 else 0
    if n == 0:
        return np.zeros(0)
    b = relations.sum(axis=0).astype(float)
    return (b + 1.0) / (b.sum() + n)


def relation_log_prior(relations: np.ndarray, theta: np.ndarray) -> float:
    """Σ_j b_j log θ_j; −inf when a selected source has θ_j = 0."""
    if relations.size == 0:
        return 0.0
    b = relations.sum(axis=0)
    used = b > 0
    if np.any(theta[used] <= 0):
        return NEG_INF
    return float((b[used] * np.log(theta[used])).sum())


def behavior_log_prior(z: str, n_goals: int, kappa: float, gamma: float, n_sources: int) -> float:
    """Unnormalized log prior of one behavior label."""
    if z == "single":
        return _log(1.0 - kappa)
    if z == "sequential":
        if n_goals < 1:
            raise DomainError("sequential behavior needs at least one goal")
        if n_goals == 1:
            return _log(1.0 - kappa)
        return (n_goals - 1) * _log(kappa) + _log(1.0 - kappa)
    if z == "change":
        if n_sources < 2:
            raise DomainError("change of intent needs at least two sources")
        return _log(gamma / (n_sources - 1))
    raise DomainError(f"unknown behavior {z!r}")


@dataclass
class Leg:
    """One goal-directed stretch of a trajectory."""

    goal: int
    cells: list[Cell]


@dataclass
class LatentState:
    """A full assignment {C, S, R, Z, Γ}; Γ_i is a list of legs."""

    cmap: np.ndarray
    sources: list[Source]
    relations: np.ndarray
    behaviors: list[str]
    legs: list[list[Leg]] = field(default_factory=list)
    gmm: AppearanceModel | None = None


@dataclass
class PosteriorTerms:
    ising: float = 0.0
    appearance: float = 0.0
    sources: float = 0.0
    relations: float = 0.0
    behaviors: float = 0.0
    trajectories: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def total(self) -> float:
        value = (
            self.ising + self.appearance + self.sources + self.relations
            + self.behaviors + float(np.sum(self.trajectories))
        )
        return NEG_INF if math.isnan(value) else value

    def to_dict(self) -> dict:
        return {
            "ising": self.ising,
            "appearance": self.appearance,
            "sources": self.sources,
            "relations": self.relations,
            "behaviors": self.behaviors,
            "trajectories": float(np.sum(self.trajectories)),
            "total": self.total,
        }


def flatten_legs(legs: list[Leg]) -> list[Cell]:
    cells: list[Cell] = []
    for leg in legs:
        cells.extend(leg.cells if not cells else leg.cells[1:])
    return cells


def prior_terms(state: LatentState, scene: Scene, params: ModelParams) -> PosteriorTerms:
    n = len(state.sources)
    counts = state.relations.sum(axis=1) if state.relations.size else np.zeros(len(state.behaviors))
    behaviors = 0.0
    for z, k in zip(state.behaviors, counts):
        behaviors += behavior_log_prior(z, int(k), params.kappa, params.gamma, n)
    return PosteriorTerms(
        ising=ising_log_prior(state.cmap, params.beta),
        appearance=appearance_log_likelihood(state.cmap, scene.features, state.gmm),
        sources=source_log_prior(state.sources, state.cmap, params.eta, params.rho),
        relations=relation_log_prior(state.relations, fit_theta(state.relations)),
        behaviors=behaviors,
    )


def posterior_terms(
    state: LatentState,
    scene: Scene,
    params: ModelParams,
    field_params: FieldParams | None = None,
    cache: FieldCache | None = None,
) -> PosteriorTerms:
    """Every term of the joint log-posterior, up to state-independent constants."""
    field_params = field_params or FieldParams()
    if len(state.legs) != len(scene.agents):
        raise InputError(f"{len(state.legs)} trajectories for {len(scene.agents)} agents")
    terms = prior_terms(state, scene, params)
    view = scene.with_cmap(state.cmap)
    if cache is None:
        cache = FieldCache(scene.lattice.shape, field_params)
    walk = state.cmap > 0
    lls = np.zeros(len(scene.agents))
    for i, (agent, legs) in enumerate(zip(scene.agents, state.legs)):
        cells = flatten_legs(legs)
        if cells[: agent.t0] != agent.cells:
            raise InputError(f"agent {agent.id}: trajectory disagrees with its observed prefix")
        if any(not walk[y, x] for x, y in agent.cells):
            lls[i] = NEG_INF
            continue
        energy = 0.0
        for leg in legs:
            mu = state.sources[leg.goal].mu
            energy += path_energy(leg.cells, cache.cumulative(view, mu))
        lls[i] = trajectory_log_likelihood(energy, params.path)
    terms.trajectories = lls
    return terms


def joint_log_posterior(
    state: LatentState,
    scene: Scene,
    params: ModelParams,
    field_params: FieldParams | None = None,
    cache: FieldCache | None = None,
) -> float:
    return posterior_terms(state, scene, params, field_params, cache).total
