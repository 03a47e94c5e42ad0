"""Tests for prior, likelihood and joint log-posterior terms."""

import math

import numpy as np
import pytest

from intentforge.engine.config import FieldParams, ModelParams
from intentforge.engine.fields import FieldCache
from intentforge.engine.models import Agent, Scene, Source
from intentforge.engine.planner import path_energy
from intentforge.engine.posterior import (
    NEG_INF,
    AppearanceModel,
    LatentState,
    Leg,
    appearance_log_likelihood,
    behavior_log_prior,
    fit_theta,
    flatten_legs,
    ising_log_prior,
    joint_log_posterior,
    posterior_terms,
    relation_log_prior,
    source_log_prior,
)
from intentforge.errors import DomainError, InputError, ModelError


@pytest.fixture
def params():
    return ModelParams()


def _corridor_scene() -> Scene:
    agent = Agent("a0", [(0, 1), (1, 1)], horizon=5)
    return Scene.open(5, 3, agents=[agent])


class TestIsing:
    def test_uniform_map(self):
        assert ising_log_prior(np.ones((2, 2), dtype=np.int8), 0.05) == pytest.approx(0.2)

    def test_checkerboard(self):
        cmap = np.array([[1, -1], [-1, 1]], dtype=np.int8)
        assert ising_log_prior(cmap, 0.05) == pytest.approx(-0.2)

    def test_smooth_beats_noisy(self):
        noisy = np.ones((4, 4), dtype=np.int8)
        noisy[1, 1] = noisy[2, 3] = -1
        assert ising_log_prior(np.ones((4, 4), dtype=np.int8), 1.0) > ising_log_prior(noisy, 1.0)


class TestSourcePrior:
    def test_empty(self):
        assert source_log_prior([], np.ones((2, 2)), 3.0, 0.95) == pytest.approx(-3.0)

    def test_walkable_placement(self):
        cmap = np.ones((3, 3), dtype=np.int8)
        value = source_log_prior([Source((1, 1))], cmap, 3.0, 0.95)
        assert value == pytest.approx(math.log(3.0) - 3.0 + math.log(0.95))

    def test_placement_on_obstacle_is_penalized(self):
        cmap = np.ones((3, 3), dtype=np.int8)
        cmap[1, 1] = -1
        on = source_log_prior([Source((1, 1))], cmap, 3.0, 0.95)
        off = source_log_prior([Source((0, 0))], cmap, 3.0, 0.95)
        assert off - on == pytest.approx(math.log(0.95) - math.log(0.05))


class TestRelationPrior:
    def test_theta_is_add_one_smoothed(self):
        theta = fit_theta(np.array([[1, 0], [1, 0]]))
        assert np.allclose(theta, [0.75, 0.25])
        assert theta.sum() == pytest.approx(1.0)

    def test_log_prior(self):
        rel = np.array([[1, 0], [1, 0]])
        assert relation_log_prior(rel, fit_theta(rel)) == pytest.approx(2 * math.log(0.75))

    def test_zero_theta_is_impossible(self):
        rel = np.array([[1, 0]])
        assert relation_log_prior(rel, np.array([0.0, 1.0])) == NEG_INF


class TestBehaviorPrior:
    def test_single(self):
        assert behavior_log_prior("single", 1, 0.3, 0.1, 3) == pytest.approx(math.log(0.7))

    def test_sequential_decays_with_goals(self):
        value = behavior_log_prior("sequential", 3, 0.3, 0.1, 3)
        assert value == pytest.approx(2 * math.log(0.3) + math.log(0.7))

    def test_change(self):
        assert behavior_log_prior("change", 2, 0.3, 0.1, 3) == pytest.approx(math.log(0.05))

    def test_change_needs_two_sources(self):
        with pytest.raises(DomainError):
            behavior_log_prior("change", 1, 0.3, 0.1, 1)

    def test_unknown_label(self):
        with pytest.raises(DomainError):
            behavior_log_prior("wander", 1, 0.3, 0.1, 3)


class TestAppearance:
    def test_degenerate_covariance(self):
        with pytest.raises(ModelError):
            AppearanceModel([1.0], [[0.0, 0.0]], [[[0.0, 0.0], [0.0, 0.0]]])

    def test_fit_and_density(self):
        rng = np.random.default_rng(0)
        samples = np.vstack([rng.normal(0, 0.1, (50, 2)), rng.normal(3, 0.1, (50, 2))])
        model = AppearanceModel.fit(samples, n_components=2)
        dens = model.log_density(np.array([[0.0, 0.0], [1.5, 1.5]]))
        assert np.all(np.isfinite(dens))
        assert dens[0] > dens[1]

    def test_no_features_contributes_zero(self):
        assert appearance_log_likelihood(np.ones((2, 2)), None, None) == 0.0


class TestJointPosterior:
    def test_flatten_legs_shares_endpoints(self):
        legs = [Leg(0, [(0, 0), (1, 0)]), Leg(1, [(1, 0), (2, 0)])]
        assert flatten_legs(legs) == [(0, 0), (1, 0), (2, 0)]

    def test_trajectory_term_is_minus_lambda_energy(self, params):
        scene = _corridor_scene()
        src = Source((4, 1))
        cells = [(0, 1), (1, 1), (2, 1), (3, 1), (4, 1)]
        state = LatentState(
            cmap=scene.cmap, sources=[src], relations=np.array([[1]]),
            behaviors=["single"], legs=[[Leg(0, cells)]],
        )
        terms = posterior_terms(state, scene, params)
        fld = FieldCache(scene.lattice.shape, FieldParams()).cumulative(scene, src.mu)
        assert terms.trajectories[0] == pytest.approx(-params.lam * path_energy(cells, fld))
        assert joint_log_posterior(state, scene, params) == pytest.approx(terms.total)

    def test_observed_cell_on_obstacle_is_impossible(self, params):
        scene = _corridor_scene()
        cmap = np.ones((3, 5), dtype=np.int8)
        cmap[1, 1] = -1
        state = LatentState(
            cmap=cmap, sources=[Source((4, 1))], relations=np.array([[1]]),
            behaviors=["single"], legs=[[Leg(0, [(0, 1), (1, 1), (2, 1)])]],
        )
        assert joint_log_posterior(state, scene, params) == NEG_INF

    def test_prefix_must_match(self, params):
        scene = _corridor_scene()
        state = LatentState(
            cmap=scene.cmap, sources=[Source((4, 1))], relations=np.array([[1]]),
            behaviors=["single"], legs=[[Leg(0, [(0, 0), (1, 1)])]],
        )
        with pytest.raises(InputError):
            posterior_terms(state, scene, params)
