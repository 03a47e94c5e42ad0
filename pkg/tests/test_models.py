"""Tests for lattice, source, agent and intent-state models."""

import numpy as np
import pytest

from intentforge.engine.models import (
    Agent,
    IntentState,
    Lattice,
    Scene,
    Source,
    Trajectory,
    chebyshev,
    euclidean,
)
from intentforge.errors import OutOfBounds


class TestLattice:
    def test_shape_is_height_by_width(self):
        assert Lattice(5, 3).shape == (3, 5)
        assert Lattice(5, 3).size == 15

    def test_index_roundtrip_is_row_major(self):
        lat = Lattice(4, 3)
        assert lat.index((1, 2)) == 9
        assert lat.cell(9) == (1, 2)

    def test_check_raises_outside(self):
        with pytest.raises(OutOfBounds):
            Lattice(3, 3).check((3, 0))

    def test_out_of_bounds_is_an_index_error(self):
        with pytest.raises(IndexError):
            Lattice(3, 3).check((-1, 0))

    def test_boundary(self):
        lat = Lattice(4, 4)
        assert lat.on_boundary((0, 2))
        assert lat.on_boundary((2, 3))
        assert not lat.on_boundary((1, 2))


class TestSource:
    def test_default_sigma_is_identity(self):
        assert np.array_equal(Source((1, 2)).sigma, np.eye(2))

    def test_invalid_covariance(self):
        assert not Source((0, 0), np.array([[1.0, 2.0], [2.0, 1.0]])).is_valid()
        assert not Source((0, 0), np.array([[1.0, 0.5], [0.0, 1.0]])).is_valid()
        assert Source((0, 0), np.diag([2.0, 3.0])).is_valid()

    def test_dict_roundtrip(self):
        src = Source((3, 4), np.diag([2.0, 5.0]))
        back = Source.from_dict(src.to_dict())
        assert back.mu == (3, 4)
        assert np.array_equal(back.sigma, src.sigma)


class TestAgent:
    def test_t0_is_observed_length(self):
        agent = Agent("a", [(0, 0), (1, 0), (2, 1)], horizon=10)
        assert agent.t0 == 3
        assert agent.start_cell == (0, 0)
        assert agent.last_cell == (2, 1)

    def test_trajectory_split(self):
        traj = Trajectory([(0, 0), (1, 0), (2, 0), (3, 0)], t0=2, horizon=4, start_frame=5)
        assert traj.observed == [(0, 0), (1, 0)]
        assert traj.predicted == [(2, 0), (3, 0)]
        assert traj.frames()[0] == (5, 0, 0)


class TestScene:
    def test_open_scene_is_walkable(self):
        scene = Scene.open(4, 3)
        assert scene.walkable.all()
        assert scene.cmap.shape == (3, 4)

    def test_cmap_is_read_only(self):
        scene = Scene.open(3, 3)
        with pytest.raises(ValueError):
            scene.cmap[0, 0] = -1

    def test_with_cmap_leaves_original(self):
        scene = Scene.open(3, 3)
        cmap = np.ones((3, 3), dtype=np.int8)
        cmap[1, 1] = -1
        other = scene.with_cmap(cmap)
        assert not other.is_walkable((1, 1))
        assert scene.is_walkable((1, 1))


class TestIntentState:
    def test_valid_state(self):
        state = IntentState(np.array([[1, 0], [1, 1]]), ["single", "sequential"])
        assert state.violations() == []

    def test_agent_without_goal(self):
        state = IntentState(np.array([[0, 0]]), ["single"])
        assert any("no goal" in v for v in state.violations())

    def test_single_with_two_goals(self):
        state = IntentState(np.array([[1, 1]]), ["single"])
        assert any("single behavior" in v for v in state.violations())

    def test_too_many_goals(self):
        state = IntentState(np.ones((1, 4)), ["sequential"], max_goals=3)
        assert any("exceed" in v for v in state.violations())


def test_distances():
    assert euclidean((0, 0), (3, 4)) == 5.0
    assert chebyshev((0, 0), (3, -4)) == 4
