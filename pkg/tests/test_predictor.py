"""Tests for offline and online prediction."""

from collections import Counter

import numpy as np
import pytest

from intentforge.engine.config import ModelParams, PredictorConfig
from intentforge.engine.models import BEHAVIORS, Agent, Scene, Source
from intentforge.engine.posterior import NEG_INF
from intentforge.engine.predictor import (
    STOP_REASONS,
    PredictionContext,
    choose_move,
    class_scores,
    enumerate_hypotheses,
    goal_posterior,
    online_run,
    online_start,
    pad,
    predict_agent,
    predict_offline,
    resample_relations,
    score_change_hypothesis,
    segment_energy,
    visit_indices,
)
from intentforge.errors import InputError, PredictionError


def _context(agents, goals, relations, cmap=None, **predictor) -> PredictionContext:
    scene = Scene.open(9, 9, agents=agents)
    if cmap is not None:
        scene = scene.with_cmap(cmap)
    return PredictionContext(
        scene,
        [Source(g) for g in goals],
        np.asarray(relations, dtype=np.int8),
        ModelParams(),
        PredictorConfig(**predictor),
        rng=np.random.default_rng(0),
    )


def _walker(cells, horizon=12, name="a0") -> Agent:
    return Agent(name, cells, horizon=horizon)


class TestHelpers:
    def test_pad_repeats_last_cell(self):
        assert pad([(0, 0), (1, 0)], 4) == [(0, 0), (1, 0), (1, 0), (1, 0)]

    def test_pad_clips(self):
        assert pad([(0, 0), (1, 0), (2, 0)], 2) == [(0, 0), (1, 0)]

    def test_visit_indices_in_order(self):
        cells = [(0, 0), (1, 0), (2, 0), (1, 0), (0, 0)]
        assert visit_indices(cells, [(2, 0), (0, 0)]) == [2, 4]
        assert visit_indices(cells, [(3, 3)]) == []

    def test_segment_energy_counts_reached_goals(self):
        ctx = _context([_walker([(1, 4), (2, 4)])], [(3, 4), (6, 4)], [[1, 1]])
        energy, reached = segment_energy(ctx, [(1, 4), (2, 4), (3, 4), (4, 4)], [0, 1])
        assert reached == 1
        assert energy > 0

    def test_class_scores_sum_to_one(self):
        ctx = _context([_walker([(1, 4), (2, 4), (3, 4)])], [(7, 4), (1, 8)], [[1, 1]])
        scores = class_scores(enumerate_hypotheses(ctx, 0))
        assert set(scores) == set(BEHAVIORS)
        assert sum(scores.values()) == pytest.approx(1.0)
        assert scores["single"] == 0.0


class TestContext:
    def test_requires_a_source(self):
        with pytest.raises(InputError):
            _context([_walker([(1, 4)])], [], np.zeros((1, 0)))

    def test_relation_shape_checked(self):
        with pytest.raises(InputError):
            _context([_walker([(1, 4)])], [(7, 4)], [[1], [1]])

    def test_every_agent_needs_a_goal(self):
        with pytest.raises(InputError):
            _context([_walker([(1, 4)])], [(7, 4), (1, 8)], [[0, 0]])

    def test_closest_goal(self):
        ctx = _context([_walker([(1, 4)])], [(7, 4), (2, 4)], [[1, 1]])
        assert ctx.closest((1, 4), [0, 1]) == 1


class TestOffline:
    def test_single_goal_walks_straight(self):
        ctx = _context([_walker([(1, 4), (2, 4), (3, 4)])], [(7, 4)], [[1]])
        pred = predict_agent(ctx, 0)
        assert pred.behavior == "single"
        assert pred.goals == [0]
        cells = pred.trajectory.cells
        assert len(cells) == 12
        assert cells[:3] == [(1, 4), (2, 4), (3, 4)]
        assert cells[3:7] == [(4, 4), (5, 4), (6, 4), (7, 4)]
        assert cells[-1] == (7, 4)
        assert pred.future[0] == (3, 4)

    def test_hypothesis_count(self):
        """Two goals: both orders, sequential and change each."""
        ctx = _context([_walker([(1, 4), (2, 4), (3, 4)])], [(7, 4), (1, 8)], [[1, 1]])
        hyps = enumerate_hypotheses(ctx, 0)
        assert len(hyps) == 4
        assert sorted(h.behavior for h in hyps) == ["change", "change", "sequential", "sequential"]

    def test_change_infeasible_after_visiting_first_goal(self):
        agent = _walker([(5, 4), (6, 4), (7, 4), (6, 4)])
        ctx = _context([agent], [(7, 4), (1, 8)], [[1, 1]])
        hyp = score_change_hypothesis(ctx, agent, (0, 1))
        assert hyp.log_likelihood == NEG_INF
        assert hyp.score == NEG_INF

    def test_change_switches_and_ends_at_second_goal(self):
        agent = _walker([(1, 4), (2, 4), (3, 4)], horizon=60)
        ctx = _context([agent], [(7, 4), (1, 8)], [[1, 1]])
        hyp = score_change_hypothesis(ctx, agent, (0, 1))
        assert hyp.switch_cell is not None
        assert hyp.cells[-1] == (1, 8)
        assert hyp.cells[:3] == agent.cells
        assert np.isfinite(hyp.score)

    def test_change_needs_two_goals(self):
        agent = _walker([(1, 4)])
        ctx = _context([agent], [(7, 4)], [[1]])
        with pytest.raises(InputError):
            score_change_hypothesis(ctx, agent, (0,))

    def test_exhaustive_switch_never_worse(self):
        agent = _walker([(1, 4), (2, 4), (3, 4)], horizon=60)
        strided = _context([agent], [(7, 4), (1, 8)], [[1, 1]])
        exhaustive = _context([agent], [(7, 4), (1, 8)], [[1, 1]], exhaustive_switch=True)
        a = score_change_hypothesis(strided, agent, (0, 1)).score
        b = score_change_hypothesis(exhaustive, agent, (0, 1)).score
        assert b >= a - 1e-6

    def test_unreachable_goal_raises(self):
        cmap = np.ones((9, 9), dtype=np.int8)
        for x, y in [(6, 3), (7, 3), (8, 3), (6, 4), (8, 4), (6, 5), (7, 5), (8, 5)]:
            cmap[y, x] = -1
        ctx = _context([_walker([(1, 4), (2, 4)])], [(7, 4)], [[1]], cmap=cmap)
        with pytest.raises(PredictionError):
            predict_agent(ctx, 0)

    def test_predict_offline_covers_every_agent(self):
        agents = [_walker([(1, 4), (2, 4)], name="a"), _walker([(4, 1), (4, 2)], name="b")]
        ctx = _context(agents, [(7, 4), (4, 7)], [[1, 0], [0, 1]])
        preds = predict_offline(ctx)
        assert [p.agent_id for p in preds] == ["a", "b"]
        assert preds[0].trajectory.cells[-1] == (7, 4)
        assert preds[1].trajectory.cells[-1] == (4, 7)

    def test_to_dict(self):
        ctx = _context([_walker([(1, 4), (2, 4)])], [(7, 4)], [[1]])
        doc = predict_agent(ctx, 0).to_dict()
        assert doc["agent"] == "a0"
        assert doc["t0"] == 2
        assert doc["cells"][0] == [1, 4]
        assert doc["behavior"] == "single"


class TestOnline:
    def test_mean_mode_mostly_steps_straight_in_open_field(self):
        ctx = _context([_walker([(2, 4), (3, 4)])], [(7, 4)], [[1]])
        counts = Counter(choose_move(ctx, (3, 4), 0) for _ in range(1000))
        assert counts.most_common(1)[0][0] == (4, 4)
        assert counts[(4, 4)] > 500
        assert counts[(4, 3)] + counts[(4, 5)] < counts[(4, 4)]

    def test_argmax_reaches_interior_goal(self):
        ctx = _context(
            [_walker([(1, 4), (2, 4)], horizon=20)], [(6, 4)], [[1]],
            online_mode="argmax", relation_sweeps=0,
        )
        state = online_run(ctx)
        track = state.tracks[0]
        assert track.stop_reason == "all-goals-visited"
        assert track.cell == (6, 4)
        assert track.cells[:2] == [(1, 4), (2, 4)]
        assert track.visited == [0]

    def test_boundary_goal_leaves_scene(self):
        ctx = _context(
            [_walker([(1, 4), (2, 4)], horizon=20)], [(8, 4)], [[1]],
            online_mode="argmax", relation_sweeps=0,
        )
        assert online_run(ctx).tracks[0].stop_reason == "out-of-scene"

    def test_horizon_stop(self):
        ctx = _context(
            [_walker([(0, 0), (1, 1)], horizon=4)], [(8, 8)], [[1]],
            online_mode="argmax", relation_sweeps=0,
        )
        track = online_run(ctx).tracks[0]
        assert track.stop_reason == "horizon"
        assert len(track.cells) == 4

    def test_agent_on_goal_stops_immediately(self):
        ctx = _context([_walker([(5, 4), (6, 4)])], [(6, 4)], [[1]])
        state = online_start(ctx)
        assert state.done
        assert state.tracks[0].stop_reason == "all-goals-visited"

    def test_mean_mode_stops_with_known_reason(self):
        agents = [_walker([(1, 4), (2, 4)], horizon=15, name="a"), _walker([(4, 1), (4, 2)], horizon=15, name="b")]
        ctx = _context(agents, [(6, 4), (4, 6)], [[1, 0], [0, 1]], relation_sweeps=0)
        state = online_run(ctx)
        for track in state.tracks:
            assert track.stop_reason in STOP_REASONS
            assert len(track.cells) <= track.horizon
            for row in track.posterior:
                assert sum(row) == pytest.approx(1.0)

    def test_predictions_report_online_method(self):
        ctx = _context(
            [_walker([(1, 4), (2, 4)], horizon=20)], [(6, 4)], [[1]],
            online_mode="argmax", relation_sweeps=0,
        )
        pred = online_run(ctx).predictions()[0]
        assert pred.method == "online"
        assert pred.trajectory.t0 == 2
        assert pred.stop_reason == "all-goals-visited"

    def test_goal_posterior_is_a_distribution(self):
        ctx = _context([_walker([(1, 4), (2, 4)])], [(4, 4), (2, 8)], [[1, 1]])
        track = online_start(ctx).tracks[0]
        post = goal_posterior(ctx, track)
        assert post.shape == (2,)
        assert post.sum() == pytest.approx(1.0)
        assert post[0] > post[1]

    def test_resampling_keeps_visited_goals(self):
        ctx = _context([_walker([(3, 4), (4, 4)])], [(4, 4), (7, 4), (1, 8)], [[1, 1, 0]], relation_sweeps=30)
        track = online_start(ctx).tracks[0]
        assert track.visited == [0]
        resample_relations(ctx, track)
        assert track.row[0] == 1
        assert 1 <= track.row.sum() <= ctx.params.max_goals
        assert np.array_equal(ctx.relations[0], track.row)
