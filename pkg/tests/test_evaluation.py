"""Tests for trajectory, source and behavior metrics."""

import math

import numpy as np
import pytest

from intentforge.engine.config import ModelParams
from intentforge.engine.evaluation import (
    EvalReport,
    SourceMatch,
    average_precision,
    behavior_scores,
    box_iou,
    evaluate,
    _heading_goal,
    intent_accuracy,
    joint_flags,
    longest_stay,
    match_boxes,
    mhd,
    model_nll,
    motion_cue_behaviors,
    motion_cue_scores,
    pr_curve,
    predicted_intents,
    prediction_box,
    relation_accuracy,
    relation_recall,
    source_localization,
    true_intents,
    turning_angle,
)
from intentforge.engine.fields import VectorField
from intentforge.engine.models import Agent, GroundTruth, Lattice, Scene, Source, Trajectory
from intentforge.engine.predictor import Prediction, PredictionContext, predict_offline
from intentforge.engine.synth import truth_box
from intentforge.errors import InputError, MetricError


def _uniform_field(shape, vec) -> VectorField:
    data = np.zeros(shape + (2,))
    data[...] = vec
    return VectorField(data)


class TestMHD:
    def test_identical(self):
        cells = [(0, 0), (1, 1), (2, 1)]
        assert mhd(cells, cells) == 0.0

    def test_single_pair(self):
        assert mhd([(0, 0)], [(3, 4)]) == pytest.approx(5.0, abs=1e-9)

    def test_hand_computed(self):
        expected = (1 + math.sqrt(5)) / 2
        assert mhd([(0, 0), (2, 0)], [(0, 1)]) == pytest.approx(expected, abs=1e-9)

    def test_symmetric(self):
        a, b = [(0, 0), (2, 0), (5, 3)], [(0, 1), (4, 4)]
        assert mhd(a, b) == pytest.approx(mhd(b, a))

    def test_empty_raises(self):
        with pytest.raises(MetricError):
            mhd([], [(0, 0)])


class TestModelNLL:
    def test_zero_field(self):
        assert model_nll([(0, 0), (1, 0)], VectorField.zeros((2, 2)), 0.5) == 0.0

    def test_one_step(self):
        fld = _uniform_field((2, 2), (1.0, 0.0))
        assert model_nll([(0, 0), (1, 0)], fld, 0.5) == pytest.approx(0.5, abs=1e-9)

    def test_perpendicular(self):
        fld = _uniform_field((3, 3), (1.0, 0.0))
        assert model_nll([(0, 0), (0, 1), (0, 2)], fld, 0.5) == 0.0

    def test_averaged_over_steps(self):
        fld = _uniform_field((1, 4), (1.0, 0.0))
        assert model_nll([(0, 0), (1, 0), (2, 0), (3, 0)], fld, 0.5) == pytest.approx(0.5)

    def test_needs_a_step(self):
        with pytest.raises(MetricError):
            model_nll([(0, 0)], VectorField.zeros((1, 1)), 0.5)


class TestSources:
    def test_iou_identity(self):
        assert box_iou((0, 0, 3, 3), (0, 0, 3, 3)) == 1.0

    def test_iou_disjoint(self):
        assert box_iou((0, 0, 1, 1), (5, 5, 6, 6)) == 0.0

    def test_iou_shifted(self):
        assert box_iou((0, 0, 3, 3), (2, 0, 5, 3)) == pytest.approx(1 / 3, abs=1e-9)

    def test_shifted_box_unmatched(self):
        assert match_boxes([(2, 0, 5, 3)], [(0, 0, 3, 3)]) == []

    def test_prediction_box(self):
        lattice = Lattice(20, 20)
        assert prediction_box(Source((5, 5)), lattice) == (3, 3, 7, 7)
        assert prediction_box(Source((0, 19)), lattice) == (0, 17, 2, 19)

    def test_greedy_one_to_one(self):
        truth = [(0, 0, 4, 4), (1, 0, 5, 4)]
        pred = [(1, 0, 5, 4)]
        matches = match_boxes(pred, truth)
        assert len(matches) == 1
        assert matches[0].truth == 1 and matches[0].iou == 1.0

    def test_localization_rate(self):
        lattice = Lattice(20, 20)
        truth = [truth_box((5, 5), lattice), truth_box((14, 14), lattice)]
        rate, matches = source_localization([Source((5, 5))], truth, lattice)
        assert rate == 0.5
        assert [m.truth for m in matches] == [0]


class TestRelations:
    def test_exact(self):
        mapping = {0: 0, 1: 1}
        assert relation_recall(np.array([1, 1]), np.array([1, 1]), mapping) == 1.0

    def test_half(self):
        mapping = {0: 0, 1: 1}
        assert relation_recall(np.array([1, 1]), np.array([1, 0]), mapping) == 0.5

    def test_disjoint(self):
        mapping = {0: 0, 1: 1}
        assert relation_recall(np.array([1, 0]), np.array([0, 1]), mapping) == 0.0

    def test_unmatched_source_counts_as_miss(self):
        assert relation_recall(np.array([1, 0]), np.array([1, 0]), {1: 1}) == 0.0

    def test_literal_counts_agreeing_zeros(self):
        mapping = {0: 0, 1: 1}
        assert relation_recall(np.array([1, 0]), np.array([1, 0]), mapping, literal=True) == 2.0

    def test_goal_less_agents_skipped(self):
        gt = np.array([[1, 0], [0, 0]])
        pred = np.array([[1, 0], [0, 1]])
        matches = [SourceMatch(0, 0, 1.0), SourceMatch(1, 1, 1.0)]
        assert relation_accuracy(gt, pred, matches) == 1.0

    def test_row_mismatch(self):
        with pytest.raises(InputError):
            relation_accuracy(np.ones((2, 1)), np.ones((1, 1)), [])

    def test_joint_flags(self):
        gt = np.array([[1, 0], [0, 1], [1, 1]])
        pred = np.array([[0, 1], [1, 0], [1, 1]])
        matches = [SourceMatch(0, 1, 1.0), SourceMatch(1, 0, 1.0)]
        assert joint_flags(gt, pred, matches).tolist() == [True, True, True]
        assert joint_flags(gt, pred, matches[:1]).tolist() == [True, False, False]


class TestBehaviors:
    def test_hand_built_average_precision(self):
        labels = [1, 0, 1, 1, 0, 0]
        scores = [0.9, 0.8, 0.7, 0.6, 0.5, 0.4]
        assert average_precision(labels, scores) == pytest.approx(55 / 72, abs=1e-9)

    def test_curve_starts_at_full_precision(self):
        precision, recall = pr_curve([1, 0], [0.7, 0.2])
        assert precision[0] == 1.0 and recall[0] == 0.0
        assert recall[-1] == 1.0

    def test_perfect_predictions(self):
        truth = ["single", "sequential", "change", "single"]
        scores = [{z: float(z == t) for z in ("single", "sequential", "change")} for t in truth]
        result = behavior_scores(truth, truth, scores)
        assert np.array_equal(result.confusion, np.diag([2, 1, 1]))
        assert all(v == pytest.approx(1.0) for v in result.ap.values())
        assert result.mean_ap == pytest.approx(1.0)

    def test_all_single_predictor(self):
        truth = ["single", "sequential", "change"]
        pred = ["single"] * 3
        scores = [{"single": 1.0, "sequential": 0.0, "change": 0.0}] * 3
        cm = behavior_scores(truth, pred, scores).confusion
        assert cm[1, 1] == 0 and cm[2, 2] == 0
        assert cm[:, 0].sum() == 3

    def test_misaligned_inputs(self):
        with pytest.raises(InputError):
            behavior_scores(["single"], [], [])


STRAIGHT = [(x, 0) for x in range(9)]
PAUSED = [(x, 0) for x in range(5)] + [(4, 0)] * 6 + [(4, y) for y in range(1, 5)]
TURNED = [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (3, 1), (2, 2), (1, 3)]


class TestMotionCues:
    def test_longest_stay(self):
        assert longest_stay(STRAIGHT) == 0
        assert longest_stay(PAUSED) == 6

    def test_stay_after_arrival_ignored(self):
        assert longest_stay([(0, 0), (1, 0), (2, 0)] + [(2, 0)] * 5) == 0

    def test_turning_angle(self):
        assert turning_angle(STRAIGHT) == 0.0
        assert turning_angle(TURNED) == pytest.approx(3 * math.pi / 4)
        assert turning_angle(PAUSED) == pytest.approx(math.pi / 2)

    def test_labels(self):
        assert motion_cue_scores(STRAIGHT)[0] == "single"
        assert motion_cue_scores(PAUSED)[0] == "sequential"
        assert motion_cue_scores(TURNED)[0] == "change"

    def test_short_track_is_single(self):
        z, scores = motion_cue_scores([(0, 0), (1, 0)])
        assert z == "single"
        assert scores["change"] == 0.0

    def test_hand_built_tracks_ranked_perfectly(self):
        result = motion_cue_behaviors([STRAIGHT, PAUSED, TURNED], ["single", "sequential", "change"])
        assert np.array_equal(result.confusion, np.eye(3, dtype=int))
        assert result.ap["sequential"] == pytest.approx(1.0)
        assert result.ap["change"] == pytest.approx(1.0)
        assert result.ap["single"] == pytest.approx(1.0)


class TestIntentAccuracy:
    SOURCES = [Source((7, 4)), Source((4, 8))]
    CHANGE = [(1, 4), (2, 4), (3, 4), (4, 4), (4, 5), (4, 6), (4, 7), (4, 8)]

    @pytest.fixture
    def scene(self):
        lattice = Lattice(9, 9)
        truth = GroundTruth(
            sources=self.SOURCES,
            boxes=[truth_box(s.mu, lattice) for s in self.SOURCES],
            relations=np.array([[1, 1]]),
            behaviors=["change"],
            trajectories=[self.CHANGE],
            goals=[[0, 1]],
            switch_cells=[(4, 4)],
        )
        agent = Agent("a0", self.CHANGE[:3], horizon=len(self.CHANGE))
        return Scene(lattice, np.ones((9, 9)), agents=[agent], truth=truth)

    def _prediction(self, **kw) -> Prediction:
        return Prediction("a0", "gm", Trajectory(list(self.CHANGE), 3, len(self.CHANGE)), **kw)

    def test_change_switches_after_switch_cell(self):
        assert true_intents(self.CHANGE, [0, 1], "change", (4, 4), self.SOURCES) == [0, 0, 0, 0, 1, 1, 1, 1]

    def test_sequential_moves_on_after_each_visit(self):
        sources = [Source((3, 4)), Source((3, 6))]
        cells = [(1, 4), (2, 4), (3, 4), (3, 4), (3, 5), (3, 6)]
        assert true_intents(cells, [0, 1], "sequential", None, sources) == [0, 0, 0, 1, 1, 1]

    def test_posterior_mode_per_frame(self):
        pred = self._prediction(goal_posterior=[[0.7, 0.3], [0.2, 0.8]])
        assert predicted_intents(pred) == [0, 1]

    def test_frame_goals_take_precedence(self):
        pred = self._prediction(frame_goals=[1], goal_posterior=[[0.9, 0.1]])
        assert predicted_intents(pred) == [1]

    def test_per_frame_accuracy(self, scene):
        pred = self._prediction(frame_goals=[0, 0, 1, 1])
        assert intent_accuracy(scene, [pred]) == [1.0, 0.0, 1.0, 1.0, 1.0]

    def test_mapping_to_truth_indices(self, scene):
        pred = self._prediction(frame_goals=[0, 0, 1, 1])
        assert intent_accuracy(scene, [pred], {0: 1, 1: 0}) == [0.0, 1.0, 0.0, 0.0, 0.0]

    def test_agents_without_intents_skipped(self, scene):
        assert intent_accuracy(scene, [self._prediction()]) == [None] * 5

    def test_heading_goal_prefers_frame_choice(self):
        pred = self._prediction(goals=[1, 0], frame_goals=[0, 1])
        assert _heading_goal(self.CHANGE[:3], pred, self.SOURCES) == 0

    def test_heading_goal_follows_visit_order(self):
        pred = self._prediction(goals=[1, 0])
        assert _heading_goal(self.CHANGE, pred, self.SOURCES) == 0

    def test_evaluate_reports_curve(self, scene):
        pred = self._prediction(frame_goals=[0, 1, 1, 1])
        report = evaluate(scene, [pred], self.SOURCES, np.array([[1, 1]]))
        assert report.intent_accuracy == [1.0, 1.0, 1.0, 1.0, 1.0]
        assert report.summary_row()["intent_accuracy"] == 1.0
        assert report.cue_behaviors is None


class TestEvaluate:
    @pytest.fixture
    def scene(self):
        lattice = Lattice(9, 9)
        full = [(x, 4) for x in range(1, 8)]
        truth = GroundTruth(
            sources=[Source((7, 4))],
            boxes=[truth_box((7, 4), lattice)],
            relations=np.array([[1]]),
            behaviors=["single"],
            trajectories=[full],
            goals=[[0]],
            switch_cells=[None],
        )
        agent = Agent("a0", full[:3], horizon=len(full))
        return Scene(lattice, np.ones((9, 9)), agents=[agent], truth=truth)

    def test_perfect_inference(self, scene):
        truth = scene.truth
        ctx = PredictionContext(scene, truth.sources, truth.relations, ModelParams())
        report = evaluate(scene, predict_offline(ctx), truth.sources, truth.relations)
        assert report.mhd == [0.0]
        assert report.s_accuracy == 1.0
        assert report.r_accuracy == 1.0
        assert report.sr_accuracy == 1.0
        assert report.nll[0] == pytest.approx(0.5, abs=1e-2)
        assert report.behaviors.confusion[0, 0] == 1
        assert report.cue_behaviors.confusion[0, 0] == 1
        assert report.intent_accuracy == []

    def test_summary_row(self, scene):
        row = EvalReport(method="sp", mhd=[1.0, 3.0, None], s_accuracy=0.5).summary_row()
        assert row["method"] == "sp"
        assert row["mhd"] == 2.0
        assert row["nll"] is None
        assert row["s_accuracy"] == 0.5

    def test_needs_truth(self, scene):
        bare = Scene(scene.lattice, scene.cmap, agents=scene.agents)
        with pytest.raises(InputError):
            evaluate(bare)

    def test_prediction_count_checked(self, scene):
        truth = scene.truth
        ctx = PredictionContext(scene, truth.sources, truth.relations, ModelParams())
        preds = predict_offline(ctx)
        with pytest.raises(InputError):
            evaluate(scene, preds * 2, truth.sources, truth.relations)

    def test_sources_only(self, scene):
        report = evaluate(scene, sources=[Source((1, 1))])
        assert report.s_accuracy == 0.0
        assert report.matched == [False]
        assert report.r_accuracy is None
