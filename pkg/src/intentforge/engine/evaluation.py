"""Trajectory, source-localization and intent metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.metrics import auc, confusion_matrix

from ..errors import InputError, MetricError
from .config import FieldParams, ModelParams
from .fields import FieldCache, VectorField
from .models import BEHAVIORS, Box, Cell, Lattice, Scene, Source
from .predictor import Prediction, visit_indices

logger = logging.getLogger(__name__)

IOU_THRESHOLD = 0.5


# -- Trajectories ------------------------------------------------------------------


def mhd(a: list[Cell], b: list[Cell]) -> float:
    """Modified Hausdorff distance: the larger of the two mean closest-point distances."""
    if len(a) == 0 or len(b) == 0:
        raise MetricError("MHD needs two non-empty trajectories")
    d = cdist(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return float(max(d.min(axis=1).mean(), d.min(axis=0).mean()))


def model_nll(cells: list[Cell], field_: VectorField, lam: float) -> float:
    """(λ / (t2 − t1)) · Σ |F(x_t) · (x_{t+1} − x_t)| over the segment ``cells``."""
    steps = len(cells) - 1
    if steps < 1:
        raise MetricError("NLL needs a segment with t2 > t1")
    arr = np.asarray(cells, dtype=int)
    d = np.diff(arr, axis=0)
    f = field_.data[arr[:-1, 1], arr[:-1, 0]]
    return float(lam / steps * np.abs(f[:, 0] * d[:, 0] + f[:, 1] * d[:, 1]).sum())


# -- Sources -----------------------------------------------------------------------


def box_iou(a: Box, b: Box) -> float:
    """Intersection over union of inclusive integer boxes."""
    ix = min(a[2], b[2]) - max(a[0], b[0]) + 1
    iy = min(a[3], b[3]) - max(a[1], b[1]) + 1
    inter = max(ix, 0) * max(iy, 0)
    area_a = (a[2] - a[0] + 1) * (a[3] - a[1] + 1)
    area_b = (b[2] - b[0] + 1) * (b[3] - b[1] + 1)
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def prediction_box(source: Source, lattice: Lattice) -> Box:
    """Bounding box of the 2-sigma ellipse of (μ, Σ), rounded half-up and clipped."""
    rx = 2.0 * math.sqrt(max(float(source.sigma[0, 0]), 0.0))
    ry = 2.0 * math.sqrt(max(float(source.sigma[1, 1]), 0.0))
    x, y = source.mu
    return (
        max(0, math.floor(x - rx + 0.5)),
        max(0, math.floor(y - ry + 0.5)),
        min(lattice.width - 1, math.floor(x + rx + 0.5)),
        min(lattice.height - 1, math.floor(y + ry + 0.5)),
    )


@dataclass
class SourceMatch:
    truth: int
    predicted: int
    iou: float


def match_boxes(pred: list[Box], truth: list[Box], threshold: float = IOU_THRESHOLD) -> list[SourceMatch]:
    """Greedy one-to-one matching by descending IOU; pairs below ``threshold`` never match."""
    pairs = []
    for g, tb in enumerate(truth):
        for p, pb in enumerate(pred):
            iou = box_iou(pb, tb)
            if iou >= threshold:
                pairs.append((-iou, g, p))
    pairs.sort()
    used_g, used_p, out = set(), set(), []
    for neg, g, p in pairs:
        if g in used_g or p in used_p:
            continue
        used_g.add(g)
        used_p.add(p)
        out.append(SourceMatch(g, p, -neg))
    return sorted(out, key=lambda m: m.truth)


def source_localization(
    pred: list[Source], truth_boxes: list[Box], lattice: Lattice,
) -> tuple[float, list[SourceMatch]]:
    """Fraction of ground-truth sources matched at IOU ≥ 0.5, and the matches."""
    boxes = [prediction_box(s, lattice) for s in pred]
    matches = match_boxes(boxes, truth_boxes)
    if not truth_boxes:
        return 1.0, matches
    return len(matches) / len(truth_boxes), matches


def _mapping(matches: list[SourceMatch]) -> dict[int, int]:
    return {m.truth: m.predicted for m in matches}


def relation_recall(gt_row: np.ndarray, pred_row: np.ndarray, mapping: dict[int, int], literal: bool = False) -> float:
    """Recovered true goals over true goals for one agent.

    With ``literal`` the numerator counts every truth column whose label
    agrees with its matched prediction column (unmatched columns read 0),
    which can exceed 1.
    """
    count = int(gt_row.sum())
    if count == 0:
        raise MetricError("agent has no true goal")
    hits = 0
    for j in range(len(gt_row)):
        k = mapping.get(j)
        pred = int(pred_row[k]) if k is not None else 0
        if literal:
            hits += int(pred == int(gt_row[j]))
        else:
            hits += int(gt_row[j] == 1 and pred == 1)
    return hits / count


def relation_accuracy(
    gt: np.ndarray, pred: np.ndarray, matches: list[SourceMatch], literal: bool = False,
) -> float:
    """Mean per-agent goal recall under the source matching; goal-less agents are skipped."""
    gt = np.atleast_2d(gt)
    pred = np.atleast_2d(pred)
    if gt.shape[0] != pred.shape[0]:
        raise InputError(f"{gt.shape[0]} truth rows vs {pred.shape[0]} predicted rows")
    mapping = _mapping(matches)
    values = [
        relation_recall(g, p, mapping, literal)
        for g, p in zip(gt, pred) if g.sum() > 0
    ]
    return float(np.mean(values)) if values else 1.0


def joint_flags(gt: np.ndarray, pred: np.ndarray, matches: list[SourceMatch]) -> np.ndarray:
    """Per agent: every true goal localized and exactly the matched goals selected."""
    mapping = _mapping(matches)
    flags = np.zeros(len(gt), dtype=bool)
    for i, (g, p) in enumerate(zip(gt, pred)):
        goals = np.flatnonzero(g)
        if not all(int(j) in mapping for j in goals):
            continue
        wanted = {mapping[int(j)] for j in goals}
        flags[i] = wanted == {int(k) for k in np.flatnonzero(p)}
    return flags


# -- Behaviors ---------------------------------------------------------------------


def pr_curve(labels, scores) -> tuple[np.ndarray, np.ndarray]:
    """Precision and recall swept over every distinct score, from (recall 0, precision 1)."""
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    positives = int(labels.sum())
    precision, recall = [1.0], [0.0]
    for t in np.unique(scores)[::-1]:
        hit = scores >= t
        tp = int((hit & labels).sum())
        precision.append(tp / int(hit.sum()))
        recall.append(tp / positives if positives else 0.0)
    return np.asarray(precision), np.asarray(recall)


def average_precision(labels, scores) -> float:
    precision, recall = pr_curve(labels, scores)
    if len(recall) < 2:
        return 0.0
    return float(auc(recall, precision))


@dataclass
class BehaviorScores:
    confusion: np.ndarray
    precision: dict[str, list[float]]
    recall: dict[str, list[float]]
    ap: dict[str, float]

    @property
    def mean_ap(self) -> float:
        return float(np.mean(list(self.ap.values()))) if self.ap else 0.0

    def to_dict(self) -> dict:
        return {
            "labels": list(BEHAVIORS),
            "confusion": self.confusion.tolist(),
            "precision": self.precision,
            "recall": self.recall,
            "ap": self.ap,
            "map": self.mean_ap,
        }


def behavior_scores(truth: list[str], predicted: list[str], scores: list[dict[str, float]]) -> BehaviorScores:
    """3×3 confusion over behaviors plus per-class PR curves and AP."""
    if not (len(truth) == len(predicted) == len(scores)):
        raise InputError("behavior truth, predictions and scores must align")
    cm = confusion_matrix(truth, predicted, labels=list(BEHAVIORS))
    precision, recall, ap = {}, {}, {}
    for z in BEHAVIORS:
        labels = [t == z for t in truth]
        s = [row.get(z, 0.0) for row in scores]
        p, r = pr_curve(labels, s)
        precision[z], recall[z] = p.tolist(), r.tolist()
        ap[z] = average_precision(labels, s)
    return BehaviorScores(cm, precision, recall, ap)


# -- Motion-cue intent baseline ----------------------------------------------------

CUE_WINDOW = 3
CUE_MIN_STAY = 5
CUE_MIN_TURN = math.pi / 2


def longest_stay(cells: list[Cell]) -> int:
    """Longest run of repeated cells before the track first reaches its final cell."""
    if not cells:
        return 0
    arrival = cells.index(cells[-1])
    best = run = 0
    for a, b in zip(cells[:arrival], cells[1:arrival + 1]):
        run = run + 1 if a == b else 0
        best = max(best, run)
    return best


def turning_angle(cells: list[Cell], window: int = CUE_WINDOW) -> float:
    """Largest heading change in radians between consecutive ``window``-move displacements.

    Repeated cells are dropped first, so pauses do not shorten the window.
    """
    moves = [c for k, c in enumerate(cells) if k == 0 or c != cells[k - 1]]
    best = 0.0
    for t in range(window, len(moves) - window):
        a = np.subtract(moves[t], moves[t - window]).astype(float)
        b = np.subtract(moves[t + window], moves[t]).astype(float)
        na, nb = np.hypot(*a), np.hypot(*b)
        if na == 0 or nb == 0:
            continue
        cos = float(np.clip(a @ b / (na * nb), -1.0, 1.0))
        best = max(best, math.acos(cos))
    return best


def motion_cue_scores(
    cells: list[Cell],
    window: int = CUE_WINDOW,
    min_stay: int = CUE_MIN_STAY,
    min_turn: float = CUE_MIN_TURN,
) -> tuple[str, dict[str, float]]:
    """Behavior label and per-class scores from motion alone.

    The longest stay before arrival scores "sequential", the largest
    turning angle scores "change"; a track with neither cue is "single".
    """
    stay = longest_stay(cells)
    turn = turning_angle(cells, window)
    scores = {
        "single": -max(stay / min_stay, turn / min_turn),
        "sequential": float(stay),
        "change": turn,
    }
    if stay >= min_stay:
        return "sequential", scores
    if turn >= min_turn:
        return "change", scores
    return "single", scores


def motion_cue_behaviors(
    trajectories: list[list[Cell]], truth: list[str], window: int = CUE_WINDOW,
) -> BehaviorScores:
    """Confusion, PR curves and AP of the motion-cue labels against ``truth``."""
    labelled = [motion_cue_scores(cells, window) for cells in trajectories]
    return behavior_scores(truth, [z for z, _ in labelled], [s for _, s in labelled])


# -- Online intent accuracy --------------------------------------------------------


def true_intents(
    cells: list[Cell], goals: list[int], behavior: str, switch_cell: Cell | None, sources: list[Source],
) -> list[int]:
    """The source each frame of a ground-truth track is heading to.

    A change of intent heads to the second goal after the switch cell; a
    sequential track heads to the next goal once the previous one is reached.
    """
    if not goals:
        return []
    if behavior == "change" and switch_cell is not None and switch_cell in cells:
        s = cells.index(switch_cell)
        return [goals[0]] * (s + 1) + [goals[1]] * (len(cells) - s - 1)
    visits = visit_indices(cells, [sources[j].mu for j in goals])
    out, k = [], 0
    for t in range(len(cells)):
        while k < min(len(visits), len(goals) - 1) and visits[k] < t:
            k += 1
        out.append(goals[k])
    return out


def predicted_intents(pred: Prediction) -> list[int]:
    """Goal predicted for each frame after the prefix: GM's choice or the online posterior mode."""
    if pred.frame_goals:
        return list(pred.frame_goals)
    return [int(np.argmax(row)) for row in pred.goal_posterior]


def intent_accuracy(
    scene: Scene, predictions: list[Prediction], mapping: dict[int, int] | None = None,
) -> list[float | None]:
    """Fraction of agents whose predicted goal is the true one, per frame after the prefix.

    ``mapping`` sends predicted source indices to ground-truth ones; a track
    that stopped early keeps its last prediction.
    """
    truth = scene.truth
    if truth is None:
        raise InputError("intent accuracy needs a scene with ground truth")
    span = max((a.horizon - a.t0 for a in scene.agents), default=0)
    hits, counts = np.zeros(span), np.zeros(span)
    for i, (agent, pred) in enumerate(zip(scene.agents, predictions)):
        guesses = predicted_intents(pred)
        if not guesses or i >= len(truth.goals) or not truth.goals[i]:
            continue
        actual = true_intents(
            truth.trajectories[i], truth.goals[i],
            truth.behaviors[i] if i < len(truth.behaviors) else "single",
            truth.switch_cells[i] if i < len(truth.switch_cells) else None, truth.sources,
        )
        for k in range(min(agent.horizon, len(actual)) - agent.t0):
            guess = guesses[min(k, len(guesses) - 1)]
            if mapping is not None:
                guess = mapping.get(guess, -1)
            hits[k] += guess == actual[agent.t0 + k]
            counts[k] += 1
    return [float(h / c) if c else None for h, c in zip(hits, counts)]


# -- Report ------------------------------------------------------------------------


@dataclass
class EvalReport:
    """Every metric of one scene; rates lie in [0, 1]."""

    method: str = ""
    mhd: list[float | None] = field(default_factory=list)
    nll: list[float | None] = field(default_factory=list)
    method_nll: list[float | None] = field(default_factory=list)
    ious: list[float] = field(default_factory=list)
    matched: list[bool] = field(default_factory=list)
    s_accuracy: float | None = None
    r_accuracy: float | None = None
    sr_accuracy: float | None = None
    behaviors: BehaviorScores | None = None
    cue_behaviors: BehaviorScores | None = None
    intent_accuracy: list[float | None] = field(default_factory=list)

    @staticmethod
    def _mean(values) -> float | None:
        vals = [v for v in values if v is not None and math.isfinite(v)]
        return float(np.mean(vals)) if vals else None

    def summary_row(self) -> dict:
        row = {
            "method": self.method,
            "mhd": self._mean(self.mhd),
            "nll": self._mean(self.nll),
            "method_nll": self._mean(self.method_nll),
            "s_accuracy": self.s_accuracy,
            "r_accuracy": self.r_accuracy,
            "sr_accuracy": self.sr_accuracy,
        }
        if self.behaviors is not None:
            for z in BEHAVIORS:
                row[f"ap_{z}"] = self.behaviors.ap[z]
        if self.cue_behaviors is not None:
            for z in BEHAVIORS:
                row[f"cue_ap_{z}"] = self.cue_behaviors.ap[z]
        if self.intent_accuracy:
            row["intent_accuracy"] = self._mean(self.intent_accuracy)
        return row

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "summary": self.summary_row(),
            "agents": {"mhd": self.mhd, "nll": self.nll, "method_nll": self.method_nll},
            "sources": {"iou": self.ious, "matched": self.matched},
            "behaviors": self.behaviors.to_dict() if self.behaviors is not None else None,
            "cue_behaviors": self.cue_behaviors.to_dict() if self.cue_behaviors is not None else None,
            "intent_accuracy": self.intent_accuracy,
        }


def _heading_goal(prefix: list[Cell], pred: Prediction, sources: list[Source]) -> int | None:
    """Goal the prediction heads to after ``prefix``.

    A per-frame choice wins; otherwise the first of ``pred.goals`` not yet
    reached, in order, by ``prefix``.
    """
    if pred.frame_goals:
        return pred.frame_goals[0]
    goals = pred.goals
    if not goals:
        return None
    reached = len(visit_indices(prefix, [sources[j].mu for j in goals]))
    return goals[min(reached, len(goals) - 1)]


def evaluate(
    scene: Scene,
    predictions: list[Prediction] | None = None,
    sources: list[Source] | None = None,
    relations: np.ndarray | None = None,
    params: ModelParams | None = None,
    field_params: FieldParams | None = None,
    cmap: np.ndarray | None = None,
    literal_relations: bool = False,
) -> EvalReport:
    """Score predictions and an inferred {S, R} against the scene's ground truth.

    Trajectory metrics use the future segments from the last observed cell;
    the model NLL measures the true future under the field of the goal the
    prediction was heading to.
    """
    truth = scene.truth
    if truth is None:
        raise InputError("evaluation needs a scene with ground truth")
    params = params or ModelParams()
    report = EvalReport(method=predictions[0].method if predictions else "")
    matches: list[SourceMatch] = []

    if sources is not None:
        boxes = [prediction_box(s, scene.lattice) for s in sources]
        for tb in truth.boxes:
            report.ious.append(max((box_iou(pb, tb) for pb in boxes), default=0.0))
        report.s_accuracy, matches = source_localization(sources, truth.boxes, scene.lattice)
        matched = {m.truth for m in matches}
        report.matched = [g in matched for g in range(len(truth.boxes))]
        if relations is not None and truth.relations.size:
            report.r_accuracy = relation_accuracy(truth.relations, relations, matches, literal_relations)
            report.sr_accuracy = float(joint_flags(truth.relations, relations, matches).mean())

    if predictions:
        if len(predictions) != len(scene.agents):
            raise InputError(f"{len(predictions)} predictions for {len(scene.agents)} agents")
        view = scene.with_cmap(scene.cmap if cmap is None else cmap)
        cache = FieldCache(scene.lattice.shape, field_params or FieldParams())
        for agent, pred, full in zip(scene.agents, predictions, truth.trajectories):
            if pred.agent_id != agent.id:
                raise InputError(f"prediction for {pred.agent_id!r} paired with agent {agent.id!r}")
            t0 = agent.t0
            gt_future = full[t0 - 1:]
            report.mhd.append(mhd(gt_future, pred.trajectory.cells[t0 - 1:]))
            goal = _heading_goal(agent.cells, pred, sources or []) if sources else None
            if goal is not None and len(gt_future) > 1:
                fld = cache.cumulative(view, sources[goal].mu)
                report.nll.append(model_nll(gt_future, fld, params.lam))
            else:
                report.nll.append(None)
            report.method_nll.append(pred.nll)
        if truth.behaviors and all(p.behavior is not None for p in predictions):
            report.behaviors = behavior_scores(
                truth.behaviors,
                [p.behavior for p in predictions],
                [p.class_scores for p in predictions],
            )
            report.cue_behaviors = motion_cue_behaviors([a.cells for a in scene.agents], truth.behaviors)
        if sources is not None and any(p.frame_goals or p.goal_posterior for p in predictions):
            mapping = {p: t for t, p in _mapping(matches).items()}
            report.intent_accuracy = intent_accuracy(scene, predictions, mapping)
    logger.debug("evaluation %s: %s", report.method, report.summary_row())
    return report
