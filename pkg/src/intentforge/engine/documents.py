"""JSON documents for scenes, inferred states, predictions, reports and manifests."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError, SceneFormatError
from .models import Agent, GroundTruth, Lattice, Scene, Source, Trajectory
from .predictor import Prediction
from .scene import validate_scene

VERSION = 1
SCENE = "intentforge-scene"
STATE = "intentforge-state"
PREDICTIONS = "intentforge-predictions"
REPORT = "intentforge-report"
CLUSTERS = "intentforge-clusters"
MANIFEST = "intentforge-manifest"


def finite(value):
    """JSON-safe float: non-finite values become ``None``."""
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def write_json(path: str, doc: dict) -> str:
    """Write ``doc`` canonically; returns the path."""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="\n") as f:
        f.write(dumps(doc))
    return path


def read_json(path: str, tag: str) -> dict:
    try:
        with open(path) as f:
            doc = json.load(f)
    except FileNotFoundError as exc:
        raise InputError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != tag:
        raise SceneFormatError(f"{path}: expected a {tag!r} document")
    if doc.get("version") != VERSION:
        raise SceneFormatError(f"{path}: unsupported version {doc.get('version')!r}")
    return doc


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


# -- Constraint maps ---------------------------------------------------------------


def encode_rows(cmap: np.ndarray) -> list[list[list[int]]]:
    """Run-length encode each row as ``[[label, count], ...]``."""
    rows = []
    for row in np.asarray(cmap):
        runs: list[list[int]] = []
        for value in row.tolist():
            if runs and runs[-1][0] == value:
                runs[-1][1] += 1
            else:
                runs.append([int(value), 1])
        rows.append(runs)
    return rows


def decode_rows(rows, lattice: Lattice) -> np.ndarray:
    if not isinstance(rows, list) or len(rows) != lattice.height:
        raise SceneFormatError(f"constraint map needs {lattice.height} rows")
    out = np.empty(lattice.shape, dtype=np.int8)
    for y, runs in enumerate(rows):
        x = 0
        try:
            for value, count in runs:
                if value not in (-1, 1) or count < 1:
                    raise SceneFormatError(f"row {y}: bad run {[value, count]}")
                if x + count > lattice.width:
                    raise SceneFormatError(f"row {y}: runs exceed width {lattice.width}")
                out[y, x:x + count] = value
                x += count
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SceneFormatError):
                raise
            raise SceneFormatError(f"row {y}: malformed runs") from exc
        if x != lattice.width:
            raise SceneFormatError(f"row {y}: runs cover {x} of {lattice.width} cells")
    return out


# -- Scenes ----------------------------------------------------------------------


def _truth_to_dict(truth: GroundTruth) -> dict:
    out = {
        "sources": [s.to_dict() for s in truth.sources],
        "boxes": [list(b) for b in truth.boxes],
        "relations": truth.relations.tolist(),
        "behaviors": list(truth.behaviors),
        "trajectories": [[[x, y] for x, y in cells] for cells in truth.trajectories],
        "goals": [list(g) for g in truth.goals],
        "switch_cells": [list(c) if c is not None else None for c in truth.switch_cells],
    }
    if truth.archetypes is not None:
        out["archetypes"] = list(truth.archetypes)
    return out


def _truth_from_dict(data: dict) -> GroundTruth:
    rows = data.get("relations") or []
    return GroundTruth(
        sources=[Source.from_dict(s) for s in data.get("sources", [])],
        boxes=[tuple(b) for b in data.get("boxes", [])],
        relations=np.array(rows, dtype=np.int8) if rows else np.zeros((0, 0), dtype=np.int8),
        behaviors=list(data.get("behaviors", [])),
        trajectories=[[tuple(c) for c in cells] for cells in data.get("trajectories", [])],
        goals=[list(g) for g in data.get("goals", [])],
        switch_cells=[tuple(c) if c is not None else None for c in data.get("switch_cells", [])],
        archetypes=data.get("archetypes"),
    )


def scene_to_dict(scene: Scene) -> dict:
    doc = {
        "format": SCENE,
        "version": VERSION,
        "name": scene.name,
        "width": scene.lattice.width,
        "height": scene.lattice.height,
        "cmap": encode_rows(scene.cmap),
        "sources": [s.to_dict() for s in scene.sources],
        "agents": [
            {
                "id": a.id,
                "horizon": a.horizon,
                "frames": [[f, x, y] for f, x, y in a.trajectory().frames()],
            }
            for a in scene.agents
        ],
    }
    if scene.features is not None:
        doc["features"] = np.round(scene.features, 6).tolist()
    if scene.truth is not None:
        doc["truth"] = _truth_to_dict(scene.truth)
    return doc


def _agent_from_dict(data: dict) -> Agent:
    try:
        frames = data["frames"]
        if not frames:
            raise SceneFormatError(f"agent {data.get('id')!r}: no frames")
        start = int(frames[0][0])
        for k, (t, _, _) in enumerate(frames):
            if int(t) != start + k:
                raise SceneFormatError(f"agent {data['id']!r}: frame {t} out of sequence")
        return Agent(
            id=str(data["id"]),
            cells=[(int(x), int(y)) for _, x, y in frames],
            horizon=int(data.get("horizon", len(frames))),
            start_frame=start,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SceneFormatError):
            raise
        raise SceneFormatError(f"malformed agent record: {exc}") from exc


def scene_from_dict(doc: dict) -> Scene:
    """Parse and validate a scene document; any broken invariant is a SceneFormatError."""
    if doc.get("format") != SCENE:
        raise SceneFormatError(f"expected a {SCENE!r} document")
    if doc.get("version") != VERSION:
        raise SceneFormatError(f"unsupported scene version {doc.get('version')!r}")
    try:
        lattice = Lattice(int(doc["width"]), int(doc["height"]))
        cmap = decode_rows(doc["cmap"], lattice)
        sources = [Source.from_dict(s) for s in doc.get("sources", [])]
        agents = [_agent_from_dict(a) for a in doc.get("agents", [])]
        features = np.array(doc["features"], dtype=float) if "features" in doc else None
        truth = _truth_from_dict(doc["truth"]) if "truth" in doc else None
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SceneFormatError):
            raise
        raise SceneFormatError(f"malformed scene document: {exc}") from exc
    scene = Scene(lattice, cmap, sources, agents, features, truth, str(doc.get("name", "")))
    report = validate_scene(scene)
    if not report.ok:
        raise SceneFormatError("; ".join(report.violations))
    return scene


def save_scene(path: str, scene: Scene) -> str:
    return write_json(path, scene_to_dict(scene))


def load_scene(path: str) -> Scene:
    return scene_from_dict(read_json(path, SCENE))


# -- Inferred states ---------------------------------------------------------------


@dataclass
class InferredState:
    """The persisted MAP sample {C, S, R} plus diagnostics."""

    cmap: np.ndarray
    sources: list[Source]
    relations: np.ndarray
    log_post: float | None = None
    goals: list[int] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


def state_to_dict(state, scene_name: str = "", diagnostics: dict | None = None) -> dict:
    """``state`` is a chain state or an :class:`InferredState`."""
    return {
        "format": STATE,
        "version": VERSION,
        "scene": scene_name,
        "cmap": encode_rows(state.cmap),
        "sources": [s.to_dict() for s in state.sources],
        "relations": np.asarray(state.relations).tolist(),
        "log_post": finite(state.log_post),
        "goals": [int(g) for g in state.goals],
        "diagnostics": diagnostics or {},
    }


def state_from_dict(doc: dict, lattice: Lattice) -> InferredState:
    try:
        relations = np.array(doc["relations"], dtype=np.int8)
        sources = [Source.from_dict(s) for s in doc["sources"]]
        if relations.ndim != 2:
            relations = relations.reshape(len(doc["relations"]), len(sources))
        return InferredState(
            cmap=decode_rows(doc["cmap"], lattice),
            sources=sources,
            relations=relations,
            log_post=doc.get("log_post"),
            goals=list(doc.get("goals", [])),
            diagnostics=doc.get("diagnostics", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SceneFormatError):
            raise
        raise SceneFormatError(f"malformed state document: {exc}") from exc


def load_state(path: str, lattice: Lattice) -> InferredState:
    return state_from_dict(read_json(path, STATE), lattice)


# -- Predictions -----------------------------------------------------------------


def predictions_to_dict(predictions: list[Prediction], method: str, scene_name: str = "") -> dict:
    return {
        "format": PREDICTIONS,
        "version": VERSION,
        "method": method,
        "scene": scene_name,
        "predictions": [p.to_dict() for p in predictions],
    }


def prediction_from_dict(data: dict, start_frame: int = 0) -> Prediction:
    cells = [(int(x), int(y)) for x, y in data["cells"]]
    return Prediction(
        agent_id=str(data["agent"]),
        method=str(data.get("method", "")),
        trajectory=Trajectory(cells, int(data["t0"]), int(data["horizon"]), start_frame),
        goals=[int(g) for g in data.get("goals", [])],
        behavior=data.get("behavior"),
        switch_cell=tuple(data["switch_cell"]) if data.get("switch_cell") else None,
        stop_reason=data.get("stop_reason"),
        score=data.get("score"),
        nll=data.get("nll"),
        class_scores=dict(data.get("class_scores", {})),
        goal_posterior=data.get("goal_posterior", []),
        frame_goals=[int(g) for g in data.get("frame_goals", [])],
    )


def load_predictions(path: str) -> tuple[str, list[Prediction]]:
    doc = read_json(path, PREDICTIONS)
    try:
        return doc["method"], [prediction_from_dict(p) for p in doc["predictions"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneFormatError(f"{path}: malformed predictions ({exc})") from exc


# -- Reports, clusters, manifests -------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return finite(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_to_dict(report, scene_name: str = "") -> dict:
    return {"format": REPORT, "version": VERSION, "scene": scene_name, **_clean(report.to_dict())}


def suite_to_dict(reports: dict, scene_name: str = "") -> dict:
    return {
        "format": REPORT,
        "version": VERSION,
        "scene": scene_name,
        "reports": {method: _clean(report.to_dict()) for method, report in reports.items()},
    }


def clusters_to_dict(clusters, labels_truth: list[str] | None, purity: float | None, scene_name: str = "") -> dict:
    doc = {
        "format": CLUSTERS,
        "version": VERSION,
        "scene": scene_name,
        **_clean(clusters.result.to_dict()),
        "descriptors": _clean(clusters.descriptors.tolist()),
    }
    if labels_truth is not None:
        doc["truth"] = list(labels_truth)
        doc["purity"] = finite(purity)
    return doc


def manifest(
    command: str,
    config: dict,
    seed: int | None,
    inputs: list[str],
    outputs: list[str],
    wall_clock: float,
) -> dict:
    """Run record listing every written artifact with its SHA-256."""
    return {
        "format": MANIFEST,
        "version": VERSION,
        "command": command,
        "config": _clean(config),
        "seed": seed,
        "inputs": [os.path.abspath(p) for p in inputs],
        "outputs": [{"path": os.path.abspath(p), "sha256": sha256_file(p)} for p in outputs],
        "wall_clock": round(wall_clock, 3),
    }
