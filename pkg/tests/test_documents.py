"""Tests for the JSON document layer."""

import json
import math

import numpy as np
import pytest

from intentforge.engine.config import SynthConfig
from intentforge.engine.documents import (
    SCENE,
    VERSION,
    InferredState,
    decode_rows,
    encode_rows,
    finite,
    load_predictions,
    load_scene,
    load_state,
    manifest,
    predictions_to_dict,
    read_json,
    save_scene,
    scene_from_dict,
    scene_to_dict,
    sha256_file,
    state_to_dict,
    write_json,
)
from intentforge.engine.models import Lattice, Source, Trajectory
from intentforge.engine.predictor import Prediction
from intentforge.engine.synth import synthesize
from intentforge.errors import InputError, SceneFormatError


@pytest.fixture(scope="module")
def scene():
    return synthesize(SynthConfig(width=10, height=8, n_sources=2, n_agents=3, seed=2))


class TestConstraintMap:
    def test_run_length(self):
        cmap = np.array([[1, 1, -1, 1], [-1, -1, -1, -1]])
        assert encode_rows(cmap) == [[[1, 2], [-1, 1], [1, 1]], [[-1, 4]]]
        assert np.array_equal(decode_rows(encode_rows(cmap), Lattice(4, 2)), cmap)

    @pytest.mark.parametrize("rows", [
        [[[1, 3]]],
        [[[1, 4]], [[1, 3]]],
        [[[1, 5]], [[1, 4]]],
        [[[0, 4]], [[1, 4]]],
        [[[1, 2], [1]], [[1, 4]]],
    ])
    def test_malformed_rows(self, rows):
        with pytest.raises(SceneFormatError):
            decode_rows(rows, Lattice(4, 2))


class TestScenes:
    def test_save_and_load(self, scene, tmp_path):
        path = tmp_path / "scene.json"
        save_scene(str(path), scene)
        loaded = load_scene(str(path))
        assert np.array_equal(loaded.cmap, scene.cmap)
        assert [a.cells for a in loaded.agents] == [a.cells for a in scene.agents]
        assert [a.horizon for a in loaded.agents] == [a.horizon for a in scene.agents]
        assert loaded.truth.trajectories == scene.truth.trajectories
        assert np.array_equal(loaded.truth.relations, scene.truth.relations)
        assert loaded.name == scene.name

    def test_writes_are_byte_identical(self, scene, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_scene(str(a), scene)
        save_scene(str(b), scene)
        assert a.read_bytes() == b.read_bytes()
        assert sha256_file(str(a)) == sha256_file(str(b))

    def test_wrong_format(self, scene):
        doc = scene_to_dict(scene)
        doc["format"] = "something-else"
        with pytest.raises(SceneFormatError):
            scene_from_dict(doc)

    def test_wrong_version(self, scene):
        doc = scene_to_dict(scene)
        doc["version"] = VERSION + 1
        with pytest.raises(SceneFormatError):
            scene_from_dict(doc)

    def test_gap_in_frames(self, scene):
        doc = scene_to_dict(scene)
        doc["agents"][0]["frames"][1][0] += 5
        with pytest.raises(SceneFormatError):
            scene_from_dict(doc)

    def test_agent_on_obstacle(self, scene):
        doc = scene_to_dict(scene)
        _, x, y = doc["agents"][0]["frames"][0]
        cmap = scene.cmap.copy()
        cmap[y, x] = -1
        doc["cmap"] = encode_rows(cmap)
        with pytest.raises(SceneFormatError):
            scene_from_dict(doc)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_scene(str(tmp_path / "absent.json"))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(SceneFormatError):
            read_json(str(path), SCENE)


class TestStates:
    def test_infinite_log_post_is_null(self, scene, tmp_path):
        state = InferredState(scene.cmap, [Source((1, 1))], np.ones((3, 1)), log_post=-math.inf, goals=[0, 0, 0])
        doc = state_to_dict(state, scene.name)
        assert doc["log_post"] is None
        path = tmp_path / "state.json"
        write_json(str(path), doc)
        loaded = load_state(str(path), scene.lattice)
        assert loaded.relations.shape == (3, 1)
        assert loaded.sources[0].mu == (1, 1)
        assert loaded.log_post is None

    def test_finite(self):
        assert finite(1) == 1.0
        assert finite(math.nan) is None
        assert finite(None) is None


class TestPredictions:
    def test_load(self, tmp_path):
        pred = Prediction(
            agent_id="a0", method="offline",
            trajectory=Trajectory([(0, 0), (1, 0), (2, 0)], 2, 3),
            goals=[1], behavior="change", switch_cell=(1, 0), score=-math.inf,
        )
        doc = predictions_to_dict([pred], "offline", "toy")
        assert doc["predictions"][0]["score"] is None
        path = tmp_path / "pred.json"
        write_json(str(path), doc)
        method, loaded = load_predictions(str(path))
        assert method == "offline"
        assert loaded[0].trajectory.cells == pred.trajectory.cells
        assert loaded[0].switch_cell == (1, 0)
        assert loaded[0].trajectory.t0 == 2


class TestManifest:
    def test_lists_hashes(self, tmp_path):
        out = tmp_path / "x.json"
        write_json(str(out), {"a": 1})
        doc = manifest("synth", {"chain": {"mix": (1.0, np.float64(math.inf))}}, 3, [], [str(out)], 0.12345)
        assert doc["outputs"][0]["sha256"] == sha256_file(str(out))
        assert doc["config"]["chain"]["mix"] == [1.0, None]
        assert doc["wall_clock"] == 0.123
        json.dumps(doc, allow_nan=False)
