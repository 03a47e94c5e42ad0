"""Tests for parameter groups, presets and config resolution."""

import json

import pytest

from intentforge.engine.config import (
    ChainConfig,
    ClusterConfig,
    GreedyParams,
    ModelParams,
    PredictorConfig,
    RenderConfig,
    RunConfig,
    SweepConfig,
    SynthConfig,
    list_presets,
    load_preset,
    merge,
    resolve_config,
)
from intentforge.errors import ConfigError


class TestParams:
    def test_defaults(self):
        p = ModelParams()
        assert (p.beta, p.lam, p.rho, p.kappa, p.gamma) == (0.05, 0.5, 0.95, 0.3, 0.1)

    def test_lambda_key(self):
        assert ModelParams.from_dict({"lambda": 2.0}).lam == 2.0
        assert ModelParams(lam=2.0).to_dict()["lambda"] == 2.0

    def test_unknown_keys_ignored(self):
        assert ModelParams.from_dict({"beta": 0.1, "colour": "red"}).beta == 0.1

    @pytest.mark.parametrize("cls,kwargs", [
        (ModelParams, {"beta": 0}),
        (ModelParams, {"rho": 1.0}),
        (ModelParams, {"max_goals": 0}),
        (ChainConfig, {"iterations": 10, "burn_in": 10}),
        (ChainConfig, {"mix": (0, 0, 0)}),
        (PredictorConfig, {"online_mode": "median"}),
        (GreedyParams, {"tau": 0}),
        (SynthConfig, {"mix": (0.5, 0.2, 0.2)}),
        (SynthConfig, {"obstacle_ratio": 0.8}),
        (SynthConfig, {"width": 1}),
        (ClusterConfig, {"angular_bins": 6}),
        (RenderConfig, {"cell_size": 0}),
        (SweepConfig, {"observed_fractions": (0.0,)}),
    ])
    def test_invalid(self, cls, kwargs):
        with pytest.raises(ConfigError):
            cls(**kwargs)

    def test_wrong_type_is_config_error(self):
        with pytest.raises(ConfigError):
            ChainConfig.from_dict({"mix": [1.0, 2.0]})

    def test_zero_iterations_allowed(self):
        assert ChainConfig(iterations=0, burn_in=0).iterations == 0

    def test_greedy_sign(self):
        assert GreedyParams(tau=0.1).effective_tau == -0.1
        assert GreedyParams(tau=-0.1, literal_sign=True).effective_tau == 0.1


class TestSweep:
    def test_grid_order(self):
        sweep = SweepConfig(n_sources=(2, 3), n_agents=(10,), seeds=(0, 1), observed_fractions=(0.5, 0.4))
        grid = sweep.grid()
        assert len(grid) == 8
        assert grid[0] == (2, 10, 0, 0.5)
        assert grid[1] == (2, 10, 1, 0.5)
        assert grid[-1] == (3, 10, 1, 0.4)

    def test_to_dict_lists(self):
        assert SweepConfig().to_dict()["n_sources"] == [2, 3, 5, 8]


class TestResolution:
    def test_presets_shipped(self):
        names = list_presets()
        for name in ("defaults", "toy", "toy_sweep", "intent_suite"):
            assert name in names

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            load_preset("nope")

    def test_merge_is_recursive(self):
        out = merge({"a": {"x": 1, "y": 2}, "b": 1}, {"a": {"y": 3}})
        assert out == {"a": {"x": 1, "y": 3}, "b": 1}

    def test_defaults_round_trip(self):
        run = RunConfig.from_dict(resolve_config())
        assert run.model == ModelParams()
        assert run.chain.iterations == 1500
        assert RunConfig.from_dict(run.to_dict()) == run

    def test_precedence(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"synth": {"width": 30, "n_agents": 7}}))
        data = resolve_config(str(path), {"synth": {"n_agents": 9}}, preset="toy")
        run = RunConfig.from_dict(data)
        assert run.synth.width == 30
        assert run.synth.n_agents == 9
        assert run.synth.height == 24
        assert run.model.beta == 0.05

    def test_preset_sets_sweep(self):
        run = RunConfig.from_dict(resolve_config(preset="toy_sweep"))
        assert run.sweep.method == ""
        assert len(run.sweep.grid()) == 4 * 4 * 3 * 3

    def test_intent_suite_mix(self):
        run = RunConfig.from_dict(resolve_config(preset="intent_suite"))
        assert run.synth.mix == (0.96, 0.026, 0.014)
        assert run.synth.n_sources == 5

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            resolve_config(str(tmp_path / "absent.json"))

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            resolve_config(str(path))
