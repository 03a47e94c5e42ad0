"""Parameter groups, presets and config-file loading."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields

from ..errors import ConfigError

_PRESET_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "presets")


def _known(cls, data: dict | None) -> dict:
    """Keep only keys naming a field of ``cls``; JSON ``lambda`` maps to ``lam``."""
    data = dict(data or {})
    if "lambda" in data and "lam" not in data:
        data["lam"] = data.pop("lambda")
    names = {f.name for f in fields(cls)}
    return {k: v for k, v in data.items() if k in names}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


class _Params:
    """Shared ``from_dict`` / ``to_dict`` for flat parameter groups."""

    @classmethod
    def from_dict(cls, data: dict | None):
        try:
            return cls(**_known(cls, data))
        except TypeError as exc:
            raise ConfigError(f"{cls.__name__}: {exc}") from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        if "lam" in out:
            out["lambda"] = out.pop("lam")
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out


@dataclass
class FieldParams(_Params):
    sigma_r_sq: float = 1e-2
    sigma_a_sq: float = 1e4

    def __post_init__(self) -> None:
        _require(self.sigma_r_sq > 0, "sigma_r_sq must be > 0")
        _require(self.sigma_a_sq > 0, "sigma_a_sq must be > 0")


@dataclass
class PathCostParams(_Params):
    lam: float = 0.5
    epsilon: float = 1e-3

    def __post_init__(self) -> None:
        _require(self.lam > 0, "lambda must be > 0")
        _require(self.epsilon > 0, "epsilon must be > 0")


@dataclass
class ModelParams(_Params):
    beta: float = 0.05
    eta: float = 3.0
    rho: float = 0.95
    kappa: float = 0.3
    gamma: float = 0.1
    lam: float = 0.5
    epsilon: float = 1e-3
    max_goals: int = 3

    def __post_init__(self) -> None:
        _require(self.beta > 0, "beta must be > 0")
        _require(self.eta > 0, "eta must be > 0")
        _require(0 < self.rho < 1, "rho must lie in (0, 1)")
        _require(0 <= self.kappa <= 1, "kappa must lie in [0, 1]")
        _require(0 <= self.gamma <= 1, "gamma must lie in [0, 1]")
        _require(self.lam > 0, "lambda must be > 0")
        _require(self.max_goals >= 1, "max_goals must be >= 1")

    @property
    def path(self) -> PathCostParams:
        return PathCostParams(lam=self.lam, epsilon=self.epsilon)


@dataclass
class ChainConfig(_Params):
    iterations: int = 1500
    burn_in: int = 150
    seed: int = 0
    gmm_refit_period: int = 100
    mix: tuple[float, float, float] = (6.0, 1.0, 3.0)
    trace_period: int = 10
    audit_period: int = 1000
    stop_speed: float = 0.2
    stop_frames: int = 10

    def __post_init__(self) -> None:
        self.mix = tuple(float(v) for v in self.mix)
        _require(len(self.mix) == 3, "mix needs three weights (flip, birth-death, relation)")
        _require(all(v >= 0 for v in self.mix) and sum(self.mix) > 0, "mix weights must be >= 0")
        _require(self.iterations >= 0 and self.burn_in >= 0, "iterations and burn_in must be >= 0")
        _require(
            self.iterations == 0 or self.iterations > self.burn_in,
            "iterations must exceed burn_in",
        )
        _require(self.trace_period >= 1 and self.audit_period >= 1, "periods must be >= 1")
        _require(self.gmm_refit_period >= 1, "gmm_refit_period must be >= 1")


@dataclass
class PredictorConfig(_Params):
    switch_stride: int = 3
    exhaustive_switch: bool = False
    dwell: int = 10
    samples: int = 100
    relation_sweeps: int = 20
    online_mode: str = "mean"
    stay_threshold: float = 0.1

    def __post_init__(self) -> None:
        _require(self.switch_stride >= 1, "switch_stride must be >= 1")
        _require(self.dwell >= 0, "dwell must be >= 0")
        _require(self.samples >= 1, "samples must be >= 1")
        _require(self.relation_sweeps >= 0, "relation_sweeps must be >= 0")
        _require(self.online_mode in ("mean", "argmax"), "online_mode is 'mean' or 'argmax'")


@dataclass
class GreedyParams(_Params):
    tau: float = -0.1
    literal_sign: bool = False

    def __post_init__(self) -> None:
        _require(self.tau != 0, "tau must be non-zero")

    @property
    def effective_tau(self) -> float:
        return abs(self.tau) if self.literal_sign else -abs(self.tau)


@dataclass
class SynthConfig(_Params):
    width: int = 20
    height: int = 20
    n_sources: int = 2
    n_agents: int = 20
    obstacle_ratio: float = 0.15
    noise: float = 0.0
    speed: float = 1.0
    mix: tuple[float, float, float] = (1.0, 0.0, 0.0)
    dwell: int = 10
    hold_factor: float = 0.0
    end_dwell: int = 0
    max_goals: int = 2
    seed: int = 0
    observed_fraction: float = 0.5
    features: bool = False
    min_source_gap: float = 5.0

    def __post_init__(self) -> None:
        self.mix = tuple(float(v) for v in self.mix)
        _require(self.width >= 2 and self.height >= 2, "lattice must be at least 2x2")
        _require(self.n_sources >= 1, "n_sources must be >= 1")
        _require(self.n_agents >= 0, "n_agents must be >= 0")
        _require(0.0 <= self.obstacle_ratio <= 0.5, "obstacle_ratio must lie in [0, 0.5]")
        _require(self.noise >= 0, "noise must be >= 0")
        _require(self.hold_factor >= 0 and self.end_dwell >= 0, "hold_factor and end_dwell must be >= 0")
        _require(0 < self.speed <= 1, "speed must lie in (0, 1]")
        _require(
            len(self.mix) == 3 and min(self.mix) >= 0 and abs(sum(self.mix) - 1.0) < 1e-9,
            "behavior mix must lie on the simplex",
        )
        _require(0 < self.observed_fraction <= 1, "observed_fraction must lie in (0, 1]")
        _require(self.max_goals >= 2, "max_goals must be >= 2")


@dataclass
class ClusterConfig(_Params):
    k: int = 3
    half_width: int = 10
    radial_bins: int = 5
    angular_bins: int = 8
    restarts: int = 10
    max_iter: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        _require(self.k >= 1, "k must be >= 1")
        _require(self.half_width >= 1, "half_width must be >= 1")
        _require(self.angular_bins == 8, "dihedral alignment needs 8 angular bins")


@dataclass
class RenderConfig(_Params):
    cell_size: int = 8
    arrow_stride: int = 1
    title: str = ""

    def __post_init__(self) -> None:
        _require(self.cell_size >= 1, "cell_size must be >= 1")
        _require(self.arrow_stride >= 1, "arrow_stride must be >= 1")


@dataclass
class SweepConfig(_Params):
    """Scene grid of the toy protocol: every (|S|, |A|, seed) at every observed fraction."""

    n_sources: tuple[int, ...] = (2, 3, 5, 8)
    n_agents: tuple[int, ...] = (10, 20, 50, 100)
    seeds: tuple[int, ...] = (0, 1, 2)
    observed_fractions: tuple[float, ...] = (0.5, 0.45, 0.4)
    method: str = "offline"

    def __post_init__(self) -> None:
        self.n_sources = tuple(int(v) for v in self.n_sources)
        self.n_agents = tuple(int(v) for v in self.n_agents)
        self.seeds = tuple(int(v) for v in self.seeds)
        self.observed_fractions = tuple(float(v) for v in self.observed_fractions)
        _require(all(v >= 1 for v in self.n_sources), "n_sources entries must be >= 1")
        _require(all(v >= 1 for v in self.n_agents), "n_agents entries must be >= 1")
        _require(all(0 < v <= 1 for v in self.observed_fractions), "observed fractions must lie in (0, 1]")

    def grid(self) -> list[tuple[int, int, int, float]]:
        return [
            (s, a, seed, frac)
            for frac in self.observed_fractions
            for s in self.n_sources
            for a in self.n_agents
            for seed in self.seeds
        ]


@dataclass
class RunConfig:
    """Every parameter group of a pipeline run."""

    fields: FieldParams = field(default_factory=FieldParams)
    model: ModelParams = field(default_factory=ModelParams)
    chain: ChainConfig = field(default_factory=ChainConfig)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    greedy: GreedyParams = field(default_factory=GreedyParams)
    synth: SynthConfig = field(default_factory=SynthConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    @classmethod
    def from_dict(cls, data: dict | None) -> RunConfig:
        data = data or {}
        return cls(
            fields=FieldParams.from_dict(data.get("fields")),
            model=ModelParams.from_dict(data.get("model")),
            chain=ChainConfig.from_dict(data.get("chain")),
            predictor=PredictorConfig.from_dict(data.get("predictor")),
            greedy=GreedyParams.from_dict(data.get("greedy")),
            synth=SynthConfig.from_dict(data.get("synth")),
            cluster=ClusterConfig.from_dict(data.get("cluster")),
            render=RenderConfig.from_dict(data.get("render")),
            sweep=SweepConfig.from_dict(data.get("sweep")),
        )

    def to_dict(self) -> dict:
        return {
            "fields": self.fields.to_dict(),
            "model": self.model.to_dict(),
            "chain": self.chain.to_dict(),
            "predictor": self.predictor.to_dict(),
            "greedy": self.greedy.to_dict(),
            "synth": self.synth.to_dict(),
            "cluster": self.cluster.to_dict(),
            "render": self.render.to_dict(),
            "sweep": self.sweep.to_dict(),
        }


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; values in ``override`` win."""
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


def load_json(path: str) -> dict:
    try:
        with open(path) as f:
            data = json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def load_preset(name: str) -> dict:
    """Load a preset shipped in ``intentforge/presets`` by stem name."""
    path = os.path.normpath(os.path.join(_PRESET_DIR, f"{name}.json"))
    if not os.path.isfile(path):
        raise ConfigError(f"Unknown preset: {name!r}")
    return load_json(path)


def list_presets() -> list[str]:
    preset_dir = os.path.normpath(_PRESET_DIR)
    if not os.path.isdir(preset_dir):
        return []
    return sorted(f[:-5] for f in os.listdir(preset_dir) if f.endswith(".json"))


def resolve_config(
    config_path: str | None = None, overrides: dict | None = None, preset: str | None = None,
) -> dict:
    """Defaults preset < named preset < config file < CLI overrides, as one raw dict."""
    data = load_preset("defaults")
    if preset and preset != "defaults":
        data = merge(data, load_preset(preset))
    if config_path:
        data = merge(data, load_json(config_path))
    if overrides:
        data = merge(data, overrides)
    return data
