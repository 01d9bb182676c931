"""Experiment configuration: JSON files with strict key checking.

Every run is reconstructible from artifacts alone: defaults are applied
at parse time and the effective configuration is echoed next to the
outputs, with a stable hash recorded in the summary.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError

PIPELINES = ("maddpg", "tom2c", "neurcomm")
ENVIRONMENTS = ("coopnav", "networked")

# Environment support mirrors the benchmark pairing: the CTDE pipelines
# run cooperative navigation, the networked pipeline the queueing grid.
PIPELINE_ENVIRONMENTS = {
    "maddpg": ("coopnav",),
    "tom2c": ("coopnav",),
    "neurcomm": ("networked",),
}

SWEEP_PARAMETERS = ("rollout_threads", "n_agents")
OUTPUT_FORMATS = ("csv", "json")


@dataclass
class Hyperparameters:
    lr: float = 1e-3
    gamma: float = 0.95
    tau: float = 0.01
    batch: int = 256
    buffer_capacity: int = 50000
    horizon: int = 32
    hidden: int = 64
    comm_threshold: float = 0.5
    entropy_coef: float = 0.01
    sparsity_coef: float = 1e-3
    epsilon: float = 0.1
    belief_dim: int = 32
    tom_dim: int = 16
    episode_limit: int = 25
    rollout_steps: int = 256
    inflow_rate: float = 0.25


@dataclass
class SweepSpec:
    parameter: str
    values: list


@dataclass
class OutputSpec:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json"])


@dataclass
class ExperimentConfig:
    pipeline: str
    environment: str
    n_agents: int
    rollout_threads: int = 1
    training_threads: int = 1
    iterations: int = 30
    warmup_iterations: int = 5
    seed: int = 0
    topology: str = "ring"
    hyperparameters: Hyperparameters = field(default_factory=Hyperparameters)
    sweep: SweepSpec | None = None
    output: OutputSpec = field(default_factory=OutputSpec)

    def effective_dict(self):
        d = asdict(self)
        if self.sweep is None:
            d.pop("sweep")
        return d

    def config_hash(self):
        d = self.effective_dict()
        d.pop("output")  # where results land does not identify the experiment
        blob = json.dumps(d, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _require(condition, message):
    if not condition:
        raise ConfigError(message)


def _check_keys(mapping, allowed, context):
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {context}")


def _typed(mapping, key, kinds, context):
    value = mapping[key]
    if kinds is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{context}.{key} must be a number, got {value!r}")
        return float(value)
    if kinds is int:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{context}.{key} must be an integer, got {value!r}")
        return value
    if not isinstance(value, kinds):
        raise ConfigError(f"{context}.{key} has the wrong type: {value!r}")
    return value


def config_from_dict(raw):
    _require(isinstance(raw, dict), "config root must be an object")
    top_allowed = {
        "pipeline",
        "environment",
        "n_agents",
        "rollout_threads",
        "training_threads",
        "iterations",
        "warmup_iterations",
        "seed",
        "topology",
        "hyperparameters",
        "sweep",
        "output",
    }
    _check_keys(raw, top_allowed, "config")
    for key in ("pipeline", "environment", "n_agents"):
        _require(key in raw, f"missing required key {key!r}")

    pipeline = raw["pipeline"]
    _require(pipeline in PIPELINES, f"pipeline must be one of {PIPELINES}, got {pipeline!r}")
    environment = raw["environment"]
    _require(
        environment in ENVIRONMENTS,
        f"environment must be one of {ENVIRONMENTS}, got {environment!r}",
    )
    _require(
        environment in PIPELINE_ENVIRONMENTS[pipeline],
        f"pipeline {pipeline!r} supports environments "
        f"{PIPELINE_ENVIRONMENTS[pipeline]}, got {environment!r}",
    )

    hp = Hyperparameters()
    if "hyperparameters" in raw:
        hp_raw = raw["hyperparameters"]
        _require(isinstance(hp_raw, dict), "hyperparameters must be an object")
        hp_fields = {f.name: f.type for f in fields(Hyperparameters)}
        _check_keys(hp_raw, hp_fields, "hyperparameters")
        for key in hp_raw:
            kind = int if hp_fields[key] in (int, "int") else float
            setattr(hp, key, _typed(hp_raw, key, kind, "hyperparameters"))
    _require(0.0 <= hp.gamma < 1.0, f"gamma must be in [0, 1), got {hp.gamma}")
    _require(0.0 <= hp.tau <= 1.0, f"tau must be in [0, 1], got {hp.tau}")
    _require(
        0.0 < hp.comm_threshold <= 1.0,
        f"comm_threshold must be in (0, 1], got {hp.comm_threshold}",
    )
    _require(hp.lr > 0.0, "lr must be positive")
    for key in ("batch", "buffer_capacity", "horizon", "hidden", "belief_dim",
                "tom_dim", "episode_limit", "rollout_steps"):
        _require(getattr(hp, key) >= 1, f"{key} must be at least 1")
    _require(0.0 <= hp.epsilon <= 1.0, "epsilon must be in [0, 1]")
    _require(hp.inflow_rate >= 0.0, "inflow_rate must be non-negative")

    sweep = None
    if "sweep" in raw and raw["sweep"] is not None:
        sw = raw["sweep"]
        _require(isinstance(sw, dict), "sweep must be an object")
        _check_keys(sw, {"parameter", "values"}, "sweep")
        _require("parameter" in sw and "values" in sw, "sweep needs parameter and values")
        _require(
            sw["parameter"] in SWEEP_PARAMETERS,
            f"sweep parameter must be one of {SWEEP_PARAMETERS}",
        )
        values = sw["values"]
        _require(
            isinstance(values, list)
            and len(values) >= 1
            and all(isinstance(v, int) and v >= 1 for v in values),
            "sweep values must be positive integers",
        )
        _require(
            values == sorted(set(values)),
            "sweep values must be strictly increasing",
        )
        sweep = SweepSpec(sw["parameter"], list(values))

    output = OutputSpec()
    if "output" in raw:
        out = raw["output"]
        _require(isinstance(out, dict), "output must be an object")
        _check_keys(out, {"directory", "formats"}, "output")
        if "directory" in out:
            output.directory = _typed(out, "directory", str, "output")
        if "formats" in out:
            formats = out["formats"]
            _require(
                isinstance(formats, list)
                and formats
                and all(f in OUTPUT_FORMATS for f in formats),
                f"output formats must be a non-empty subset of {OUTPUT_FORMATS}",
            )
            output.formats = list(formats)

    defaults = {"rollout_threads": 1, "training_threads": 1}
    cfg = ExperimentConfig(
        pipeline=pipeline,
        environment=environment,
        n_agents=_typed(raw, "n_agents", int, "config"),
        rollout_threads=_typed(raw, "rollout_threads", int, "config")
        if "rollout_threads" in raw
        else defaults["rollout_threads"],
        training_threads=_typed(raw, "training_threads", int, "config")
        if "training_threads" in raw
        else defaults["training_threads"],
        iterations=_typed(raw, "iterations", int, "config") if "iterations" in raw else 30,
        warmup_iterations=_typed(raw, "warmup_iterations", int, "config")
        if "warmup_iterations" in raw
        else 5,
        seed=_typed(raw, "seed", int, "config") if "seed" in raw else 0,
        topology=_typed(raw, "topology", str, "config") if "topology" in raw else "ring",
        hyperparameters=hp,
        sweep=sweep,
        output=output,
    )
    _require(cfg.n_agents >= 1, "n_agents must be at least 1")
    _require(cfg.rollout_threads >= 1, "rollout_threads must be at least 1")
    _require(cfg.training_threads >= 1, "training_threads must be at least 1")
    _require(cfg.iterations >= 1, "iterations must be at least 1")
    _require(
        0 <= cfg.warmup_iterations < cfg.iterations,
        "warmup_iterations must be smaller than iterations",
    )
    _require(cfg.topology in ("chain", "ring"), f"unknown topology {cfg.topology!r}")
    return cfg


def parse_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        )
    return config_from_dict(raw)
