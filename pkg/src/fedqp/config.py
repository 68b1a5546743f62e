"""Experiment configuration: strict JSON schema with documented defaults.

Unknown keys are rejected (silent default drift is the main reproducibility
hazard), every value is validated against its type's invariants, and the
fully resolved config has a canonical hash that is embedded in all outputs.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

from .data import DIRICHLET, PartitionSpec, SyntheticSpec
from .engine import EngineConfig
from .models import ARCHITECTURES, MLP, ModelSpec, TrainConfig
from .mutation import MutationConfig


class ConfigError(ValueError):
    """A config key failed to parse or violated a constraint."""


DEFAULTS: dict = {
    "engine": {
        "num_rounds": 100,
        "num_devices": 100,
        "clients_per_round": 10,
        "strategy": "fedqp",
        "seed": 0,
        "aggregation_weighting": "uniform",
        "mutation_base": "global",
        "mutation": {
            "alpha": 1.0,
            "qp_probability": 0.5,
            "distribution": "signed_gradient",
            "degenerate_eps": 1e-12,
        },
        "train": {
            "learning_rate": 0.01,
            "momentum": 0.5,
            "batch_size": 50,
            "local_epochs": 5,
        },
    },
    "model": {
        "architecture": "mlp",
        "hidden_dim": 32,
    },
    "data": {
        "synthetic": {
            "num_classes": 10,
            "input_dim": 32,
            "samples_per_class": 500,
            "class_separation": 6.0,
            "noise_std": 1.0,
        },
        "partition": {
            "mode": "dirichlet",
            "beta": 0.1,
            "num_clients": None,  # defaults to engine.num_devices
        },
        "test_fraction": 0.1,
    },
    "seeds": [0],
    "output_dir": "runs",
}


@dataclass(frozen=True)
class RunConfig:
    engine: EngineConfig
    model: ModelSpec
    synthetic: SyntheticSpec
    partition: PartitionSpec
    test_fraction: float
    seeds: tuple[int, ...]
    output_dir: str
    resolved_json: str  # canonical form of the fully resolved dict

    def resolved_dict(self) -> dict:
        return json.loads(self.resolved_json)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.resolved_json.encode("utf-8")).hexdigest()


def _merge(defaults: dict, user, path: str) -> dict:
    if not isinstance(user, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(user).__name__}")
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        dotted = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown key '{dotted}'")
        if isinstance(defaults[key], dict):
            merged[key] = _merge(defaults[key], value, dotted)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _require_int(raw, dotted: str) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ConfigError(f"{dotted}: expected an integer, got {raw!r}")
    return raw


def _require_number(raw, dotted: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{dotted}: expected a number, got {raw!r}")
    return float(raw)


def canonical_json(resolved: dict) -> str:
    return json.dumps(resolved, sort_keys=True, separators=(",", ":"))


def config_hash(resolved: dict) -> str:
    return hashlib.sha256(canonical_json(resolved).encode("utf-8")).hexdigest()


def resolve(raw: dict) -> RunConfig:
    """Merge over defaults, validate every invariant, build typed configs."""
    merged = _merge(DEFAULTS, raw, "")

    e = merged["engine"]
    try:
        mutation = MutationConfig(
            alpha=_require_number(e["mutation"]["alpha"], "engine.mutation.alpha"),
            qp_probability=_require_number(
                e["mutation"]["qp_probability"], "engine.mutation.qp_probability"
            ),
            distribution=e["mutation"]["distribution"],
            degenerate_eps=_require_number(
                e["mutation"]["degenerate_eps"], "engine.mutation.degenerate_eps"
            ),
        )
    except ValueError as err:
        raise ConfigError(f"engine.mutation: {err}") from None
    try:
        train = TrainConfig(
            learning_rate=_require_number(e["train"]["learning_rate"], "engine.train.learning_rate"),
            momentum=_require_number(e["train"]["momentum"], "engine.train.momentum"),
            batch_size=_require_int(e["train"]["batch_size"], "engine.train.batch_size"),
            local_epochs=_require_int(e["train"]["local_epochs"], "engine.train.local_epochs"),
        )
    except ValueError as err:
        raise ConfigError(f"engine.train: {err}") from None
    try:
        engine = EngineConfig(
            num_rounds=_require_int(e["num_rounds"], "engine.num_rounds"),
            num_devices=_require_int(e["num_devices"], "engine.num_devices"),
            clients_per_round=_require_int(e["clients_per_round"], "engine.clients_per_round"),
            strategy=e["strategy"],
            mutation=mutation,
            train=train,
            seed=_require_int(e["seed"], "engine.seed"),
            aggregation_weighting=e["aggregation_weighting"],
            mutation_base=e["mutation_base"],
        )
    except ValueError as err:
        raise ConfigError(f"engine: {err}") from None

    d = merged["data"]
    try:
        synthetic = SyntheticSpec(
            num_classes=_require_int(d["synthetic"]["num_classes"], "data.synthetic.num_classes"),
            input_dim=_require_int(d["synthetic"]["input_dim"], "data.synthetic.input_dim"),
            samples_per_class=_require_int(
                d["synthetic"]["samples_per_class"], "data.synthetic.samples_per_class"
            ),
            class_separation=_require_number(
                d["synthetic"]["class_separation"], "data.synthetic.class_separation"
            ),
            noise_std=_require_number(d["synthetic"]["noise_std"], "data.synthetic.noise_std"),
        )
    except ValueError as err:
        raise ConfigError(f"data.synthetic: {err}") from None

    part_clients = d["partition"]["num_clients"]
    if part_clients is None:
        part_clients = engine.num_devices
    else:
        part_clients = _require_int(part_clients, "data.partition.num_clients")
        if part_clients != engine.num_devices:
            raise ConfigError(
                "data.partition.num_clients: must equal engine.num_devices "
                f"({part_clients} vs {engine.num_devices})"
            )
    try:
        part = PartitionSpec(
            num_clients=part_clients,
            mode=d["partition"]["mode"],
            beta=_require_number(d["partition"]["beta"], "data.partition.beta"),
        )
    except ValueError as err:
        raise ConfigError(f"data.partition: {err}") from None

    test_fraction = _require_number(d["test_fraction"], "data.test_fraction")
    if not 0 < test_fraction < 1:
        raise ConfigError("data.test_fraction: must be in (0, 1)")

    m = merged["model"]
    if m["architecture"] not in ARCHITECTURES:
        raise ConfigError(f"model.architecture: must be one of {ARCHITECTURES}")
    try:
        model = ModelSpec(
            architecture=m["architecture"],
            input_dim=synthetic.input_dim,
            num_classes=synthetic.num_classes,
            hidden_dim=_require_int(m["hidden_dim"], "model.hidden_dim")
            if m["architecture"] == MLP
            else 0,
        )
    except ValueError as err:
        raise ConfigError(f"model: {err}") from None

    seeds = merged["seeds"]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds: must be a nonempty list of integers")
    seeds = tuple(_require_int(s, "seeds") for s in seeds)

    output_dir = merged["output_dir"]
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir: must be a nonempty string")

    merged["data"]["partition"]["num_clients"] = part_clients
    return RunConfig(
        engine=engine,
        model=model,
        synthetic=synthetic,
        partition=part,
        test_fraction=test_fraction,
        seeds=seeds,
        output_dir=output_dir,
        resolved_json=canonical_json(merged),
    )


def load_config(path) -> RunConfig:
    """Parse and fully validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config parse error in {path}: {err}") from None
    return resolve(raw)


def parse_override(text: str) -> tuple[list[str], object]:
    """Parse a --set KEY=VALUE override into (key path, typed value)."""
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise ConfigError(f"override '{text}' is not of the form key=value")
    try:
        typed = json.loads(value)
    except json.JSONDecodeError:
        typed = value  # bare strings are allowed unquoted
    return key.split("."), typed


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply --set overrides on top of the raw config dict (flag > file)."""
    out = copy.deepcopy(raw)
    for text in overrides:
        path, value = parse_override(text)
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override '{text}': '{part}' is not an object")
        node[path[-1]] = value
    return out


SWEEP_AXES = ("qp_probability", "beta", "clients_per_round", "strategy")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}")
        if not self.values:
            raise ConfigError("sweep values must be nonempty")


def parse_sweep_values(axis: str, texts: list[str]) -> tuple:
    """Convert CLI value strings to the axis's type."""
    if axis in ("qp_probability", "beta"):
        return tuple(float(t) for t in texts)
    if axis == "clients_per_round":
        return tuple(int(t) for t in texts)
    return tuple(texts)


def set_axis_value(raw: dict, axis: str, value) -> dict:
    """Return a copy of the raw config with one sweep-axis value applied."""
    out = copy.deepcopy(raw)
    if axis == "qp_probability":
        out.setdefault("engine", {}).setdefault("mutation", {})["qp_probability"] = value
    elif axis == "beta":
        out.setdefault("data", {}).setdefault("partition", {})["beta"] = value
        out["data"]["partition"].setdefault("mode", DIRICHLET)
    elif axis == "clients_per_round":
        out.setdefault("engine", {})["clients_per_round"] = value
    elif axis == "strategy":
        out.setdefault("engine", {})["strategy"] = value
    else:
        raise ConfigError(f"unknown sweep axis '{axis}'")
    return out
