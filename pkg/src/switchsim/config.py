"""Experiment configuration: JSON file, schema check, sweep expansion."""
from __future__ import annotations

import copy
import hashlib
import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .core import ConfigurationError
from .metrics import epsilon_schedule
from .schedulers import POLICIES, validate_policy

METRICS = ("scaled_q", "ssc", "pi2_audit", "pi3_audit", "tau", "ratio")
SWEEP_AXES = ("epsilon", "load", "d", "m", "delta", "n", "scheduler")

_scheduler_schema = {
    "type": "object",
    "properties": {
        "name": {"enum": sorted(POLICIES)},
        "d": {"type": "integer", "minimum": 0},
        "m": {"type": "integer", "minimum": 1},
        "delta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    },
    "required": ["name"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "switchsim experiment",
    "type": "object",
    "properties": {
        "n": {"type": "integer", "minimum": 2},
        "traffic": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["uniform", "birkhoff_mixture", "diag_mixture", "preset"]},
                "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "load": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "family": {"enum": ["bernoulli", "scaled_bernoulli"]},
                "a_max": {"type": "integer", "minimum": 1},
                "diag": {"type": "number", "minimum": 0, "maximum": 1},
                "weights": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "coef": {"type": "number", "minimum": 0},
                            "perm": {"type": "array", "items": {"type": "integer"}},
                            "shift": {"type": "integer"},
                        },
                        "required": ["coef"],
                    },
                },
                "epsilon_rule": {
                    "type": "object",
                    "properties": {
                        "beta": {"type": "number"},
                        "eps_ref": {"type": "number"},
                        "n_ref": {"type": "integer"},
                    },
                    "required": ["beta", "eps_ref", "n_ref"],
                },
            },
            "additionalProperties": False,
        },
        "scheduler": _scheduler_schema,
        "horizon": {"type": ["integer", "null"], "minimum": 1},
        "horizon_scale": {"type": "number", "exclusiveMinimum": 0},
        "warmup_fraction": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "thinning": {"type": "integer", "minimum": 1},
        "ssc_every": {"type": "integer", "minimum": 1},
        "trace_every": {"type": "integer", "minimum": 1},
        "replications": {"type": "integer", "minimum": 1},
        "master_seed": {"type": "integer", "minimum": 0},
        "batches": {"type": "integer", "minimum": 2},
        "metrics": {"type": "array", "items": {"enum": list(METRICS)}, "uniqueItems": True},
        "sweep": {
            "type": "object",
            "properties": {
                "epsilon": {"type": "array", "items": {"type": "number"}},
                "load": {"type": "array", "items": {"type": "number"}},
                "d": {"type": "array", "items": {"type": "integer"}},
                "m": {"type": "array", "items": {"type": "integer"}},
                "delta": {"type": "array", "items": {"type": "number"}},
                "n": {"type": "array", "items": {"type": "integer"}},
                "scheduler": {"type": "array", "items": _scheduler_schema},
            },
            "additionalProperties": False,
        },
        "output": {"type": "string"},
    },
    "required": ["n", "traffic", "scheduler"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully-expanded experiment point (no sweep axis left)."""

    n: int
    traffic: dict
    scheduler: dict
    epsilon: float
    horizon: int | None = None
    horizon_scale: float = 400.0
    warmup_fraction: float = 0.2
    thinning: int = 1
    ssc_every: int = 10
    trace_every: int = 1
    replications: int = 1
    master_seed: int = 0
    batches: int = 30
    metrics: tuple = ("scaled_q",)
    output: str | None = None

    @property
    def scheduler_name(self) -> str:
        return self.scheduler["name"]

    @property
    def scheduler_params(self) -> dict:
        return {k: v for k, v in self.scheduler.items() if k != "name"}

    @property
    def load(self) -> float:
        return 1.0 - self.epsilon

    def resolved_horizon(self) -> int:
        if self.horizon is not None:
            return int(self.horizon)
        return int(-(-self.horizon_scale // self.epsilon**2))

    def canonical(self) -> dict:
        return {
            "n": self.n,
            "traffic": self.traffic,
            "scheduler": self.scheduler,
            "epsilon": self.epsilon,
            "horizon": self.resolved_horizon(),
            "warmup_fraction": self.warmup_fraction,
            "thinning": self.thinning,
            "ssc_every": self.ssc_every,
            "trace_every": self.trace_every,
            "replications": self.replications,
            "master_seed": self.master_seed,
            "batches": self.batches,
            "metrics": list(self.metrics),
        }

    @property
    def config_id(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def load_config(path) -> dict:
    try:
        with open(Path(path), encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return raw


def _epsilon_of(traffic: dict) -> float | None:
    if "epsilon" in traffic and "load" in traffic:
        raise ConfigurationError("give either traffic.epsilon or traffic.load, not both")
    if "epsilon" in traffic:
        return float(traffic["epsilon"])
    if "load" in traffic:
        return 1.0 - float(traffic["load"])
    return None


def expand(raw: dict) -> list[ExperimentConfig]:
    """Validate a raw config tree and expand its sweep into concrete points.

    Every point is checked (including scheduler/parameter combinations)
    before anything runs.
    """
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"invalid config at {path}: {exc.message}") from exc
    sweep = raw.get("sweep", {})
    if "epsilon" in sweep and "load" in sweep:
        raise ConfigurationError("sweep over epsilon or load, not both")
    axes = [a for a in SWEEP_AXES if a in sweep]
    for a in axes:
        if not sweep[a]:
            raise ConfigurationError(f"sweep axis {a!r} is empty")
    points = []
    for values in itertools.product(*(sweep[a] for a in axes)):
        cfg = copy.deepcopy(raw)
        cfg.pop("sweep", None)
        traffic = cfg["traffic"]
        for axis, value in zip(axes, values):
            if axis in ("epsilon", "load"):
                traffic.pop("epsilon", None)
                traffic.pop("load", None)
                traffic[axis] = value
            elif axis == "n":
                cfg["n"] = value
            elif axis == "scheduler":
                cfg["scheduler"] = copy.deepcopy(value)
        # parameter axes apply after the scheduler axis is fixed
        for axis, value in zip(axes, values):
            if axis in ("d", "m", "delta"):
                cfg["scheduler"][axis] = value
        rule = traffic.pop("epsilon_rule", None)
        eps = _epsilon_of(traffic)
        if rule is not None:
            if eps is not None:
                raise ConfigurationError("epsilon_rule cannot be combined with epsilon or load")
            eps = epsilon_schedule([cfg["n"]], rule["beta"], rule["eps_ref"], rule["n_ref"])[0]
            traffic["epsilon_rule"] = rule
        if eps is None:
            raise ConfigurationError("traffic needs epsilon, load, or epsilon_rule")
        if not 0.0 < eps < 1.0:
            raise ConfigurationError(f"epsilon must lie in (0, 1), got {eps}")
        traffic.pop("epsilon", None)
        traffic.pop("load", None)
        sched = dict(cfg["scheduler"])
        name = sched.pop("name")
        validate_policy(name, sched)
        metrics = tuple(cfg.get("metrics", ["scaled_q"]))
        if "pi2_audit" in metrics and name not in ("bursty_mw", "pipelined_mw", "maxweight"):
            raise ConfigurationError(f"pi2_audit needs bursty_mw, pipelined_mw or maxweight, not {name}")
        points.append(
            ExperimentConfig(
                n=int(cfg["n"]),
                traffic=traffic,
                scheduler=cfg["scheduler"],
                epsilon=float(eps),
                horizon=cfg.get("horizon"),
                horizon_scale=float(cfg.get("horizon_scale", 400.0)),
                warmup_fraction=float(cfg.get("warmup_fraction", 0.2)),
                thinning=int(cfg.get("thinning", 1)),
                ssc_every=int(cfg.get("ssc_every", 10)),
                trace_every=int(cfg.get("trace_every", 1)),
                replications=int(cfg.get("replications", 1)),
                master_seed=int(cfg.get("master_seed", 0)),
                batches=int(cfg.get("batches", 30)),
                metrics=metrics,
                output=cfg.get("output"),
            )
        )
    return points
