"""Experiment configuration: one JSON document, explicit seeds, typed accessors.

The evaluation BE list must stay disjoint from the training BE list; the
hold-out protocol is validated at load time. Stage resumability keys off a
hash of the relevant config sections, so the document is kept canonical
(sorted keys) when hashed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .baselines import BOSearchConfig
from .agent import AgentConfig
from .qospred import PredictorConfig
from .rewards import RewardConfig
from .simenv import DiurnalParams, HPWorkloadSpec, NodeConfig
from .workloads import TRAINING_BE, be_catalog, eval_be_names


class ConfigError(Exception):
    """Invalid or missing experiment configuration."""


DEFAULT_CONFIG = {
    "seed": 7,
    "out_dir": "runs/default",
    "node": {
        # desk-scale control epoch: ten one-second substeps per interval
        "total_llc_ways": 8,
        "substeps_per_interval": 10,
        "control_interval_s": 3.0,
        "min_ways_clamp": False,
    },
    "hp": {
        "qos_target_dpps": 1000.0,
        "peak_demand_pps": 2.5e6,
        "cliff_mbw_knee": 0.6,
        "cliff_llc_knee": 2,
        "cliff_gain": 30.0,
        "transient_spike_prob": 0.02,
        "transient_spike_scale": 900.0,
        "spike_sigma": 0.8,
    },
    "trace": {
        "base_pps": 1.3e6,
        "amplitude_pps": 9.0e5,
        "period_s": 8000.0,
        "phase_rad": 0.0,
        "noise_std_pps": 3.0e4,
    },
    "featsel": {
        "k": 6,
        "samples_per_mix": 220,
        "window_s": 50.0,
        "min_rate": 1.0,
        "min_cv": 0.01,
        "shadow_rounds": 5,
        "shadow_cutoff": 1.0,
        "max_log10_shift": 2.0,
    },
    "predictor": {
        # deployed operating point: classifier threshold at the QoS target, so
        # the fine regressor covers the whole sub-target range
        "threshold_dpps": 1000.0,
        "samples_per_mix": 200,
        "window_s": 100.0,
        "include_allocation": False,
    },
    "agent": {
        "max_steps": 8000,
        "batch": 256,
        "buffer_capacity": 10000,
        "target_sync_every": 100,
        "checkpoint_every": 500,
        "lr": 0.002,
        # desk-scale discount: credit assignment here is near-immediate and
        # 5000-step runs need the shorter value horizon to settle
        "gamma": 0.9,
        "hidden": 64,
        "eps_start": 1.0,
        "eps_end": 0.02,
        "smoothing_window": 5,
        "be_switch_every": 1000,
        "checkpoint_window": 500,
    },
    "reward": {
        "alpha": 0.8,
        "beta": 3.0,
        "qos_target_dpps": 1000.0,
        "gate_on_max": True,
    },
    "bo": {
        "samples_per_search": 40,
        "init_random": 10,
    },
    "evaluation": {
        "episode_intervals": 2000,
        "seeds": [101, 202, 303, 404, 505],
        "be_training": list(TRAINING_BE),
        "be_eval": eval_be_names(),
        "include_bo_in_compare": True,
    },
}

_AGENT_EXTRA_KEYS = {"be_switch_every", "checkpoint_window"}


def _merge(base: dict, override: dict, path="") -> dict:
    out = dict(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, path + key + ".")
        else:
            out[key] = value
    return out


@dataclass
class ExperimentConfig:
    raw: dict

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        merged = _merge(DEFAULT_CONFIG, d)
        cfg = cls(raw=merged)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {path}: {e}") from e

    def validate(self) -> None:
        ev = self.raw["evaluation"]
        overlap = set(ev["be_training"]) & set(ev["be_eval"])
        if overlap:
            raise ConfigError(f"evaluation BE workloads must be unseen during training: {sorted(overlap)}")
        catalog = be_catalog()
        unknown = [n for n in (*ev["be_training"], *ev["be_eval"]) if n not in catalog]
        if unknown:
            raise ConfigError(f"unknown BE profiles: {unknown}")
        if not ev["seeds"]:
            raise ConfigError("evaluation.seeds must be explicit and non-empty")
        try:
            self.node_config()
            self.hp_spec()
            self.predictor_config()
            self.agent_config()
            self.reward_config()
            self.bo_config()
        except (ValueError, TypeError) as e:
            raise ConfigError(str(e)) from e

    # -- typed accessors ------------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def out_dir(self) -> Path:
        return Path(self.raw["out_dir"])

    def node_config(self) -> NodeConfig:
        return NodeConfig(**self.raw["node"])

    def trace_params(self) -> DiurnalParams:
        return DiurnalParams(**self.raw["trace"])

    def hp_spec(self) -> HPWorkloadSpec:
        return HPWorkloadSpec(demand_trace=self.trace_params(), **self.raw["hp"])

    def predictor_config(self) -> PredictorConfig:
        return PredictorConfig(**self.raw["predictor"])

    def agent_config(self) -> AgentConfig:
        kw = {k: v for k, v in self.raw["agent"].items() if k not in _AGENT_EXTRA_KEYS}
        return AgentConfig(**kw)

    def reward_config(self) -> RewardConfig:
        return RewardConfig(**self.raw["reward"])

    def bo_config(self) -> BOSearchConfig:
        return BOSearchConfig(**self.raw["bo"])

    def section_hash(self, *sections: str) -> str:
        payload = {s: self.raw[s] for s in sections}
        payload["seed"] = self.raw["seed"]
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.raw, indent=2, sort_keys=True))


def default_config() -> ExperimentConfig:
    return ExperimentConfig.from_dict({})
