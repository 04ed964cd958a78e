"""Prediction-gated reward: log-penalized violations, convex bonus otherwise."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class RewardConfig:
    alpha: float = 0.8  # weight of BE performance in the positive branch
    beta: float = 3.0  # violation penalty clip, in decades over target
    log_base: float = 10.0
    qos_target_dpps: float = 1000.0
    gate_on_max: bool = True  # gate the branch on max(pred, meas) vs pred only

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.beta <= 0:
            raise ValueError("beta must be positive")


def reward_negative(pred_dpps: float, meas_dpps: float, target_dpps: float, cfg: RewardConfig) -> float:
    """Violation penalty: -min(log(max(pred, meas)/target), beta), in [-beta, 0]."""
    if target_dpps <= 0:
        raise ValueError("target must be positive")
    worst = max(pred_dpps, meas_dpps)
    if worst < target_dpps:
        raise ValueError("negative branch called without a violation")
    severity = math.log(worst / target_dpps, cfg.log_base)
    return -min(severity, cfg.beta)


def reward_positive(be_perf_norm: float, power_saving_norm: float, alpha: float) -> float:
    """Convex combination of normalized BE throughput and power saving."""
    for v in (be_perf_norm, power_saving_norm):
        if not 0.0 <= v <= 1.0:
            raise ValueError("positive-branch inputs must be in [0, 1]")
    return alpha * be_perf_norm + (1.0 - alpha) * power_saving_norm


def compute_reward(
    pred_dpps: float,
    meas_dpps: float,
    target_dpps: float,
    be_perf_norm: float,
    power_norm: float,
    cfg: RewardConfig,
) -> float:
    """Gate on predicted or measured violation; otherwise reward BE + saving."""
    gate = max(pred_dpps, meas_dpps) if cfg.gate_on_max else pred_dpps
    if gate >= target_dpps:
        return reward_negative(pred_dpps, meas_dpps, target_dpps, cfg)
    return reward_positive(be_perf_norm, 1.0 - power_norm, cfg.alpha)
