"""Shared evaluation-episode runner and the greedy learned-controller policy.

Every controller runs through the same loop and emits the same CSV schema, so
metric computation and cross-controller comparison stay uniform. Policies are
duck-typed: `act(t, prev_outcome) -> (action_or_actions, info)` and
`observe(t, outcome)`.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .actions import Action, combine_hp_actions, smooth_action
from .agent import StateNormalizer, build_state
from .bdq import BDQNetwork
from .simenv import SimEnv

EVAL_LOG_COLUMNS = (
    "t_s",
    "demand_pps",
    "target_dpps",
    "meas_dpps",
    "mean_dpps",
    "pred_dpps",
    "be_ips_norm",
    "power_norm",
    "llc",
    "mbw",
    "hpcf",
    "becf",
    "ucf",
    "sampling_phase",
)


class GreedyAgentPolicy:
    """Frozen-weights controller: per-branch argmax plus action smoothing."""

    def __init__(self, net: BDQNetwork, predictor, norm: StateNormalizer, smoothing_window: int = 1):
        self.net = net
        self.predictor = predictor
        self.norm = norm
        self.window = max(int(smoothing_window), 1)
        self._history: list = []

    def _predictions(self, outcome):
        if self.predictor is None:
            return [0.0] * len(outcome.counters)
        return [self.predictor.predict(c) for c in outcome.counters]

    def act(self, t, prev_outcome):
        preds = self._predictions(prev_outcome)
        state = build_state(prev_outcome.counters, preds, self.norm, use_pred=self.predictor is not None)
        qvals = self.net.q_values_single(state)
        n_hp = len(prev_outcome.counters)
        raw = [
            Action.from_indices([int(np.argmax(qvals[5 * i + b])) for b in range(5)])
            for i in range(n_hp)
        ]
        self._history.append(raw)
        self._history = self._history[-self.window :]
        smoothed = [
            smooth_action([h[i] for h in self._history], window=min(self.window, len(self._history)))
            for i in range(n_hp)
        ]
        return smoothed, {"pred_dpps": float(np.max(preds)), "sampling_phase": 0}

    def observe(self, t, outcome):
        pass


def run_episode(env: SimEnv, policy, n_intervals: int, log_path=None) -> list:
    """Drive one controller for n_intervals and return uniform log rows."""
    outcome = env.reset(n_intervals)
    node = env.node
    target = max(spec.qos_target_dpps for spec in env.hp_specs)
    rows = []
    for t in range(n_intervals):
        decided, info = policy.act(t, outcome)
        actions = decided if isinstance(decided, list) else [decided]
        alloc = combine_hp_actions(actions, node)
        outcome = env.step(alloc)
        policy.observe(t, outcome)
        a0 = actions[0]
        rows.append(
            [
                t * node.substeps_per_interval,
                f"{float(outcome.hp_demand[0]):.10g}",
                f"{target:.10g}",
                f"{float(np.max(outcome.measured_qos)):.10g}",
                f"{float(np.max(outcome.mean_qos)):.10g}",
                f"{float(info.get('pred_dpps', 0.0)):.10g}",
                f"{outcome.be_ips_norm:.10g}",
                f"{outcome.power_norm:.10g}",
                a0.llc,
                a0.mbw,
                a0.hpcf,
                a0.becf,
                a0.ucf,
                int(info.get("sampling_phase", 0)),
            ]
        )
    if log_path is not None:
        write_eval_log(log_path, rows)
    return rows


def write_eval_log(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVAL_LOG_COLUMNS)
        w.writerows(rows)


def read_eval_log(path) -> list:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if list(header) != list(EVAL_LOG_COLUMNS):
            raise ValueError(f"bad eval log header in {path}")
        return [row for row in r]
