"""Learning controller: state building, exploration, replay-driven updates,
training loop orchestration, and checkpoint selection.

The same Learner drives both the prediction-guided agent and the
measurement-only baseline; they differ solely in state width (the predicted
QoS slot) and in the reward inputs. It also runs unchanged over the tabular
Q-function used for exact correctness checks.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .actions import Action, combine_hp_actions
from .bdq import BDQNetwork, NetworkQ, td_targets
from .qospred import NormStats, TwoLevelPredictor
from .replay import PrioritizedReplay, Transition
from .rewards import RewardConfig, compute_reward
from .simenv import SimEnv

TRAIN_LOG_COLUMNS = (
    "step",
    "epsilon",
    "reward",
    "violation",
    "pred_dpps",
    "meas_dpps",
    "loss",
    "action_llc",
    "action_mbw",
    "action_hpcf",
    "action_becf",
    "action_ucf",
)


@dataclass
class AgentConfig:
    gamma: float = 0.99
    hidden: int = 64
    lr: float = 0.002
    target_sync_every: int = 100
    batch: int = 256
    per_alpha: float = 0.6
    per_beta: float = 0.4
    per_eps: float = 1e-6
    buffer_capacity: int = 10000
    max_steps: int = 25000
    checkpoint_every: int = 500
    eps_start: float = 1.0
    eps_end: float = 0.02
    smoothing_window: int = 5
    warmup_batches: int = 2  # no gradient steps until buffer holds this many batches

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if self.batch > self.buffer_capacity:
            raise ValueError("batch cannot exceed buffer capacity")


def epsilon_at(step: int, cfg: AgentConfig) -> float:
    """Linear decay from eps_start at step 0 to eps_end at the final step."""
    if cfg.max_steps <= 1:
        return cfg.eps_start
    frac = min(step / (cfg.max_steps - 1), 1.0)
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac


def select_action(qvals: list, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Independent per-branch epsilon-greedy; argmax ties go to the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    out = np.empty(len(qvals), dtype=int)
    for b, q in enumerate(qvals):
        if rng.random() < epsilon:
            out[b] = rng.integers(0, len(q))
        else:
            out[b] = int(np.argmax(q))
    return out


@dataclass
class StateNormalizer:
    """Frozen transform for the controller state: counters plus predicted QoS.

    Counter statistics come from the predictor's training distribution; the
    prediction slot reuses the label distribution, per the same log10(1+x)
    then standardize scheme.
    """

    counter_stats: NormStats
    pred_mean: float
    pred_std: float

    @classmethod
    def fit(cls, counter_rows: np.ndarray, labels: np.ndarray) -> "StateNormalizer":
        z = np.log10(1.0 + np.asarray(labels, dtype=float))
        return cls(
            counter_stats=NormStats.fit(counter_rows),
            pred_mean=float(z.mean()),
            pred_std=float(max(z.std(), 1e-9)),
        )

    def transform_pred(self, pred_dpps: float) -> float:
        return (np.log10(1.0 + max(pred_dpps, 0.0)) - self.pred_mean) / self.pred_std

    def to_dict(self):
        return {"counter_stats": self.counter_stats.to_dict(), "pred_mean": self.pred_mean, "pred_std": self.pred_std}

    @classmethod
    def from_dict(cls, d):
        return cls(NormStats.from_dict(d["counter_stats"]), d["pred_mean"], d["pred_std"])


def build_state(counters_per_hp, preds_per_hp, norm: StateNormalizer, use_pred: bool = True) -> np.ndarray:
    """Concatenate one normalized block per HP: six counters (+ predicted QoS)."""
    blocks = []
    for i, ctr in enumerate(counters_per_hp):
        arr = ctr.as_array() if hasattr(ctr, "as_array") else np.asarray(ctr, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite counters in state")
        block = norm.counter_stats.transform(arr.reshape(1, -1))[0]
        if use_pred:
            block = np.append(block, norm.transform_pred(float(preds_per_hp[i])))
        blocks.append(block)
    return np.concatenate(blocks)


class Learner:
    """Replay-driven double-DQN updates over any Q-function with the shared protocol."""

    def __init__(self, qfunc, cfg: AgentConfig, rng: np.random.Generator):
        self.q = qfunc
        self.target = qfunc.copy_target()
        self.cfg = cfg
        self.rng = rng
        self.buffer = PrioritizedReplay(cfg.buffer_capacity, alpha=cfg.per_alpha, beta=cfg.per_beta, eps=cfg.per_eps)
        self.step_count = 0
        self.last_loss = float("nan")

    def select(self, state: np.ndarray, epsilon: float) -> np.ndarray:
        qvals = [q[0] for q in self.q.q_values(np.asarray(state).reshape(1, -1))]
        return select_action(qvals, epsilon, self.rng)

    def greedy(self, state: np.ndarray) -> np.ndarray:
        return self.select(state, 0.0)

    def observe(self, state, action, reward, next_state, done) -> None:
        """Store the transition, train past warmup, sync the target on schedule."""
        self.buffer.push(Transition(np.asarray(state), np.asarray(action), float(reward), np.asarray(next_state), bool(done)))
        self.step_count += 1
        if len(self.buffer) >= self.cfg.warmup_batches * self.cfg.batch:
            self.last_loss = self._train_batch()
        if self.step_count % self.cfg.target_sync_every == 0:
            self.q.sync_target(self.target)

    def _train_batch(self) -> float:
        batch, weights, idx = self.buffer.sample(self.cfg.batch, self.rng)
        states = np.stack([t.state for t in batch])
        actions = np.stack([t.action for t in batch])
        rewards = np.array([t.reward for t in batch])
        next_states = np.stack([t.next_state for t in batch])
        dones = np.array([t.done for t in batch], dtype=float)
        targets = td_targets(rewards, dones, next_states, self.q, self.target, self.cfg.gamma)
        loss, abs_err = self.q.train_on(states, actions, targets, weights)
        self.buffer.update(idx, abs_err)
        return loss


def make_bdq_learner(state_dim: int, branch_sizes, cfg: AgentConfig, rng: np.random.Generator) -> Learner:
    """Shared factory: both controllers get identical network/replay machinery."""
    net = BDQNetwork.create(state_dim, branch_sizes, cfg.hidden, rng)
    return Learner(NetworkQ(net, lr=cfg.lr), cfg, rng)


@dataclass
class TrainResult:
    checkpoint_dir: Path
    checkpoint_steps: list
    log_path: Path
    log_rows: list
    state_norm: StateNormalizer


def _write_log(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAIN_LOG_COLUMNS)
        w.writerows(rows)


def train_loop(
    env: SimEnv,
    predictor: TwoLevelPredictor | None,
    agent_cfg: AgentConfig,
    reward_cfg: RewardConfig,
    state_norm: StateNormalizer,
    out_dir,
    seed: int,
    be_schedule=None,
) -> TrainResult:
    """Train one controller against the simulator.

    `predictor is None` selects the measurement-only baseline: the predicted
    QoS slot leaves the state and the reward sees a zero prediction. The
    `be_schedule` is a list of (step, [BEWorkloadSpec]) swaps applied during
    training. Checkpoints land in out_dir/ckpt_<step>.json; the log is CSV.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    use_pred = predictor is not None
    n_hp = len(env.hp_specs)
    state_dim = (7 if use_pred else 6) * n_hp
    branch_sizes = tuple(env.node.branch_sizes) * n_hp
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    learner = make_bdq_learner(state_dim, branch_sizes, agent_cfg, rng)

    schedule = sorted(be_schedule or [], key=lambda kv: kv[0])
    targets = [spec.qos_target_dpps for spec in env.hp_specs]

    def predict_all(outcome):
        if not use_pred:
            return [0.0] * n_hp
        return [predictor.predict(c) for c in outcome.counters]

    outcome = env.reset(agent_cfg.max_steps + 2)
    preds = predict_all(outcome)
    state = build_state(outcome.counters, preds, state_norm, use_pred)

    checkpoint_steps = [0]
    _save_checkpoint(learner, out_dir, 0)
    rows = []
    for step in range(agent_cfg.max_steps):
        while schedule and schedule[0][0] <= step:
            env.switch_be(schedule.pop(0)[1])
        eps = epsilon_at(step, agent_cfg)
        flat = learner.select(state, eps)
        actions = [Action.from_indices(flat[5 * i : 5 * i + 5]) for i in range(n_hp)]
        alloc = combine_hp_actions(actions, env.node)
        outcome = env.step(alloc)
        preds = predict_all(outcome)
        per_hp = [
            compute_reward(preds[i], float(outcome.measured_qos[i]), targets[i], outcome.be_ips_norm, outcome.power_norm, reward_cfg)
            for i in range(n_hp)
        ]
        reward = float(np.mean(per_hp))
        next_state = build_state(outcome.counters, preds, state_norm, use_pred)
        done = step == agent_cfg.max_steps - 1
        learner.observe(state, flat, reward, next_state, done)
        state = next_state

        meas = float(np.max(outcome.measured_qos))
        pred_worst = float(np.max(preds))
        violation = int(any(outcome.measured_qos[i] > targets[i] for i in range(n_hp)))
        a0 = actions[0]
        rows.append(
            [
                step,
                f"{eps:.10g}",
                f"{reward:.10g}",
                violation,
                f"{pred_worst:.10g}",
                f"{meas:.10g}",
                f"{learner.last_loss:.10g}",
                a0.llc,
                a0.mbw,
                a0.hpcf,
                a0.becf,
                a0.ucf,
            ]
        )
        completed = step + 1
        if completed % agent_cfg.checkpoint_every == 0 or completed == agent_cfg.max_steps:
            if completed not in checkpoint_steps:
                checkpoint_steps.append(completed)
                _save_checkpoint(learner, out_dir, completed)

    log_path = out_dir / "train_log.csv"
    _write_log(log_path, rows)
    return TrainResult(
        checkpoint_dir=out_dir,
        checkpoint_steps=checkpoint_steps,
        log_path=log_path,
        log_rows=rows,
        state_norm=state_norm,
    )


def _save_checkpoint(learner: Learner, out_dir: Path, step: int) -> None:
    net = getattr(learner.q, "net", None)
    if net is not None:
        net.save(Path(out_dir) / f"ckpt_{step}.json")


def select_checkpoint(log_rows, window: int, checkpoint_steps) -> int:
    """Checkpoint with the lowest trailing-window violation rate; ties go later.

    `log_rows` uses the training log column layout; a checkpoint at step k is
    scored over rows with step in [k - window, k). The initial checkpoint has
    no history and is only returned when it is the sole candidate.
    """
    if not checkpoint_steps:
        raise ValueError("no checkpoints to select from")
    if not log_rows and len(checkpoint_steps) == 1:
        return checkpoint_steps[0]
    if not log_rows:
        raise ValueError("empty training log")
    viol = {int(r[0]): int(r[3]) for r in log_rows}
    best_step, best_rate = None, np.inf
    for k in sorted(checkpoint_steps):
        span = [viol[s] for s in range(max(k - window, 0), k) if s in viol]
        rate = np.mean(span) if span else np.inf
        if rate <= best_rate:  # ties resolve to the later checkpoint
            best_step, best_rate = k, rate
    return best_step
