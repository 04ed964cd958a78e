"""Comparison controllers.

The measurement-only agent reuses the exact learning stack with the predicted
QoS removed from state and reward. The online-search controller fits a
Gaussian-process surrogate over the discrete action grid, samples by expected
improvement, applies the incumbent best between searches, and re-samples on
the violation-count or demand-drop triggers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtr

from .actions import Action
from .rewards import RewardConfig, compute_reward
from .runner import run_episode
from .simenv import NodeConfig, SimEnv


def twig_reward(meas_dpps: float, target_dpps: float, be_perf_norm: float, power_norm: float, cfg: RewardConfig) -> float:
    """Measurement-only reward: the prediction term is identically zero."""
    return compute_reward(0.0, meas_dpps, target_dpps, be_perf_norm, power_norm, cfg)


# -- Gaussian-process surrogate ------------------------------------------------


class GaussianProcess:
    """Squared-exponential GP over normalized action-index vectors."""

    def __init__(self, length_scale=0.25, signal_var: float = 1.0, noise_var: float = 1e-2, jitter: float = 1e-6):
        self.length_scale = length_scale
        self.signal_var = signal_var
        self.noise_var = noise_var
        self.jitter = jitter
        self._X = None
        self._mean = 0.0
        self._chol = None
        self._alpha = None

    def _k(self, A, B):
        ls = np.broadcast_to(np.asarray(self.length_scale, dtype=float), (A.shape[1],))
        d2 = ((A[:, None, :] - B[None, :, :]) / ls) ** 2
        return self.signal_var * np.exp(-0.5 * d2.sum(axis=2))

    def fit(self, X, y) -> "GaussianProcess":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        if len(X) < 2:
            raise ValueError("GP fit needs at least two observations")
        self._X = X
        self._mean = float(y.mean())
        K = self._k(X, X) + (self.noise_var + self.jitter) * np.eye(len(X))
        self._chol = cho_factor(K, lower=True)
        self._alpha = cho_solve(self._chol, y - self._mean)
        return self

    def predict(self, Xs):
        """Posterior mean and variance of the latent objective."""
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        Ks = self._k(Xs, self._X)
        mu = self._mean + Ks @ self._alpha
        v = cho_solve(self._chol, Ks.T)
        var = np.maximum(self.signal_var - np.einsum("ij,ji->i", Ks, v), 0.0)
        return mu, var


def expected_improvement(mu, var, best: float, xi: float = 0.01) -> np.ndarray:
    """EI for maximization; zero wherever the posterior is certain."""
    sigma = np.sqrt(np.asarray(var, dtype=float))
    imp = np.asarray(mu, dtype=float) - best - xi
    ei = np.zeros_like(sigma)
    pos = sigma > 0
    z = imp[pos] / sigma[pos]
    pdf = np.exp(-0.5 * z**2) / np.sqrt(2.0 * np.pi)
    ei[pos] = imp[pos] * ndtr(z) + sigma[pos] * pdf
    return ei


def action_grid(node: NodeConfig):
    """All actions in lexicographic order plus their [0,1]-normalized coordinates."""
    sizes = node.branch_sizes
    grid = np.stack(np.meshgrid(*[np.arange(s) for s in sizes], indexing="ij"), axis=-1).reshape(-1, len(sizes))
    denom = np.maximum(np.array(sizes, dtype=float) - 1.0, 1.0)
    return grid, grid / denom


def ei_acquire(gp: GaussianProcess, candidates_norm: np.ndarray, best: float, xi: float = 0.01) -> int:
    """Index of the EI-maximizing candidate; ties resolve to the first (lowest lexicographic)."""
    mu, var = gp.predict(candidates_norm)
    return int(np.argmax(expected_improvement(mu, var, best, xi)))


# -- online-search controller -----------------------------------------------------


@dataclass
class BOSearchConfig:
    samples_per_search: int = 40
    init_random: int = 10
    length_scale: float = 0.25
    signal_var: float = 1.0
    noise_var: float = 1e-2
    jitter: float = 1e-6
    ei_xi: float = 0.01
    violation_trigger_count: int = 3  # re-sample when exceeded ...
    violation_window: int = 10  # ... within this many steady intervals
    demand_drop_frac: float = 0.05
    objective_cap: float = 10.0  # tardiness penalty saturates here

    def __post_init__(self):
        if self.samples_per_search < self.init_random:
            raise ValueError("samples_per_search must cover the initial random design")


def bo_objective(meas_dpps: float, target_dpps: float, be_perf_norm: float, power_norm: float, reward_cfg: RewardConfig, cfg: BOSearchConfig) -> float:
    """Positive-branch reward when QoS holds, capped tardiness penalty otherwise."""
    if meas_dpps > target_dpps:
        return -min(meas_dpps / target_dpps, cfg.objective_cap)
    return reward_cfg.alpha * be_perf_norm + (1.0 - reward_cfg.alpha) * (1.0 - power_norm)


def clite_should_resample(history, demand_ref: float, cfg: BOSearchConfig) -> bool:
    """True when violations pile up or demand sagged since the last search.

    `history` holds (violation_flag, demand_pps) per steady interval, oldest
    first; `demand_ref` is the demand at the end of the previous search.
    """
    if not history:
        return False
    recent = history[-cfg.violation_window :]
    if sum(1 for v, _ in recent if v) > cfg.violation_trigger_count:
        return True
    current = history[-1][1]
    return demand_ref > 0 and current < demand_ref * (1.0 - cfg.demand_drop_frac)


class BOSearchPolicy:
    """Alternates EI-driven sampling episodes with steady incumbent application."""

    def __init__(self, node: NodeConfig, cfg: BOSearchConfig, reward_cfg: RewardConfig, target_dpps: float, rng: np.random.Generator):
        self.node = node
        self.cfg = cfg
        self.reward_cfg = reward_cfg
        self.target = target_dpps
        self.rng = rng
        self.grid, self.grid_norm = action_grid(node)
        self.sampling = True
        self.obs_idx: list = []
        self.obs_y: list = []
        self.incumbent: Action | None = None
        self.history: list = []
        self.demand_ref = 0.0
        self.searches_started = 1
        self._pending_idx: int | None = None

    def _pick_sample(self) -> int:
        if len(self.obs_idx) < self.cfg.init_random:
            return int(self.rng.integers(0, len(self.grid)))
        gp = GaussianProcess(self.cfg.length_scale, self.cfg.signal_var, self.cfg.noise_var, self.cfg.jitter)
        gp.fit(self.grid_norm[self.obs_idx], np.asarray(self.obs_y))
        return ei_acquire(gp, self.grid_norm, best=float(np.max(self.obs_y)), xi=self.cfg.ei_xi)

    def act(self, t, prev_outcome):
        if self.sampling:
            self._pending_idx = self._pick_sample()
            action = Action.from_indices(self.grid[self._pending_idx])
            return action, {"pred_dpps": 0.0, "sampling_phase": 1}
        return self.incumbent, {"pred_dpps": 0.0, "sampling_phase": 0}

    def observe(self, t, outcome):
        meas = float(np.max(outcome.measured_qos))
        demand = float(outcome.hp_demand[0])
        if self.sampling:
            self.obs_idx.append(self._pending_idx)
            self.obs_y.append(bo_objective(meas, self.target, outcome.be_ips_norm, outcome.power_norm, self.reward_cfg, self.cfg))
            if len(self.obs_idx) >= self.cfg.samples_per_search:
                best = int(np.argmax(self.obs_y))
                self.incumbent = Action.from_indices(self.grid[self.obs_idx[best]])
                self.demand_ref = demand
                self.sampling = False
                self.history = []
        else:
            self.history.append((meas > self.target, demand))
            if clite_should_resample(self.history, self.demand_ref, self.cfg):
                self.sampling = True
                self.obs_idx, self.obs_y = [], []
                self.searches_started += 1


def clite_run(env: SimEnv, cfg: BOSearchConfig, reward_cfg: RewardConfig, horizon: int, seed: int, log_path=None):
    """Run the online-search baseline for `horizon` control intervals."""
    if horizon < 1:
        raise ValueError("horizon must cover at least one interval")
    if len(env.hp_specs) != 1:
        raise ValueError("the online-search baseline drives a single HP workload")
    policy = BOSearchPolicy(
        env.node,
        cfg,
        reward_cfg,
        target_dpps=env.hp_specs[0].qos_target_dpps,
        rng=np.random.default_rng(seed),
    )
    rows = run_episode(env, policy, horizon, log_path=log_path)
    return rows, policy
