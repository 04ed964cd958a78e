import hashlib
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from qosalloc.agent import (
    AgentConfig,
    Learner,
    StateNormalizer,
    build_state,
    epsilon_at,
    make_bdq_learner,
    select_action,
    select_checkpoint,
    train_loop,
)
from qosalloc.bdq import TabularQ
from qosalloc.qospred import NormStats
from qosalloc.rewards import RewardConfig
from qosalloc.simenv import BEWorkloadSpec, CounterVector, HPWorkloadSpec, NodeConfig, SimEnv

# Deterministic 3-state / 2-action MDP: T[s][a] = (next_state, reward)
TOY_MDP = {
    0: {0: (1, 0.0), 1: (2, 0.2)},
    1: {0: (0, 1.0), 1: (2, 0.0)},
    2: {0: (0, 0.5), 1: (1, 0.1)},
}


def value_iteration(mdp, gamma, sweeps=500):
    n_s = len(mdp)
    q = np.zeros((n_s, 2))
    for _ in range(sweeps):
        new = np.zeros_like(q)
        for s in mdp:
            for a, (nxt, r) in mdp[s].items():
                new[s, a] = r + gamma * q[nxt].max()
        q = new
    return q


# -- epsilon schedule ---------------------------------------------------------


def test_epsilon_boundaries():
    cfg = AgentConfig(max_steps=1000)
    assert epsilon_at(0, cfg) == pytest.approx(1.0)
    assert epsilon_at(999, cfg) == pytest.approx(0.02)
    assert epsilon_at(5000, cfg) == pytest.approx(0.02)


# -- action selection -----------------------------------------------------------


def test_greedy_unique_maxima():
    qvals = [np.array([0.1, 0.9, 0.3]), np.array([5.0, -1.0])]
    a = select_action(qvals, 0.0, np.random.default_rng(0))
    assert list(a) == [1, 0]


def test_tie_breaks_to_lowest_index():
    qvals = [np.array([0.0, 0.1, 0.05, 0.1, 0.02, 0.1])]
    a = select_action(qvals, 0.0, np.random.default_rng(1))
    assert a[0] == 1


def test_uniform_exploration_chi_square():
    rng = np.random.default_rng(2)
    qvals = [np.zeros(4), np.zeros(6)]
    counts = [np.zeros(4), np.zeros(6)]
    n = 100000
    for _ in range(n):
        a = select_action(qvals, 1.0, rng)
        counts[0][a[0]] += 1
        counts[1][a[1]] += 1
    for c in counts:
        expected = n / len(c)
        chi2 = ((c - expected) ** 2 / expected).sum()
        assert chi2 < stats.chi2.ppf(0.99, df=len(c) - 1)


def test_argmax_invariant_under_positive_scaling():
    rng = np.random.default_rng(3)
    for _ in range(50):
        q = rng.normal(size=7)
        a1 = select_action([q], 0.0, rng)
        a2 = select_action([q * 3.7], 0.0, rng)
        assert a1[0] == a2[0]


# -- state building ---------------------------------------------------------------


def make_norm():
    stats_ = NormStats(mean=np.arange(1.0, 7.0), std=np.full(6, 2.0))
    return StateNormalizer(counter_stats=stats_, pred_mean=1.5, pred_std=0.5)


def test_counters_at_mean_give_zero_block():
    norm = make_norm()
    counters = CounterVector.from_array(10.0 ** np.arange(1.0, 7.0) - 1.0)  # log10(1+x) == mean
    state = build_state([counters], [0.0], norm, use_pred=True)
    assert state[:6] == pytest.approx(np.zeros(6), abs=1e-12)
    assert len(state) == 7


def test_zero_prediction_transform():
    norm = make_norm()
    # log10(1+0) = 0 feeds the standardizer: (0 - 1.5) / 0.5
    assert norm.transform_pred(0.0) == pytest.approx(-3.0)


def test_reactive_state_width():
    norm = make_norm()
    counters = CounterVector.from_array(np.ones(6))
    assert len(build_state([counters], [0.0], norm, use_pred=False)) == 6


def test_nonfinite_counters_rejected():
    norm = make_norm()
    with pytest.raises(ValueError):
        build_state([np.array([np.nan, 1, 1, 1, 1, 1])], [0.0], norm)


# -- learner on the toy MDP --------------------------------------------------------


def test_tabular_learner_matches_value_iteration():
    gamma = 0.9
    cfg = AgentConfig(
        gamma=gamma,
        batch=16,
        buffer_capacity=512,
        target_sync_every=50,
        max_steps=5000,
        eps_start=1.0,
        eps_end=0.05,
    )
    rng = np.random.default_rng(42)
    learner = Learner(TabularQ(n_states=3, branch_sizes=(2,), lr=0.2), cfg, rng)
    s = 0
    for step in range(cfg.max_steps):
        a = learner.select(np.array([s]), epsilon_at(step, cfg))
        nxt, r = TOY_MDP[s][int(a[0])]
        learner.observe(np.array([s]), a, r, np.array([nxt]), False)
        s = nxt
    q_star = value_iteration(TOY_MDP, gamma)
    learned = learner.q.tables[0]
    assert np.array_equal(np.argmax(learned, axis=1), np.argmax(q_star, axis=1))


# -- train loop ---------------------------------------------------------------------


def tiny_env(seed=0):
    node = NodeConfig(substeps_per_interval=10)
    hp = HPWorkloadSpec()
    return SimEnv(node, [hp], [BEWorkloadSpec(name="mix", mbw_aggressiveness=0.8)], seed=seed)


def fitted_norm():
    rng = np.random.default_rng(9)
    counter_rows = rng.lognormal(10, 2, size=(200, 6))
    labels = rng.lognormal(4, 2, size=200)
    return StateNormalizer.fit(counter_rows, labels)


def test_zero_step_budget_initial_checkpoint_only(tmp_path):
    cfg = AgentConfig(max_steps=0, batch=4, buffer_capacity=64)
    result = train_loop(tiny_env(), None, cfg, RewardConfig(), fitted_norm(), tmp_path, seed=1)
    assert result.checkpoint_steps == [0]
    assert (tmp_path / "ckpt_0.json").exists()
    assert result.log_rows == []


def test_training_log_deterministic(tmp_path):
    cfg = AgentConfig(max_steps=60, batch=8, buffer_capacity=256, target_sync_every=20, checkpoint_every=30)
    digests = []
    for run in range(2):
        out = tmp_path / f"run{run}"
        result = train_loop(tiny_env(seed=5), None, cfg, RewardConfig(), fitted_norm(), out, seed=7)
        digests.append(hashlib.sha256(result.log_path.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_epsilon_logged_boundaries(tmp_path):
    cfg = AgentConfig(max_steps=50, batch=8, buffer_capacity=128, checkpoint_every=25)
    result = train_loop(tiny_env(seed=6), None, cfg, RewardConfig(), fitted_norm(), tmp_path, seed=3)
    assert float(result.log_rows[0][1]) == pytest.approx(1.0)
    assert float(result.log_rows[-1][1]) == pytest.approx(0.02)
    assert result.checkpoint_steps == [0, 25, 50]


def test_train_loop_writes_log_schema(tmp_path):
    cfg = AgentConfig(max_steps=12, batch=4, buffer_capacity=64, checkpoint_every=6)
    result = train_loop(tiny_env(seed=8), None, cfg, RewardConfig(), fitted_norm(), tmp_path, seed=4)
    header = result.log_path.read_text().splitlines()[0]
    assert header == "step,epsilon,reward,violation,pred_dpps,meas_dpps,loss,action_llc,action_mbw,action_hpcf,action_becf,action_ucf"
    assert len(result.log_rows) == 12


# -- checkpoint selection --------------------------------------------------------------


def rows_with_violations(flags):
    return [[step, "1.0", "0.0", flag, "0", "0", "nan", 0, 0, 0, 0, 0] for step, flag in enumerate(flags)]


def test_monotone_improvement_selects_last():
    flags = [1] * 50 + [0] * 50
    assert select_checkpoint(rows_with_violations(flags), window=25, checkpoint_steps=[0, 25, 50, 75, 100]) == 100


def test_dip_selected():
    # violations everywhere except a clean stretch before checkpoint 60
    flags = [1] * 40 + [0] * 20 + [1] * 40
    picked = select_checkpoint(rows_with_violations(flags), window=20, checkpoint_steps=[20, 40, 60, 80, 100])
    assert picked == 60


def test_tie_goes_to_later_checkpoint():
    flags = [0] * 100
    assert select_checkpoint(rows_with_violations(flags), window=20, checkpoint_steps=[40, 80]) == 80


def test_empty_log_single_checkpoint():
    assert select_checkpoint([], window=10, checkpoint_steps=[0]) == 0
    with pytest.raises(ValueError):
        select_checkpoint([], window=10, checkpoint_steps=[0, 10])
    with pytest.raises(ValueError):
        select_checkpoint(rows_with_violations([0]), window=5, checkpoint_steps=[])
