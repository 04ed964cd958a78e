import numpy as np
import pytest

from qosalloc.simenv import (
    BEWorkloadSpec,
    DemandTrace,
    DiurnalParams,
    HPWorkloadSpec,
    NodeConfig,
    SimEnv,
    allocation_from_indices,
    be_mbw_from_hp,
    diurnal_demand,
    init_env,
)

GOLDEN_TRACE = "traces/golden_diurnal.csv"


def make_env(seed=7, spike_prob=0.02, aggressiveness=0.6, **node_kw):
    node = NodeConfig(**node_kw)
    hp = HPWorkloadSpec(transient_spike_prob=spike_prob)
    be = BEWorkloadSpec(name="probe", mbw_aggressiveness=aggressiveness)
    return init_env(node, [hp], [be], seed=seed)


def outcome_tuple(out):
    return (
        tuple(out.measured_qos),
        tuple(out.mean_qos),
        out.be_ips_norm,
        out.power_norm,
        tuple(out.counters[0].as_array()),
        tuple(out.hp_demand),
    )


# -- init_env -----------------------------------------------------------------


def test_same_seed_identical_trajectories():
    a, b = make_env(seed=7), make_env(seed=7)
    action = (5, 6, 4, 4, 3)
    for _ in range(5):
        out_a = a.step(a.apply_action(action))
        out_b = b.step(b.apply_action(action))
        assert outcome_tuple(out_a) == outcome_tuple(out_b)


def test_empty_hp_list_rejected():
    with pytest.raises(ValueError):
        init_env(NodeConfig(), [], [BEWorkloadSpec(name="x")], seed=1)


def test_malformed_level_list_rejected():
    with pytest.raises(ValueError):
        NodeConfig(mbw_levels=(10, 10, 30))
    with pytest.raises(ValueError):
        NodeConfig(total_llc_ways=1)


def test_different_seeds_diverge():
    a, b = make_env(seed=7), make_env(seed=8)
    action = (5, 6, 4, 4, 3)
    diverged = False
    for _ in range(5):
        out_a = a.step(a.apply_action(action))
        out_b = b.step(b.apply_action(action))
        if outcome_tuple(out_a) != outcome_tuple(out_b):
            diverged = True
    assert diverged


# -- diurnal demand ------------------------------------------------------------


def test_diurnal_extrema_noiseless():
    p = DiurnalParams(base_pps=100.0, amplitude_pps=40.0, period_s=80.0, phase_rad=0.0, noise_std_pps=0.0)
    peak_t = 80.0 / 4.0  # sin phase pi/2
    trough_t = 3.0 * 80.0 / 4.0
    assert diurnal_demand(peak_t, p) == pytest.approx(140.0)
    assert diurnal_demand(trough_t, p) == pytest.approx(60.0)
    clamped = DiurnalParams(base_pps=10.0, amplitude_pps=40.0, period_s=80.0, noise_std_pps=0.0)
    assert diurnal_demand(trough_t, clamped) == 0.0


def test_diurnal_golden_trace():
    p = DiurnalParams(base_pps=1.3e6, amplitude_pps=9.0e5, period_s=200.0, phase_rad=0.0, noise_std_pps=3.0e4)
    regenerated = DemandTrace.from_params(p, 101, seed=123)
    golden = DemandTrace.from_csv(GOLDEN_TRACE)
    assert np.allclose(regenerated.values, golden.values, rtol=0, atol=5e-6)


def test_trace_csv_round_trip(tmp_path):
    tr = DemandTrace(values=np.array([0.0, 10.5, 3.25]))
    path = tmp_path / "t.csv"
    tr.to_csv(path)
    back = DemandTrace.from_csv(path)
    assert np.allclose(back.values, tr.values)


# -- apply_allocation ----------------------------------------------------------


def test_llc_index_partitions_eight_way_node():
    alloc = allocation_from_indices(NodeConfig(), 7, 9, 6, 6, 4)
    assert alloc.hp_llc_ways == 7
    assert alloc.be_llc_ways == 1


def test_top_core_frequency_index():
    alloc = allocation_from_indices(NodeConfig(), 0, 0, 6, 0, 0)
    assert alloc.hp_core_freq == pytest.approx(2.7)


def test_mbw_complement_rule():
    alloc = allocation_from_indices(NodeConfig(), 0, 0, 0, 0, 0)
    assert alloc.hp_mbw_cap == 10
    assert alloc.be_mbw_cap == 100
    assert be_mbw_from_hp(100) == 10


def test_out_of_range_index_rejected():
    env = make_env()
    with pytest.raises(IndexError):
        env.apply_action((8, 0, 0, 0, 0))
    with pytest.raises(IndexError):
        env.apply_action((0, 0, 0, 0, 5))


def test_min_ways_clamp_flag():
    node = NodeConfig(min_ways_clamp=True)
    lo = allocation_from_indices(node, 0, 0, 0, 0, 0)
    hi = allocation_from_indices(node, 7, 0, 0, 0, 0)
    assert lo.hp_llc_ways == 2 and lo.be_llc_ways == 6
    assert hi.hp_llc_ways == 6 and hi.be_llc_ways == 2


# -- step ------------------------------------------------------------------


def test_zero_demand_zero_drops():
    node = NodeConfig(substeps_per_interval=20)
    hp = HPWorkloadSpec(transient_spike_prob=0.0, demand_trace=DemandTrace(values=np.zeros(100000)))
    env = init_env(node, [hp], [BEWorkloadSpec(name="x")], seed=1)
    out = env.step(env.apply_action((5, 5, 5, 5, 3)))
    assert out.measured_qos[0] == 0.0


def test_cliff_knee_ratio_at_least_ten():
    # hp_mbw just below vs just above the knee, spikes disabled, same seed
    hp = HPWorkloadSpec(transient_spike_prob=0.0)
    env = init_env(NodeConfig(), [hp], [BEWorkloadSpec(name="x", mbw_aggressiveness=0.1)], seed=5)
    demand = 0.24 * hp.peak_demand_pps  # knee falls between MBW caps 10% and 20%
    below = env.worst_case_qos(env.apply_action((6, 0, 6, 6, 4)), window_s=100, demand_pps=demand)
    above = env.worst_case_qos(env.apply_action((6, 1, 6, 6, 4)), window_s=100, demand_pps=demand)
    assert above > 0
    assert below < demand  # not saturated at the demand ceiling
    assert below / above >= 10.0


def test_identical_state_identical_outcome():
    a, b = make_env(seed=11), make_env(seed=11)
    out_a = a.step(a.apply_action((4, 4, 4, 4, 2)))
    out_b = b.step(b.apply_action((4, 4, 4, 4, 2)))
    assert outcome_tuple(out_a) == outcome_tuple(out_b)


def test_worst_substep_dominates_interval_mean():
    env = make_env(seed=13)
    for action in [(7, 9, 6, 6, 4), (4, 5, 3, 3, 2), (2, 2, 1, 1, 0)]:
        out = env.step(env.apply_action(action))
        assert out.measured_qos[0] >= out.mean_qos[0]
        assert 0.0 <= out.be_ips_norm <= 1.0
        assert 0.0 <= out.power_norm <= 1.0


# -- worst_case_qos -----------------------------------------------------------


def test_worst_case_without_spikes_is_steady_base():
    hp = HPWorkloadSpec(transient_spike_prob=0.0)
    env = init_env(NodeConfig(), [hp], [BEWorkloadSpec(name="x")], seed=2)
    res = env.profile(env.apply_action((5, 6, 5, 5, 3)), window_s=100, demand_pps=1.6e6)
    series = res.substep_qos[0]
    # constant demand, no spikes: every substep carries the same base rate
    assert np.allclose(series, series[0])
    assert res.worst_qos[0] == pytest.approx(series[0])


def test_worst_case_at_least_mean():
    env = make_env(seed=3)
    res = env.profile(env.apply_action((5, 6, 5, 5, 3)), window_s=100, demand_pps=1.8e6)
    assert res.worst_qos[0] >= res.mean_qos[0]


def test_worst_case_matches_recorded_substep_max():
    hp = HPWorkloadSpec(transient_spike_prob=0.01)
    env = init_env(NodeConfig(), [hp], [BEWorkloadSpec(name="x")], seed=17)
    res = env.profile(env.apply_action((6, 7, 6, 6, 4)), window_s=100, demand_pps=1.9e6)
    recorded = np.asarray(res.substep_qos[0])
    assert len(recorded) == 100
    assert res.worst_qos[0] == np.max(recorded)


def test_profiling_does_not_disturb_trajectory():
    a, b = make_env(seed=23), make_env(seed=23)
    action = (5, 6, 4, 4, 3)
    b.profile(b.apply_action(action), window_s=100, demand_pps=1.0e6)
    for _ in range(3):
        out_a = a.step(a.apply_action(action))
        out_b = b.step(b.apply_action(action))
        assert outcome_tuple(out_a) == outcome_tuple(out_b)


# -- invariants ---------------------------------------------------------------


def test_partition_conservation_random_actions():
    env = make_env(seed=29)
    rng = np.random.default_rng(0)
    sizes = env.node.branch_sizes
    for _ in range(50):
        idx = tuple(rng.integers(0, s) for s in sizes)
        alloc = env.apply_action(idx)
        assert alloc.hp_llc_ways + alloc.be_llc_ways == env.node.total_llc_ways
        out = env.step(alloc)
        assert np.all(np.isfinite(out.measured_qos))


def test_monotone_contention_llc_and_aggressiveness():
    hp = HPWorkloadSpec(transient_spike_prob=0.0)
    node = NodeConfig(control_interval_s=1.0)
    env_lo = init_env(node, [hp], [BEWorkloadSpec(name="lo", mbw_aggressiveness=0.3)], seed=31)
    env_hi = init_env(node, [hp], [BEWorkloadSpec(name="hi", mbw_aggressiveness=0.9)], seed=31)
    demands = [0.6e6, 1.2e6, 2.0e6]
    for d in demands:
        for mbw in range(10):
            prev_lo = None
            for llc in range(8):
                action = (llc, mbw, 6, 6, 4)
                wc_lo = env_lo.worst_case_qos(env_lo.apply_action(action), window_s=1, demand_pps=d)
                wc_hi = env_hi.worst_case_qos(env_hi.apply_action(action), window_s=1, demand_pps=d)
                assert wc_hi >= wc_lo - 1e-9  # more BE pressure never helps the HP
                if prev_lo is not None:
                    assert wc_lo <= prev_lo + 1e-9  # more cache never hurts
                prev_lo = wc_lo


def test_tail_dominance_with_spikes():
    env = make_env(seed=37)
    res = env.profile(env.apply_action((6, 7, 6, 6, 4)), window_s=500, demand_pps=1.4e6)
    series = res.substep_qos[0]
    assert series.max() / max(series.mean(), 1e-9) >= 5.0


def test_counter_plausibility():
    env = make_env(seed=41)
    rng = np.random.default_rng(1)
    sizes = env.node.branch_sizes
    for _ in range(30):
        idx = tuple(rng.integers(0, s) for s in sizes)
        out = env.step(env.apply_action(idx))
        ctr = out.counters[0]
        ipc = ctr.instructions_retired / ctr.unhalted_cycles
        assert 0.0 < ipc <= env.node.max_ipc_bound
        ctr.validate(env.node.max_ipc_bound)


def test_switch_be_changes_pressure_not_time():
    env = make_env(seed=43)
    t0 = env.time_s
    env.switch_be([BEWorkloadSpec(name="heavy", mbw_aggressiveness=1.0)])
    assert env.time_s == t0
    out = env.step(env.apply_action((4, 4, 6, 6, 4)))
    assert np.isfinite(out.measured_qos[0])
