import pytest

from qosalloc.actions import Action, ActionSpace, combine_hp_actions, smooth_action
from qosalloc.simenv import NodeConfig


def A(llc=0, mbw=0, hpcf=0, becf=0, ucf=0):
    return Action(llc, mbw, hpcf, becf, ucf)


def test_space_matches_node_levels():
    space = ActionSpace.from_node(NodeConfig())
    assert space.branch_sizes == (8, 10, 7, 7, 5)


def test_smooth_window_one_is_identity():
    history = [A(1, 2, 3, 4, 0), A(7, 9, 6, 6, 4)]
    assert smooth_action(history, window=1) == history[-1]


def test_smooth_round_half_up():
    history = [A(llc=3), A(llc=3), A(llc=3), A(llc=9)]
    assert smooth_action(history, window=4).llc == 5  # mean 4.5 rounds up


def test_smooth_identical_history():
    history = [A(2, 5, 3, 3, 1)] * 6
    assert smooth_action(history, window=5) == history[0]


def test_smooth_empty_window_rejected():
    with pytest.raises(ValueError):
        smooth_action([])
    with pytest.raises(ValueError):
        smooth_action([A()], window=0)


def test_single_hp_identity_with_remainder():
    node = NodeConfig()
    alloc = combine_hp_actions([A(llc=5, mbw=6, hpcf=4, becf=2, ucf=3)], node)
    assert alloc.hp_llc_ways == (5,)
    assert alloc.be_llc_ways == 3
    assert alloc.hp_mbw_cap == (node.mbw_levels[6],)
    assert alloc.be_mbw_cap == 110 - node.mbw_levels[6]
    assert alloc.be_core_freq == node.core_freq_levels[2]
    assert alloc.uncore_freq == node.uncore_freq_levels[3]


def test_two_hp_mbw_min_rule():
    node = NodeConfig()
    alloc = combine_hp_actions([A(llc=3, mbw=3), A(llc=3, mbw=7)], node)
    assert alloc.hp_mbw_cap == (node.mbw_levels[3], node.mbw_levels[7])
    assert alloc.be_mbw_cap == 110 - node.mbw_levels[3]  # lowest HP selection rules the BE


def test_two_hp_ucf_max_and_becf_min():
    node = NodeConfig()
    alloc = combine_hp_actions([A(llc=2, ucf=1, becf=5), A(llc=2, ucf=4, becf=2)], node)
    assert alloc.uncore_freq == node.uncore_freq_levels[4]
    assert alloc.be_core_freq == node.core_freq_levels[2]


def test_llc_oversubscription_rejected():
    node = NodeConfig()
    with pytest.raises(ValueError):
        combine_hp_actions([A(llc=7), A(llc=7)], node)


def test_out_of_range_action_rejected():
    node = NodeConfig()
    with pytest.raises(IndexError):
        combine_hp_actions([A(llc=8)], node)
    with pytest.raises(ValueError):
        combine_hp_actions([], node)


def test_partition_conservation():
    node = NodeConfig()
    for ways in range(8):
        alloc = combine_hp_actions([A(llc=ways)], node)
        assert sum(alloc.hp_llc_ways) + alloc.be_llc_ways == node.total_llc_ways
