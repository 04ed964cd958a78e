"""Five-branch discrete allocation actions and multi-HP combination rules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simenv import NodeAllocation, NodeConfig, ResourceAllocation, allocation_from_indices, be_mbw_from_hp

BRANCH_NAMES = ("llc", "mbw", "hpcf", "becf", "ucf")


@dataclass(frozen=True)
class ActionSpace:
    branch_sizes: tuple

    @classmethod
    def from_node(cls, node: NodeConfig) -> "ActionSpace":
        return cls(branch_sizes=tuple(node.branch_sizes))

    @property
    def n_branches(self):
        return len(self.branch_sizes)


@dataclass(frozen=True)
class Action:
    llc: int
    mbw: int
    hpcf: int
    becf: int
    ucf: int

    def indices(self) -> tuple:
        return (self.llc, self.mbw, self.hpcf, self.becf, self.ucf)

    @classmethod
    def from_indices(cls, idx) -> "Action":
        llc, mbw, hpcf, becf, ucf = (int(v) for v in idx)
        return cls(llc, mbw, hpcf, becf, ucf)

    def validate(self, space: ActionSpace) -> None:
        for name, i, size in zip(BRANCH_NAMES, self.indices(), space.branch_sizes):
            if not 0 <= i < size:
                raise IndexError(f"{name} index {i} out of range [0, {size})")

    def to_allocation(self, node: NodeConfig) -> ResourceAllocation:
        return allocation_from_indices(node, *self.indices())


def smooth_action(recent, window: int | None = None) -> Action:
    """Per-branch rounded mean (round half up) over the trailing window."""
    if not recent:
        raise ValueError("cannot smooth an empty action window")
    window = len(recent) if window is None else window
    if window < 1:
        raise ValueError("window must be >= 1")
    tail = list(recent)[-window:]
    idx = np.array([a.indices() for a in tail], dtype=float)
    mean = idx.mean(axis=0)
    return Action.from_indices(np.floor(mean + 0.5).astype(int))


def combine_hp_actions(actions, node: NodeConfig) -> NodeAllocation:
    """Merge per-HP actions into one node-level allocation.

    Every HP keeps its own LLC share, MBW cap, and core frequency. The BE side
    gets the leftover LLC ways, the MBW cap complementary to the lowest HP MBW
    selection, the lowest BECF selection, and the highest UCF selection.
    """
    if not actions:
        raise ValueError("at least one HP action required")
    space = ActionSpace.from_node(node)
    for a in actions:
        a.validate(space)
    hp_ways = [a.llc for a in actions]
    if node.min_ways_clamp:
        hp_ways = [min(max(w, 2), node.total_llc_ways - 2) for w in hp_ways]
    be_ways = node.total_llc_ways - sum(hp_ways)
    if be_ways < 0:
        raise ValueError(f"HP LLC requests {sum(hp_ways)} oversubscribe {node.total_llc_ways} ways")
    min_mbw_idx = min(a.mbw for a in actions)
    return NodeAllocation(
        hp_llc_ways=tuple(hp_ways),
        hp_mbw_cap=tuple(node.mbw_levels[a.mbw] for a in actions),
        hp_core_freq=tuple(node.core_freq_levels[a.hpcf] for a in actions),
        be_llc_ways=be_ways,
        be_mbw_cap=be_mbw_from_hp(node.mbw_levels[min_mbw_idx]),
        be_core_freq=node.core_freq_levels[min(a.becf for a in actions)],
        uncore_freq=node.uncore_freq_levels[max(a.ucf for a in actions)],
    )
