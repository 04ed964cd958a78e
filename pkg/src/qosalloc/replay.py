"""Proportional prioritized experience replay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray  # one index per branch
    reward: float
    next_state: np.ndarray
    done: bool

    def __post_init__(self):
        if not np.all(np.isfinite(self.state)) or not np.all(np.isfinite(self.next_state)):
            raise ValueError("transition states must be finite")


class PrioritizedReplay:
    """Ring buffer with p^alpha proportional sampling and IS weights.

    New transitions enter at the current maximum priority; priorities are
    refreshed to |td_error| + eps after each training step.
    """

    def __init__(self, capacity: int, alpha: float = 0.6, beta: float = 0.4, eps: float = 1e-6):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.alpha = alpha
        self.beta = beta
        self.eps = eps
        self._items: list = []
        self._priorities = np.zeros(capacity)
        self._cursor = 0

    def __len__(self):
        return len(self._items)

    def push(self, transition: Transition) -> None:
        priority = self._priorities[: len(self._items)].max() if self._items else 1.0
        if len(self._items) < self.capacity:
            self._items.append(transition)
            self._priorities[len(self._items) - 1] = priority
        else:
            self._items[self._cursor] = transition
            self._priorities[self._cursor] = priority
            self._cursor = (self._cursor + 1) % self.capacity

    def probabilities(self) -> np.ndarray:
        p = self._priorities[: len(self._items)] ** self.alpha
        return p / p.sum()

    def sample(self, batch: int, rng: np.random.Generator):
        """Returns (transitions, importance weights, indices); draws i.i.d. with replacement."""
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        probs = self.probabilities()
        idx = rng.choice(len(self._items), size=batch, replace=True, p=probs)
        n = len(self._items)
        weights_all = (n * probs) ** (-self.beta)
        weights = weights_all[idx] / weights_all.max()
        return [self._items[i] for i in idx], weights, idx

    def update(self, indices, td_errors) -> None:
        for i, err in zip(indices, np.abs(np.asarray(td_errors, dtype=float))):
            if not np.isfinite(err):
                raise ValueError("non-finite priority update")
            self._priorities[i] = err + self.eps
