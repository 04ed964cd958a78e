"""Branching dueling Q-function: shared trunk, one advantage head per knob.

Per-branch Q-values use the mean-advantage dueling aggregation
Q_b(s, a) = V(s) + A_b(s, a) - mean_a A_b(s, a), so the per-branch mean of Q
always equals the state value. A tabular drop-in with the same training
protocol supports exact correctness checks against value iteration.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .network import AdamState, Linear, adam_update, init_linear

FORMAT_VERSION = 1


class BDQNetwork:
    def __init__(self, trunk, value_head: Linear, adv_heads, branch_sizes):
        self.trunk = list(trunk)  # two relu layers
        self.value_head = value_head
        self.adv_heads = list(adv_heads)
        self.branch_sizes = tuple(branch_sizes)

    @classmethod
    def create(cls, state_dim: int, branch_sizes, hidden: int, rng: np.random.Generator) -> "BDQNetwork":
        trunk = [Linear(*init_linear(rng, state_dim, hidden)), Linear(*init_linear(rng, hidden, hidden))]
        value = Linear(*init_linear(rng, hidden, 1))
        heads = [Linear(*init_linear(rng, hidden, nb)) for nb in branch_sizes]
        return cls(trunk, value, heads, branch_sizes)

    @property
    def state_dim(self):
        return self.trunk[0].w.shape[0]

    def parameters(self) -> list:
        params = []
        for layer in (*self.trunk, self.value_head, *self.adv_heads):
            params.extend((layer.w, layer.b))
        return params

    def _trunk_forward(self, x):
        z1 = self.trunk[0].forward(x)
        h1 = np.maximum(z1, 0.0)
        z2 = self.trunk[1].forward(h1)
        h2 = np.maximum(z2, 0.0)
        return z1, h1, z2, h2

    def q_values(self, states: np.ndarray) -> list:
        """Per-branch Q arrays, each (batch, branch_size)."""
        x = np.atleast_2d(np.asarray(states, dtype=float))
        if x.shape[1] != self.state_dim:
            raise ValueError(f"expected state width {self.state_dim}, got {x.shape[1]}")
        _, _, _, h2 = self._trunk_forward(x)
        v = self.value_head.forward(h2)
        out = []
        for head in self.adv_heads:
            a = head.forward(h2)
            out.append(v + a - a.mean(axis=1, keepdims=True))
        return out

    def q_values_single(self, state: np.ndarray) -> list:
        return [q[0] for q in self.q_values(np.asarray(state).reshape(1, -1))]

    def forward_cached(self, states: np.ndarray):
        x = np.atleast_2d(np.asarray(states, dtype=float))
        z1, h1, z2, h2 = self._trunk_forward(x)
        v = self.value_head.forward(h2)
        qs = []
        for head in self.adv_heads:
            a = head.forward(h2)
            qs.append(v + a - a.mean(axis=1, keepdims=True))
        return qs, (x, z1, h1, z2, h2)

    def backward_from_q_grads(self, cache, dq_list) -> list:
        """Parameter gradients given dLoss/dQ_b for every branch."""
        x, z1, h1, z2, h2 = cache
        dv = np.zeros((x.shape[0], 1))
        dh2 = np.zeros_like(h2)
        grads_heads = []
        for head, dq in zip(self.adv_heads, dq_list):
            dv += dq.sum(axis=1, keepdims=True)
            da = dq - dq.mean(axis=1, keepdims=True)
            dw, db, dh = head.backward(h2, da)
            grads_heads.append((dw, db))
            dh2 += dh
        dwv, dbv, dhv = self.value_head.backward(h2, dv)
        dh2 += dhv
        dz2 = dh2 * (z2 > 0.0)
        dw2, db2, dh1 = self.trunk[1].backward(h1, dz2)
        dz1 = dh1 * (z1 > 0.0)
        dw1, db1, _ = self.trunk[0].backward(x, dz1)
        grads = [dw1, db1, dw2, db2, dwv, dbv]
        for dw, db in grads_heads:
            grads.extend((dw, db))
        return grads

    def copy(self) -> "BDQNetwork":
        return BDQNetwork(
            [Linear(l.w.copy(), l.b.copy()) for l in self.trunk],
            Linear(self.value_head.w.copy(), self.value_head.b.copy()),
            [Linear(l.w.copy(), l.b.copy()) for l in self.adv_heads],
            self.branch_sizes,
        )

    def sync_from(self, other: "BDQNetwork") -> None:
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine[...] = theirs

    def to_dict(self) -> dict:
        def dump(l):
            return {"w": l.w.tolist(), "b": l.b.tolist()}

        return {
            "format_version": FORMAT_VERSION,
            "kind": "bdq",
            "branch_sizes": list(self.branch_sizes),
            "trunk": [dump(l) for l in self.trunk],
            "value": dump(self.value_head),
            "advantage": [dump(l) for l in self.adv_heads],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BDQNetwork":
        if d.get("format_version") != FORMAT_VERSION or d.get("kind") != "bdq":
            raise ValueError("unsupported checkpoint format")

        def load(ld):
            return Linear(np.asarray(ld["w"], dtype=float), np.asarray(ld["b"], dtype=float))

        return cls([load(l) for l in d["trunk"]], load(d["value"]), [load(l) for l in d["advantage"]], tuple(d["branch_sizes"]))

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "BDQNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))


class NetworkQ:
    """BDQ network plus optimizer, exposing the shared training protocol."""

    def __init__(self, net: BDQNetwork, lr: float, grad_clip: float = 5.0):
        self.net = net
        self.adam = AdamState.for_params(net.parameters(), lr=lr)
        self.grad_clip = grad_clip

    @property
    def branch_sizes(self):
        return self.net.branch_sizes

    def q_values(self, states):
        return self.net.q_values(states)

    def train_on(self, states, actions, targets, weights):
        """Importance-weighted squared TD loss, averaged over branches.

        Returns (loss, per-sample mean |td error| across branches).
        """
        qs, cache = self.net.forward_cached(states)
        batch = qs[0].shape[0]
        n_branches = len(qs)
        weights = np.asarray(weights, dtype=float)
        dq_list = []
        abs_err = np.zeros(batch)
        loss = 0.0
        rows = np.arange(batch)
        for b, q in enumerate(qs):
            a = actions[:, b]
            delta = targets[b] - q[rows, a]
            abs_err += np.abs(delta) / n_branches
            loss += float(np.mean(weights * delta**2)) / n_branches
            dq = np.zeros_like(q)
            dq[rows, a] = -2.0 * weights * delta / (batch * n_branches)
            dq_list.append(dq)
        grads = self.net.backward_from_q_grads(cache, dq_list)
        if self.grad_clip:
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
            if norm > self.grad_clip:
                grads = [g * (self.grad_clip / norm) for g in grads]
        adam_update(self.net.parameters(), grads, self.adam)
        return loss, abs_err

    def copy_target(self):
        return self.net.copy()

    def sync_target(self, target: BDQNetwork):
        target.sync_from(self.net)


class TabularQ:
    """Table-backed Q-function with the same protocol as NetworkQ.

    States are single-element arrays holding a discrete state id. Used to
    check the learning loop exactly against value iteration.
    """

    def __init__(self, n_states: int, branch_sizes, lr: float = 0.1):
        self.tables = [np.zeros((n_states, nb)) for nb in branch_sizes]
        self.branch_sizes = tuple(branch_sizes)
        self.lr = lr

    def q_values(self, states):
        ids = np.atleast_2d(np.asarray(states))[:, 0].astype(int)
        return [t[ids] for t in self.tables]

    def train_on(self, states, actions, targets, weights):
        ids = np.atleast_2d(np.asarray(states))[:, 0].astype(int)
        batch = len(ids)
        abs_err = np.zeros(batch)
        loss = 0.0
        for b, table in enumerate(self.tables):
            for i in range(batch):
                s, a = ids[i], actions[i, b]
                delta = targets[b][i] - table[s, a]
                table[s, a] += self.lr * weights[i] * delta
                abs_err[i] += abs(delta) / len(self.tables)
                loss += weights[i] * delta**2 / (batch * len(self.tables))
        return float(loss), abs_err

    def copy_target(self):
        clone = TabularQ(self.tables[0].shape[0], self.branch_sizes, self.lr)
        for mine, theirs in zip(clone.tables, self.tables):
            mine[...] = theirs
        return clone

    def sync_target(self, target: "TabularQ"):
        for t_dst, t_src in zip(target.tables, self.tables):
            t_dst[...] = t_src


def td_targets(rewards, dones, next_states, online, target, gamma: float) -> list:
    """Double-DQN targets per branch: online argmax, target evaluation."""
    rewards = np.asarray(rewards, dtype=float)
    cont = 1.0 - np.asarray(dones, dtype=float)
    q_online = online.q_values(next_states)
    q_target = target.q_values(next_states)
    out = []
    rows = np.arange(len(rewards))
    for qo, qt in zip(q_online, q_target):
        best = np.argmax(qo, axis=1)
        out.append(rewards + gamma * cont * qt[rows, best])
    return out
