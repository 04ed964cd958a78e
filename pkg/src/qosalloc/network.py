"""Small dense networks with manual backprop and an Adam optimizer.

Parameters live in plain numpy arrays so networks stay cheap to checkpoint and
bit-exact to reload. Layers are fully connected with relu or identity
activations; gradients are accumulated over the batch dimension.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "identity")


def init_linear(rng: np.random.Generator, n_in: int, n_out: int):
    """Fan-in scaled uniform init for one layer."""
    bound = 1.0 / np.sqrt(n_in)
    w = rng.uniform(-bound, bound, size=(n_in, n_out))
    b = rng.uniform(-bound, bound, size=n_out)
    return w, b


class Linear:
    def __init__(self, w: np.ndarray, b: np.ndarray):
        self.w = np.asarray(w, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w + self.b

    def backward(self, x: np.ndarray, dy: np.ndarray):
        """Returns (dW, db, dx) for cached input x."""
        return x.T @ dy, dy.sum(axis=0), dy @ self.w.T


def _act(z, kind):
    return np.maximum(z, 0.0) if kind == "relu" else z


def _act_grad(z, kind):
    return (z > 0.0).astype(float) if kind == "relu" else np.ones_like(z)


class DenseNetwork:
    """Sequential fully connected network."""

    def __init__(self, layers, activations):
        if len(layers) != len(activations):
            raise ValueError("one activation per layer required")
        for a in activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        self.layers = list(layers)
        self.activations = list(activations)
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.w.shape[1] != nxt.w.shape[0]:
                raise ValueError("layer dimensions do not chain")

    @classmethod
    def create(cls, sizes, activations, rng: np.random.Generator) -> "DenseNetwork":
        layers = [Linear(*init_linear(rng, sizes[i], sizes[i + 1])) for i in range(len(sizes) - 1)]
        return cls(layers, activations)

    @property
    def n_params(self) -> int:
        return sum(layer.w.size + layer.b.size for layer in self.layers)

    def parameters(self) -> list:
        out = []
        for layer in self.layers:
            out.extend((layer.w, layer.b))
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        squeeze = np.ndim(x) == 1
        h = np.atleast_2d(np.asarray(x, dtype=float))
        if h.shape[1] != self.layers[0].w.shape[0]:
            raise ValueError(f"expected input width {self.layers[0].w.shape[0]}, got {h.shape[1]}")
        for layer, act in zip(self.layers, self.activations):
            h = _act(layer.forward(h), act)
        return h[0] if squeeze else h

    def _forward_cached(self, x: np.ndarray):
        inputs = []
        pre = []
        h = np.atleast_2d(np.asarray(x, dtype=float))
        for layer, act in zip(self.layers, self.activations):
            inputs.append(h)
            z = layer.forward(h)
            pre.append(z)
            h = _act(z, act)
        return inputs, pre, h

    def backward(self, x: np.ndarray, out_grad: np.ndarray) -> list:
        """Gradients of sum(out_grad * forward(x)) for every parameter.

        Returned list aligns with parameters(): [dW1, db1, dW2, db2, ...].
        """
        out_grad = np.atleast_2d(np.asarray(out_grad, dtype=float))
        inputs, pre, out = self._forward_cached(x)
        if out_grad.shape != out.shape:
            raise ValueError(f"output gradient shape {out_grad.shape} != {out.shape}")
        grads = [None] * (2 * len(self.layers))
        delta = out_grad
        for i in range(len(self.layers) - 1, -1, -1):
            delta = delta * _act_grad(pre[i], self.activations[i])
            dw, db, dx = self.layers[i].backward(inputs[i], delta)
            grads[2 * i] = dw
            grads[2 * i + 1] = db
            delta = dx
        return grads

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "layers": [{"w": l.w.tolist(), "b": l.b.tolist()} for l in self.layers],
            "activations": list(self.activations),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DenseNetwork":
        layers = [Linear(np.asarray(l["w"], dtype=float), np.asarray(l["b"], dtype=float)) for l in d["layers"]]
        return cls(layers, d["activations"])

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "DenseNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def copy(self) -> "DenseNetwork":
        return DenseNetwork([Linear(l.w.copy(), l.b.copy()) for l in self.layers], list(self.activations))


@dataclass
class AdamState:
    """Adaptive-moment optimizer state for a fixed parameter list."""

    lr: float = 0.002
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = None
    v: list = None

    @classmethod
    def for_params(cls, params, lr=0.002, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            step=0,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_update(params: list, grads: list, state: AdamState) -> None:
    """One bias-corrected Adam step, applied to `params` in place.

    Non-finite gradients abort before any parameter is touched.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter/gradient/state lengths differ")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ValueError(f"gradient shape {np.shape(g)} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient; update aborted")
    state.step += 1
    b1c = 1.0 - state.beta1**state.step
    b2c = 1.0 - state.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p -= state.lr * (m / b1c) / (np.sqrt(v / b2c) + state.eps)
    for p in params:
        if not np.all(np.isfinite(p)):
            raise ValueError("parameters became non-finite after update")
