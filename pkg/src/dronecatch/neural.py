"""Minimal feed-forward network with explicit gradients, shared by the learned
state estimator, the policy, and the critic. tanh hidden layers, identity output."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_VERSION = 1


class DimensionMismatchError(Exception):
    pass


class StaleCacheError(Exception):
    """Backward called with a cache that does not match the network/forward pass."""


@dataclass
class Mlp:
    layer_sizes: list[int]
    weights: list[np.ndarray]  # (fan_in, fan_out) per layer
    biases: list[np.ndarray]   # (fan_out,) per layer

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def copy(self) -> "Mlp":
        return Mlp(list(self.layer_sizes), [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases])


def mlp_init(layer_sizes: list[int], rng: np.random.Generator,
             last_layer_scale: float = 1.0) -> Mlp:
    """1/sqrt(fan_in) normal weights, zero biases. last_layer_scale shrinks the
    output head (used by the policy so fresh nets emit near-zero means)."""
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise ValueError("layer_sizes needs at least input and output dims, all >= 1")
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(layer_sizes, layer_sizes[1:])):
        scale = 1.0 / np.sqrt(fan_in)
        if i == len(layer_sizes) - 2:
            scale *= last_layer_scale
        weights.append(rng.normal(0.0, scale, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(list(layer_sizes), weights, biases)


@dataclass
class ForwardCache:
    activations: list[np.ndarray]  # activations[0] is the input, last is the output
    single: bool                   # input was 1-D


def mlp_forward(net: Mlp, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[-1] != net.layer_sizes[0]:
        raise DimensionMismatchError(
            f"input dim {h.shape[-1]} != first layer size {net.layer_sizes[0]}")
    acts = [h]
    last = net.n_layers - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if i < last:
            h = np.tanh(h)
        acts.append(h)
    out = acts[-1][0] if single else acts[-1]
    return out, ForwardCache(acts, single)


@dataclass
class MlpGradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    d_input: np.ndarray

    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases


def mlp_backward(net: Mlp, cache: ForwardCache, output_gradient: np.ndarray) -> MlpGradients:
    """Exact gradients of sum(output * output_gradient) w.r.t. parameters and input."""
    dy = np.asarray(output_gradient, dtype=np.float64)
    if cache.single:
        dy = dy[None, :]
    if len(cache.activations) != net.n_layers + 1:
        raise StaleCacheError("cache depth does not match the network")
    if dy.shape != cache.activations[-1].shape:
        raise StaleCacheError(
            f"output gradient shape {dy.shape} != forward output {cache.activations[-1].shape}")
    for act, size in zip(cache.activations, net.layer_sizes):
        if act.shape[-1] != size:
            raise StaleCacheError("cache activations do not match the network layout")
    d_w = [None] * net.n_layers
    d_b = [None] * net.n_layers
    delta = dy
    for i in range(net.n_layers - 1, -1, -1):
        a_prev = cache.activations[i]
        d_w[i] = a_prev.T @ delta
        d_b[i] = delta.sum(axis=0)
        delta = delta @ net.weights[i].T
        if i > 0:
            delta = delta * (1.0 - cache.activations[i] ** 2)
    d_input = delta[0] if cache.single else delta
    return MlpGradients(d_w, d_b, d_input)


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_init(params: list[np.ndarray], lr: float) -> AdamState:
    return AdamState(lr=lr,
                     m=[np.zeros_like(p) for p in params],
                     v=[np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> AdamState:
    """Standard bias-corrected update, applied to params in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params/grads/state length mismatch")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch: param {p.shape} vs grad {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return state


def save_checkpoint(path: str | Path, net: Mlp, extras: dict | None = None) -> None:
    """Versioned binary checkpoint; round-trips parameters bit-exactly."""
    payload = {
        "version": np.array(CHECKPOINT_VERSION),
        "layer_sizes": np.array(net.layer_sizes, dtype=np.int64),
    }
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        payload[f"w{i}"] = w
        payload[f"b{i}"] = b
    for key, value in (extras or {}).items():
        payload[f"x_{key}"] = np.asarray(value)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path: str | Path) -> tuple[Mlp, dict]:
    with np.load(path) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        sizes = [int(s) for s in data["layer_sizes"]]
        weights = [data[f"w{i}"] for i in range(len(sizes) - 1)]
        biases = [data[f"b{i}"] for i in range(len(sizes) - 1)]
        extras = {key[2:]: data[key] for key in data.files if key.startswith("x_")}
    return Mlp(sizes, weights, biases), extras
