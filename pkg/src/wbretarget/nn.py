"""Minimal dense networks with analytic gradients and Adam.

Double precision throughout: at desk scale reproducibility beats speed, and
the training loops are expected to be bit-deterministic given a seed.
Checkpoints are numpy .npz containers (zip of .npy arrays) with documented
keys; see the README formats section.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

ACTIVATIONS = ("elu", "tanh", "identity")
CHECKPOINT_SCHEMA = "densenet/v1"
GRAD_CLIP_NORM = 10.0


def _act(name, z):
    if name == "elu":
        return np.where(z > 0, z, np.expm1(z))
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name, z, a):
    # derivative in terms of pre-activation z and activation a
    if name == "elu":
        return np.where(z > 0, 1.0, a + 1.0)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


class DenseNet:
    """Fully connected net; sizes = [in, h1, ..., out], one activation per layer."""

    def __init__(self, sizes, activations, rng=None):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if len(activations) != len(sizes) - 1:
            raise ValueError("one activation per layer required")
        for a in activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        self.sizes = sizes
        self.activations = list(activations)
        rng = rng or np.random.default_rng(0)
        self.weights = []
        self.biases = []
        for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
            scale = np.sqrt(2.0 / fan_in) if act == "elu" else np.sqrt(1.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self):
        return len(self.weights)

    def parameters(self):
        return list(self.weights) + list(self.biases)

    def set_parameters(self, params):
        n = self.n_layers
        self.weights = [np.asarray(p, dtype=float) for p in params[:n]]
        self.biases = [np.asarray(p, dtype=float) for p in params[n:]]

    def forward(self, x):
        """Returns (output, cache); cache feeds backward()."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        a = x[None] if squeeze else x
        if a.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input dim {self.sizes[0]}, got {a.shape[1]}")
        pre = []
        acts = [a]
        for w, b, name in zip(self.weights, self.biases, self.activations):
            z = a @ w + b
            a = _act(name, z)
            pre.append(z)
            acts.append(a)
        out = a[0] if squeeze else a
        return out, {"pre": pre, "acts": acts, "squeeze": squeeze}

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out):
        """Exact reverse-mode gradients.

        Returns (grads, grad_input) where grads matches parameters() order.
        """
        grad_out = np.asarray(grad_out, dtype=float)
        if cache["squeeze"]:
            grad_out = grad_out[None]
        if grad_out.shape != cache["acts"][-1].shape:
            raise ValueError("output gradient shape does not match cached forward")
        gw = [None] * self.n_layers
        gb = [None] * self.n_layers
        delta = grad_out
        for i in range(self.n_layers - 1, -1, -1):
            delta = delta * _act_grad(self.activations[i], cache["pre"][i], cache["acts"][i + 1])
            gw[i] = cache["acts"][i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i > 0:
                delta = delta @ self.weights[i].T
        grad_in = delta @ self.weights[0].T
        if cache["squeeze"]:
            grad_in = grad_in[0]
        return gw + gb, grad_in


def clip_gradients(grads, max_norm=GRAD_CLIP_NORM):
    """Global-norm clip; returns (grads, norm). Logs when the clip engages."""
    total = np.sqrt(sum(float((g * g).sum()) for g in grads))
    if total > max_norm:
        log.debug("gradient norm %.3g clipped to %.3g", total, max_norm)
        scale = max_norm / total
        grads = [g * scale for g in grads]
    return grads, total


@dataclass
class Adam:
    """Bias-corrected Adam over a parameter list."""

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params, grads, clip_norm=GRAD_CLIP_NORM):
        """Update params in place; returns the pre-clip gradient norm."""
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        if clip_norm is not None:
            grads, norm = clip_gradients(grads, clip_norm)
        else:
            norm = np.sqrt(sum(float((g * g).sum()) for g in grads))
        self.step_count += 1
        b1c = 1.0 - self.beta1 ** self.step_count
        b2c = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
        return norm

    def state_arrays(self, prefix=""):
        out = {f"{prefix}step": np.array(self.step_count)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"{prefix}m{i}"] = m
            out[f"{prefix}v{i}"] = v
        return out

    def load_state_arrays(self, data, prefix=""):
        self.step_count = int(data[f"{prefix}step"])
        self.m, self.v = [], []
        i = 0
        while f"{prefix}m{i}" in data:
            self.m.append(np.array(data[f"{prefix}m{i}"]))
            self.v.append(np.array(data[f"{prefix}v{i}"]))
            i += 1


def net_arrays(net: DenseNet, prefix="") -> dict:
    """Checkpoint arrays for a net (see README for the key layout)."""
    out = {
        f"{prefix}schema": np.array(CHECKPOINT_SCHEMA),
        f"{prefix}sizes": np.array(net.sizes, dtype=np.int64),
        f"{prefix}activations": np.array(net.activations),
    }
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        out[f"{prefix}W{i}"] = w
        out[f"{prefix}b{i}"] = b
    return out


def net_from_arrays(data, prefix="") -> DenseNet:
    schema = str(np.asarray(data[f"{prefix}schema"]))
    if schema != CHECKPOINT_SCHEMA:
        raise ValueError(f"unsupported checkpoint schema {schema!r}")
    sizes = [int(s) for s in data[f"{prefix}sizes"]]
    acts = [str(a) for a in data[f"{prefix}activations"]]
    net = DenseNet(sizes, acts)
    net.weights = [np.array(data[f"{prefix}W{i}"]) for i in range(len(sizes) - 1)]
    net.biases = [np.array(data[f"{prefix}b{i}"]) for i in range(len(sizes) - 1)]
    return net


def save_net(net: DenseNet, path) -> None:
    np.savez(path, **net_arrays(net))


def load_net(path) -> DenseNet:
    with np.load(path, allow_pickle=False) as data:
        return net_from_arrays(data)
