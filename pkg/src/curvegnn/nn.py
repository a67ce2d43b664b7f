"""Parameterized layers, smooth MLPs and the Adam optimizer."""

from __future__ import annotations

import hashlib
import json
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

SMOOTH_ACTIVATIONS = {"sigmoid": ad.sigmoid, "tanh": ad.tanh, "softplus": ad.softplus}
ACTIVATIONS = {**SMOOTH_ACTIVATIONS, "relu": ad.relu}


def rng_for(seed: int, label: str) -> np.random.Generator:
    """Independent generator for a named consumer of the run seed."""
    digest = hashlib.sha256(f"{int(seed)}/{label}".encode()).digest()
    return np.random.default_rng(np.random.SeedSequence(int.from_bytes(digest[:16], "little")))


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


class Module:
    """Anything holding named parameter tensors."""

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for key, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                out[prefix + key] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(f"{prefix}{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{prefix}{key}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out[f"{prefix}{key}.{i}"] = item
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())


class Linear(Module):
    def __init__(self, fan_in: int, fan_out: int, rng: np.random.Generator):
        self.weight = Tensor(glorot(rng, fan_in, fan_out), requires_grad=True)
        self.bias = Tensor(np.zeros(fan_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class Mlp(Module):
    """Feed-forward net; ``widths`` includes input and output sizes."""

    def __init__(self, widths: Sequence[int], rng: np.random.Generator, activation: str = "relu"):
        if len(widths) < 2:
            raise ValueError("an MLP needs at least input and output widths")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.widths = tuple(int(w) for w in widths)
        self.activation = activation
        self.layers = [Linear(a, b, rng) for a, b in zip(self.widths[:-1], self.widths[1:])]

    def __call__(self, x: Tensor) -> Tensor:
        act = ACTIVATIONS[self.activation]
        for layer in self.layers[:-1]:
            x = act(layer(x))
        return self.layers[-1](x)


class SmoothMlp(Mlp):
    """Scalar vertex function ``f_theta`` built only from C-infinity activations."""

    def __init__(
        self,
        widths: Sequence[int],
        rng: np.random.Generator,
        activation: str = "sigmoid",
    ):
        if activation not in SMOOTH_ACTIVATIONS:
            raise ValueError(f"activation {activation!r} is not infinitely differentiable")
        if widths[-1] != 1:
            raise ValueError("a vertex function has output width 1")
        super().__init__(widths, rng, activation)

    def __call__(self, features) -> Tensor:
        features = ad.as_tensor(features)
        if features.ndim != 2 or features.shape[1] != self.widths[0]:
            raise ValueError(
                f"feature matrix {features.shape} does not match input width {self.widths[0]}"
            )
        return ad.reshape(super().__call__(features), (-1,))

    def forward(self, features: np.ndarray) -> np.ndarray:
        """Values of the function on every vertex, off the tape."""
        return self(Tensor(features)).data


class Adam:
    """Adam with bias correction and decoupled weight decay."""

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 0.01,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
        no_decay: Iterable[str] = (),
    ):
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.no_decay = set(no_decay)
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self, grads: dict[str, np.ndarray] | None = None) -> None:
        """Update parameters in place; ``grads`` defaults to each ``.grad``."""
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, p in self.params.items():
            g = grads.get(name) if grads is not None else p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if g.shape != p.data.shape:
                raise ValueError(f"gradient for {name!r} has shape {g.shape}, expected {p.shape}")
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
            m = self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            if self.weight_decay and name not in self.no_decay:
                p.data = p.data * (1.0 - self.lr * self.weight_decay)
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self) -> None:
        ad.zero_grad(self.params.values())


def save_parameters(path, params: dict[str, Tensor]) -> None:
    """Write named arrays as ``{name: {"shape": [...], "data": [...]}}`` JSON."""
    payload = {
        name: {"shape": list(p.shape), "data": [float(v) for v in p.data.ravel()]}
        for name, p in params.items()
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)


def load_parameters(path, params: dict[str, Tensor]) -> None:
    """Restore tensors written by :func:`save_parameters` in place."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    missing = sorted(set(params) - set(payload))
    if missing:
        raise KeyError(f"checkpoint lacks parameters: {', '.join(missing)}")
    for name, p in params.items():
        entry = payload[name]
        data = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if data.shape != p.shape:
            raise ValueError(f"checkpoint shape {data.shape} for {name!r}, expected {p.shape}")
        p.data = data
