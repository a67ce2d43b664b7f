"""Curvature-ranked stopping depths and depth-adaptive message passing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .exact import CurvatureEstimate
from .graph import WeightedGraph
from .nn import Linear, Mlp, Module, rng_for

AGGREGATORS = ("gcn-mean", "gin-sum")
SCHEDULES = ("fixed", "power-law", "normal", "linear")


@dataclass
class DepthAssignment:
    T: np.ndarray
    k: float
    max_depth: int
    rank_fraction: np.ndarray

    def histogram(self) -> dict[int, int]:
        depths, counts = np.unique(self.T, return_counts=True)
        return {int(d): int(c) for d, c in zip(depths, counts)}


def rank_fraction(kappa: np.ndarray) -> np.ndarray:
    """Fraction of vertices whose curvature is at least each vertex's own."""
    kappa = np.asarray(kappa, dtype=np.float64)
    s = np.sort(kappa)
    return (len(kappa) - np.searchsorted(s, kappa, side="left")) / len(kappa)


def layer_thresholds(
    k: float, max_depth: int, schedule: str = "fixed", seed: int = 0
) -> np.ndarray:
    """Per-layer threshold percentages ``k_1 .. k_L`` for a schedule."""
    L = max_depth
    if schedule == "fixed":
        return np.full(L, float(k))
    if schedule == "linear":
        return k * 2.0 * np.arange(1, L + 1) / (L + 1)
    rng = rng_for(seed, "threshold")
    if schedule == "power-law":
        # Pareto(3) shifted to start at 1 has mean 3/2
        return k * (rng.pareto(3.0, size=L) + 1.0) / 1.5
    if schedule == "normal":
        return np.clip(rng.normal(k, k / 3.0, size=L), 1e-3, None)
    raise ValueError(f"unknown threshold schedule {schedule!r}")


def _depths_fixed(p: np.ndarray, k: float) -> np.ndarray:
    T = np.empty(len(p), dtype=np.int64)
    for i, pi in enumerate(p):
        t = max(1, math.ceil(pi * 100.0 / k) - 1)
        while not pi <= k * t / 100:
            t += 1
        T[i] = t
    return T


def assign_depths(
    kappa,
    k: float,
    max_depth: int | None = None,
    schedule: str = "fixed",
    groups: np.ndarray | None = None,
    seed: int = 0,
) -> DepthAssignment:
    """Stopping depth ``T(x)``: the smallest ``t`` with ``p(x) <= k t / 100``.

    ``p(x)`` is the fraction of vertices with curvature at least
    ``kappa(x)``; ``-inf`` curvature ranks last. Depths are capped at
    ``max_depth``. With ``groups`` the ranking is done per group (one graph
    of a batch each). Non-fixed schedules replace ``k t`` by the running sum
    of per-layer thresholds.
    """
    if isinstance(kappa, CurvatureEstimate):
        kappa = kappa.values
    kappa = np.asarray(kappa, dtype=np.float64)
    if kappa.size == 0:
        raise ValueError("cannot assign depths on an empty graph")
    if not 0 < k <= 100:
        raise ValueError("k must lie in (0,100]")
    if np.any(np.isnan(kappa)) or np.any(np.isposinf(kappa)):
        raise ValueError("curvature values must be finite or -inf")
    if max_depth is not None and max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    if schedule != "fixed" and max_depth is None:
        raise ValueError(f"schedule {schedule!r} needs max_depth")

    if groups is None:
        p = rank_fraction(kappa)
    else:
        p = np.empty_like(kappa)
        for gid in np.unique(groups):
            sel = groups == gid
            p[sel] = rank_fraction(kappa[sel])

    if schedule == "fixed":
        T = _depths_fixed(p, k)
    else:
        cum = np.cumsum(layer_thresholds(k, max_depth, schedule, seed)) / 100
        T = np.searchsorted(cum, p, side="left") + 1
    if max_depth is not None:
        T = np.minimum(T, max_depth)
    return DepthAssignment(T.astype(np.int64), k, max_depth or int(T.max()), p)


class GnnLayer(Module):
    def __init__(self, aggregator: str, in_dim: int, out_dim: int, rng: np.random.Generator):
        if aggregator not in AGGREGATORS:
            raise ValueError(f"unknown aggregator {aggregator!r}")
        self.aggregator = aggregator
        if aggregator == "gcn-mean":
            self.self_lin = Linear(in_dim, out_dim, rng)
            self.nbr_lin = Linear(in_dim, out_dim, rng)
            self.nbr_lin.bias.requires_grad = False
        else:
            self.eps = Tensor(np.zeros(1), requires_grad=True)
            self.mlp = Mlp((in_dim, out_dim, out_dim), rng, activation="relu")

    def __call__(self, H: Tensor, graph_ctx: "GraphContext", weights: Tensor | None) -> Tensor:
        w = graph_ctx.arc_weights(weights)
        summed = ad.segment_sum(w * ad.take(H, graph_ctx.dst), graph_ctx.src, graph_ctx.n)
        if self.aggregator == "gcn-mean":
            total = ad.segment_sum(w, graph_ctx.src, graph_ctx.n) + graph_ctx.isolated
            message = summed / total
            return ad.relu(self.self_lin(H) + message @ self.nbr_lin.weight)
        return ad.relu(self.mlp((1.0 + self.eps) * H + summed))


class GraphContext:
    """Arc arrays of a graph, prepared once for message passing."""

    def __init__(self, g: WeightedGraph, owner: np.ndarray | None = None):
        self.g = g
        self.n = g.n_vertices
        self.src, self.dst, self.eid = g.arcs
        self.isolated = (g.degrees == 0).astype(np.float64).reshape(-1, 1)
        self.owner = owner
        if owner is not None:
            self.n_graphs = int(owner.max()) + 1
            self.graph_sizes = np.bincount(owner, minlength=self.n_graphs).reshape(-1, 1)

    def arc_weights(self, weights: Tensor | None) -> Tensor:
        if weights is None:
            return Tensor(self.g.weights[self.eid].reshape(-1, 1))
        return ad.reshape(ad.take(weights, self.eid), (-1, 1))


class GnnModel(Module):
    """``L`` message-passing layers followed by a linear task head."""

    def __init__(
        self,
        in_dim: int,
        hidden: int,
        out_dim: int,
        n_layers: int,
        aggregator: str = "gcn-mean",
        seed: int = 0,
        graph_level: bool = False,
    ):
        rng = rng_for(seed, "gnn")
        self.aggregator = aggregator
        self.in_dim = in_dim
        self.n_layers = n_layers
        self.graph_level = graph_level
        dims = [in_dim] + [hidden] * n_layers
        self.layers = [GnnLayer(aggregator, a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
        self.head = Linear(hidden, out_dim, rng)
        # zero head: training starts from a constant prediction
        self.head.weight.data[:] = 0.0
        self.output_scale = 1.0
        self.output_shift = 0.0

    def readout(self, H: Tensor, ctx: GraphContext) -> Tensor:
        if self.graph_level:
            H = ad.segment_sum(H, ctx.owner, ctx.n_graphs) / ctx.graph_sizes
        out = self.head(H)
        if self.output_scale != 1.0 or self.output_shift != 0.0:
            out = out * self.output_scale + self.output_shift
        return out


def forward_adaptive(
    model: GnnModel,
    ctx: GraphContext,
    features,
    depths: DepthAssignment | np.ndarray,
    weights: Tensor | None = None,
    return_hidden: bool = False,
):
    """Run message passing where vertex ``x`` stops updating after ``T(x)`` layers.

    A stopped vertex keeps sending its frozen state, so the message from
    ``y`` at layer ``t`` is ``h_y`` at layer ``min(t - 1, T(y))``.
    """
    T = depths.T if isinstance(depths, DepthAssignment) else np.asarray(depths)
    if T.shape != (ctx.n,):
        raise ValueError("need one depth per vertex")
    if T.min() < 1:
        raise ValueError("depths must be at least 1")
    if T.max() > model.n_layers:
        raise ValueError(f"depth {int(T.max())} exceeds the model's {model.n_layers} layers")
    H = ad.as_tensor(features)
    if H.shape != (ctx.n, model.in_dim):
        raise ValueError(f"features {H.shape} do not match ({ctx.n}, {model.in_dim})")
    for t, layer in enumerate(model.layers, start=1):
        new = layer(H, ctx, weights)
        H = new if t == 1 else ad.where((T >= t).reshape(-1, 1), new, H)
    out = model.readout(H, ctx)
    return (out, H) if return_hidden else out


def forward_standard(
    model: GnnModel, ctx: GraphContext, features, weights: Tensor | None = None
) -> Tensor:
    """Plain ``L``-layer message passing with no stopping."""
    H = ad.as_tensor(features)
    for layer in model.layers:
        H = layer(H, ctx, weights)
    return model.readout(H, ctx)


def task_loss(outputs: Tensor, labels, task: str, mask: np.ndarray | None = None) -> Tensor:
    """Mean cross-entropy (``classification``) or mean squared error (``regression``)."""
    labels = np.asarray(labels)
    idx = np.arange(outputs.shape[0]) if mask is None else np.flatnonzero(mask)
    if len(idx) == 0:
        raise ValueError("task loss over an empty split")
    if task == "classification":
        y = labels[idx].astype(np.int64)
        n_classes = outputs.shape[1]
        if y.min() < 0 or y.max() >= n_classes:
            raise ValueError(f"label out of range for {n_classes} classes")
        logp = ad.log_softmax(ad.take(outputs, idx))
        return -ad.mean(logp[np.arange(len(idx)), y])
    if task == "regression":
        pred = ad.reshape(ad.take(outputs, idx), (-1,))
        y = labels[idx].astype(np.float64)
        if y.shape != pred.shape:
            raise ValueError("regression labels must be one scalar per output")
        return ad.mean(ad.square(pred - y))
    raise ValueError(f"unknown task {task!r}")


def metric(outputs: np.ndarray, labels, task: str, mask: np.ndarray | None = None) -> float:
    """Accuracy for classification, mean squared error for regression."""
    labels = np.asarray(labels)
    idx = np.arange(len(outputs)) if mask is None else np.flatnonzero(mask)
    if len(idx) == 0:
        return float("nan")
    if task == "classification":
        return float(np.mean(outputs[idx].argmax(axis=1) == labels[idx].astype(np.int64)))
    return float(np.mean((outputs[idx, 0] - labels[idx].astype(np.float64)) ** 2))
