"""Learned curvature: a family of smooth vertex functions and a hinge objective.

For each vertex the estimate ``kappa_hat(x)`` is pushed up by ``-lam *
kappa_hat(x)`` and pushed down by the hinge penalty of every family member
that violates ``gamma2(f)(x) >= kappa_hat(x) gamma(f)(x)``. The members
play the infimum: in the same step they move against the penalty's
descent direction, looking for functions that violate the inequality.
Restricting the infimum to a finite family can only overestimate the true
curvature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .exact import CurvatureEstimate
from .graph import WeightedGraph
from .nn import Adam, Mlp, Module, SmoothMlp, rng_for
from .operators import TapedOperators


# kappa_hat moves by sign steps (Adam with both betas 0): one large hinge
# gradient from a scaled-up family member cannot throw it far below its ceiling
KAPPA_BETAS = (0.0, 0.0)


def reverse_gradients(params) -> None:
    """Flip accumulated gradients so a descent step ascends the loss.

    Family members are adversaries: they descend their slack, which is
    ascent on the hinge penalty.
    """
    for p in params:
        if p.grad is not None:
            p.grad = -p.grad


def penalty(kappa_hat: float, gamma_x: float, gamma2_x: float) -> float:
    """Violation ``max(0, kappa_hat * gamma - gamma2)`` of the curvature inequality."""
    return max(0.0, kappa_hat * gamma_x - gamma2_x)


class FunctionFamily(Module):
    """``N`` independently initialised smooth MLPs over vertex features."""

    def __init__(
        self,
        n_functions: int,
        in_dim: int,
        rng: np.random.Generator,
        hidden: tuple[int, ...] = (16,),
        activation: str = "sigmoid",
    ):
        self.members = [
            SmoothMlp((in_dim, *hidden, 1), rng, activation) for _ in range(n_functions)
        ]

    def __len__(self) -> int:
        return len(self.members)

    def __call__(self, features) -> Tensor | None:
        """Member values as the columns of an ``(n, N)`` tensor."""
        if not self.members:
            return None
        features = ad.as_tensor(features)
        return ad.stack_columns([f(features) for f in self.members])


class LearnedCurvatureParams(Module):
    """Curvature estimates plus learnable log edge weights.

    ``mode="transductive"`` keeps one free scalar per vertex;
    ``mode="inductive"`` computes the estimate from vertex features with a
    shared MLP so it applies to unseen graphs.
    """

    def __init__(
        self,
        g: WeightedGraph,
        in_dim: int,
        rng: np.random.Generator,
        mode: str = "transductive",
        lam: float = 1.0,
        learn_weights: bool = True,
        hidden: tuple[int, ...] = (16,),
        init: float = 0.0,
    ):
        if lam < 0:
            raise ValueError("lambda must be non-negative")
        self.mode = mode
        self.lam = lam
        if mode == "transductive":
            self.kappa = Tensor(np.full(g.n_vertices, float(init)), requires_grad=True)
        elif mode == "inductive":
            self.kappa_net = Mlp((in_dim, *hidden, 1), rng, activation="sigmoid")
            self.kappa_net.layers[-1].bias.data[:] = init
        else:
            raise ValueError(f"unknown curvature mode {mode!r}")
        self.log_weights = Tensor(np.log(g.weights), requires_grad=learn_weights)

    def kappa_hat(self, features=None) -> Tensor:
        if self.mode == "transductive":
            return self.kappa
        return ad.reshape(self.kappa_net(ad.as_tensor(features)), (-1,))

    def weights(self) -> Tensor:
        return ad.exp(self.log_weights)

    def realized_weights(self) -> np.ndarray:
        return np.exp(self.log_weights.data)


def curvature_loss(
    g: WeightedGraph,
    family: FunctionFamily,
    params: LearnedCurvatureParams,
    features,
    operators: TapedOperators | None = None,
    kappa_hat: Tensor | None = None,
) -> Tensor:
    """``sum_x (sum_f penalty(kappa_hat(x), f) - lam * kappa_hat(x))`` on the tape."""
    operators = operators or TapedOperators(g)
    if kappa_hat is None:
        kappa_hat = params.kappa_hat(features)
    reward = params.lam * ad.tsum(kappa_hat)
    F = family(features)
    if F is None:
        return 0.0 * ad.tsum(kappa_hat) - reward
    _, gam, gam2 = operators.fields(F, params.weights())
    hinge = ad.relu(ad.reshape(kappa_hat, (-1, 1)) * gam - gam2)
    per_vertex = hinge.data.sum(axis=1)
    if not np.all(np.isfinite(per_vertex)):
        bad = int(np.flatnonzero(~np.isfinite(per_vertex))[0])
        raise FloatingPointError(f"curvature penalty is not finite at vertex {bad}")
    return ad.tsum(hinge) - reward


@dataclass
class CurvatureConfig:
    n_functions: int = 3
    lam: float = 1.0
    epochs: int = 2000
    lr: float = 0.01
    seed: int = 0
    hidden: tuple[int, ...] = (16,)
    mode: str = "transductive"
    train_family: bool = True
    learn_weights: bool = False
    expanded_form: bool = False


@dataclass
class CurvatureFit:
    estimate: CurvatureEstimate
    family: FunctionFamily
    params: LearnedCurvatureParams
    history: list[float] = field(default_factory=list)


def fit_curvature(g: WeightedGraph, features: np.ndarray, config: CurvatureConfig) -> CurvatureFit:
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] != g.n_vertices:
        raise ValueError("features need one row per vertex")
    family = FunctionFamily(
        config.n_functions, features.shape[1], rng_for(config.seed, "family"), config.hidden
    )
    params = LearnedCurvatureParams(
        g,
        features.shape[1],
        rng_for(config.seed, "kappa"),
        mode=config.mode,
        lam=config.lam,
        learn_weights=config.learn_weights,
    )
    curv = params.named_parameters("curv.")
    weights = {k: curv.pop(k) for k in list(curv) if k == "curv.log_weights"}
    opt_kappa = Adam(curv, lr=config.lr, betas=KAPPA_BETAS)
    opt_weights = Adam(weights, lr=config.lr)
    members = family.named_parameters("family.") if config.train_family else {}
    opt_family = Adam(members, lr=config.lr)
    operators = TapedOperators(g, config.expanded_form)
    X = Tensor(features)
    history = []
    for epoch in range(config.epochs):
        for opt in (opt_kappa, opt_weights, opt_family):
            opt.zero_grad()
        loss = curvature_loss(g, family, params, X, operators)
        if not np.isfinite(loss.item()):
            raise FloatingPointError(f"curvature loss diverged at step {epoch}")
        ad.backward(loss)
        reverse_gradients(members.values())
        for opt in (opt_kappa, opt_weights, opt_family):
            opt.step()
        history.append(loss.item())
    values = params.kappa_hat(X).data.copy()
    estimate = CurvatureEstimate(
        values, "learned", extra={"weights": params.realized_weights()}
    )
    return CurvatureFit(estimate, family, params, history)


def estimate_curvature(
    g: WeightedGraph, features: np.ndarray, config: CurvatureConfig | None = None
) -> CurvatureEstimate:
    isolated = np.flatnonzero(g.degrees == 0)
    if len(isolated):
        raise ValueError(f"isolated vertices have no curvature: {isolated[:10].tolist()}")
    return fit_curvature(g, features, config or CurvatureConfig()).estimate
