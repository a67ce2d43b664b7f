"""Joint training of a depth-adaptive GNN and the learned curvature."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .gnn import (
    AGGREGATORS,
    SCHEDULES,
    DepthAssignment,
    GnnModel,
    GraphContext,
    assign_depths,
    forward_adaptive,
    forward_standard,
    metric,
    task_loss,
)
from .graph import WeightedGraph, disjoint_union
from .learn import (
    KAPPA_BETAS,
    FunctionFamily,
    LearnedCurvatureParams,
    curvature_loss,
    reverse_gradients,
)
from .nn import Adam, rng_for
from .operators import TapedOperators

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    task: str = "classification"
    epochs: int = 200
    lr: float = 0.005
    kappa_lr: float = 0.3
    seed: int = 0
    k: float = 20.0
    n_functions: int = 3
    lam: float = 1.0
    layers: int = 4
    hidden: int = 32
    aggregator: str = "gcn-mean"
    weight_decay: float = 5e-4
    dt: float = 1.0
    depth_refresh: int = 1
    schedule: str = "fixed"
    family_hidden: int = 16
    kappa_mode: str = "transductive"
    train_family: bool = True
    learn_weights: bool = True
    expanded_form: bool = False
    adaptive: bool = True
    train_fraction: float = 0.6
    val_fraction: float = 0.2

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.task not in ("classification", "regression"):
            raise ValueError(f"task must be classification or regression, got {self.task!r}")
        if not 0 < self.k <= 100:
            raise ValueError("k must lie in (0,100]")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.n_functions < 0:
            raise ValueError("n_functions must be >= 0")
        for name in ("epochs", "layers", "hidden", "depth_refresh", "family_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr <= 0 or self.kappa_lr <= 0 or self.dt <= 0 or self.weight_decay < 0:
            raise ValueError("lr and dt must be positive, weight_decay non-negative")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {', '.join(AGGREGATORS)}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {', '.join(SCHEDULES)}")
        if self.kappa_mode not in ("transductive", "inductive"):
            raise ValueError("kappa_mode must be transductive or inductive")
        if not 0 < self.train_fraction < 1 or not 0 <= self.val_fraction < 1 - self.train_fraction:
            raise ValueError("split fractions must leave a nonempty test split")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class TrainResult:
    model: GnnModel
    curvature: LearnedCurvatureParams
    family: FunctionFamily
    depths: DepthAssignment
    history: list[dict] = field(default_factory=list)
    outputs: np.ndarray | None = None
    hidden: np.ndarray | None = None
    kappa: np.ndarray | None = None
    classes: list[str] | None = None
    masks: dict[str, np.ndarray] = field(default_factory=dict)

    def parameters(self) -> dict[str, Tensor]:
        out = self.model.named_parameters("gnn.")
        out.update(self.curvature.named_parameters("curv."))
        out.update(self.family.named_parameters("family."))
        return out


def random_split(n: int, cfg: TrainConfig) -> dict[str, np.ndarray]:
    rng = rng_for(cfg.seed, "split")
    order = rng.permutation(n)
    n_train = max(1, int(round(cfg.train_fraction * n)))
    n_val = int(round(cfg.val_fraction * n))
    masks = {s: np.zeros(n, dtype=bool) for s in ("train", "val", "test")}
    masks["train"][order[:n_train]] = True
    masks["val"][order[n_train : n_train + n_val]] = True
    masks["test"][order[n_train + n_val :]] = True
    return masks


def masks_from_tags(tags: Sequence[str]) -> dict[str, np.ndarray]:
    tags = np.asarray(tags)
    unknown = set(tags.tolist()) - {"train", "val", "test"}
    if unknown:
        raise ValueError(f"unknown split tags: {sorted(unknown)}")
    return {s: tags == s for s in ("train", "val", "test")}


def encode_labels(labels: Sequence, task: str) -> tuple[np.ndarray, list[str] | None]:
    if task == "regression":
        return np.asarray(labels, dtype=np.float64), None
    raw = [str(v) for v in labels]
    try:
        classes = sorted(set(raw), key=float)
    except ValueError:
        classes = sorted(set(raw))
    index = {c: i for i, c in enumerate(classes)}
    return np.array([index[c] for c in raw], dtype=np.int64), classes


def _fit(
    g: WeightedGraph,
    ctx: GraphContext,
    X: np.ndarray,
    y: np.ndarray,
    masks: dict[str, np.ndarray],
    cfg: TrainConfig,
    out_dim: int,
    graph_level: bool,
    groups: np.ndarray | None,
) -> TrainResult:
    Xt = Tensor(X)
    model = GnnModel(
        X.shape[1], cfg.hidden, out_dim, cfg.layers, cfg.aggregator, cfg.seed, graph_level
    )
    if cfg.task == "regression":
        # predict in target units from a standardized head
        y_train = y[masks["train"]]
        model.output_shift = float(y_train.mean())
        model.output_scale = float(y_train.std()) or 1.0
    family = FunctionFamily(
        cfg.n_functions, X.shape[1], rng_for(cfg.seed, "family"), (cfg.family_hidden,)
    )
    curv = LearnedCurvatureParams(
        g,
        X.shape[1],
        rng_for(cfg.seed, "kappa"),
        mode=cfg.kappa_mode,
        lam=cfg.lam,
        learn_weights=cfg.learn_weights,
        hidden=(cfg.family_hidden,),
    )
    params = model.named_parameters("gnn.")
    kappa_params = {}
    for name, p in curv.named_parameters("curv.").items():
        (params if name == "curv.log_weights" else kappa_params)[name] = p
    members = family.named_parameters("family.") if cfg.train_family else {}
    opt = Adam(params, lr=cfg.lr, weight_decay=cfg.weight_decay, no_decay=["curv.log_weights"])
    opt_kappa = Adam(kappa_params, lr=cfg.kappa_lr, betas=KAPPA_BETAS)
    opt_family = Adam(members, lr=cfg.lr)
    optimizers = (opt, opt_kappa, opt_family)
    operators = TapedOperators(g, cfg.expanded_form)
    task = cfg.task
    depths = None
    history = []
    for epoch in range(cfg.epochs):
        kappa_hat = curv.kappa_hat(Xt)
        if depths is None or epoch % cfg.depth_refresh == 0:
            if cfg.adaptive:
                depths = assign_depths(
                    kappa_hat.data, cfg.k, cfg.layers, cfg.schedule, groups, cfg.seed
                )
            else:
                depths = DepthAssignment(
                    np.full(g.n_vertices, cfg.layers), 100.0, cfg.layers, np.ones(g.n_vertices)
                )
        for o in optimizers:
            o.zero_grad()
        weights = curv.weights()
        if cfg.adaptive:
            out = forward_adaptive(model, ctx, Xt, depths, weights)
        else:
            out = forward_standard(model, ctx, Xt, weights)
        l_task = task_loss(out, y, task, masks["train"])
        l_curv = curvature_loss(g, family, curv, Xt, operators, kappa_hat)
        total = l_task + l_curv
        if not np.isfinite(total.item()):
            raise FloatingPointError(
                f"training diverged at epoch {epoch}: task={l_task.item()}, curv={l_curv.item()}"
            )
        ad.backward(total)
        reverse_gradients(members.values())
        for o in optimizers:
            o.step()
        history.append(
            {
                "epoch": epoch,
                "L_task": l_task.item(),
                "L_curv": l_curv.item(),
                "metric": metric(out.data, y, task, masks["train"]),
                "val_metric": metric(out.data, y, task, masks["val"]),
                "test_metric": metric(out.data, y, task, masks["test"]),
            }
        )

    _warn_degradation(history, task)
    kappa_final = curv.kappa_hat(Xt).data.copy()
    weights = Tensor(curv.realized_weights())
    if cfg.adaptive:
        out, H = forward_adaptive(model, ctx, Xt, depths, weights, return_hidden=True)
    else:
        out = forward_standard(model, ctx, Xt, weights)
        H = None
    result = TrainResult(model, curv, family, depths, history, out.data, None, kappa_final)
    result.hidden = H.data if H is not None else None
    result.masks = masks
    return result


def _warn_degradation(history: list[dict], task: str) -> None:
    m = np.array([h["metric"] for h in history])
    if task == "classification":
        best, worse = m.max(), m[-1] < m.max() - 0.05
    else:
        best, worse = m.min(), m[-1] > 1.5 * m.min() + 1e-12
    if worse:
        log.warning("final train metric %.4g is worse than the best seen (%.4g)", m[-1], best)


def train(
    g: WeightedGraph,
    features: np.ndarray,
    labels: Sequence,
    cfg: TrainConfig,
    splits: Sequence[str] | None = None,
) -> TrainResult:
    """Train on the vertices of one graph."""
    X = np.asarray(features, dtype=np.float64)
    if X.shape[0] != g.n_vertices:
        raise ValueError("features need one row per vertex")
    if len(labels) != g.n_vertices:
        raise ValueError("labels need one entry per vertex")
    y, classes = encode_labels(labels, cfg.task)
    masks = masks_from_tags(splits) if splits is not None else random_split(g.n_vertices, cfg)
    out_dim = len(classes) if classes is not None else 1
    result = _fit(g, GraphContext(g), X, y, masks, cfg, out_dim, False, None)
    result.classes = classes
    return result


def train_graphs(
    graphs: Sequence[WeightedGraph],
    features: Sequence[np.ndarray],
    labels: Sequence,
    cfg: TrainConfig,
    splits: Sequence[str] | None = None,
) -> TrainResult:
    """Train a graph-level model; graphs are batched as one disjoint union."""
    if len(graphs) != len(labels) or len(graphs) != len(features):
        raise ValueError("need one feature matrix and one label per graph")
    union, owner = disjoint_union(graphs)
    X = np.vstack([np.asarray(f, dtype=np.float64) for f in features])
    y, classes = encode_labels(labels, cfg.task)
    masks = masks_from_tags(splits) if splits is not None else random_split(len(graphs), cfg)
    out_dim = len(classes) if classes is not None else 1
    ctx = GraphContext(union, owner)
    result = _fit(union, ctx, X, y, masks, cfg, out_dim, True, owner)
    result.classes = classes
    return result
