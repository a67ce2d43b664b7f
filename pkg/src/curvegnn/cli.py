"""Command-line entry point.

Every command takes its options from flags and, optionally, from a flat
``key = value`` file given with ``--config``; flags win. Exit status is 0 on
success, 1 on invalid input and 2 on a numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import artifacts as art
from . import operators as ops
from .diffusion import make_influence_dataset, simulate_ic, simulate_lt
from .dynamics import heat_flow, mixing_bound, mixing_time, probe_functions, semigroup_gradient_check
from .exact import CurvatureError, exact_curvature_all
from .gnn import SCHEDULES, AGGREGATORS, assign_depths
from .graph import (
    WeightedGraph,
    load_features,
    load_graph,
    load_labels,
    save_graph,
    write_vertex_csv,
)
from .learn import CurvatureConfig, fit_curvature
from .datasets import degree_features
from .nn import save_parameters
from .training import TrainConfig, TrainResult, train, train_graphs

log = logging.getLogger("curvegnn")

ONE_HOT_MAX = 2000  # largest graph given one-hot default features in curvature learn

TASKS = {
    "node-class": ("classification", False),
    "node-reg": ("regression", False),
    "graph-class": ("classification", True),
    "graph-reg": ("regression", True),
}
SWEEP_KEYS = ("layers", "k", "n-functions", "lambda", "hidden", "epochs", "lr")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- converters


def _number(kind, test, message):
    def convert(text):
        try:
            value = kind(text)
        except (TypeError, ValueError):
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
        if not test(value):
            raise argparse.ArgumentTypeError(message)
        return value

    return convert


def threshold_k(text):
    return _number(float, lambda v: 0 < v <= 100, "k must lie in (0,100]")(text)


lam_value = _number(float, lambda v: v >= 0, "lambda must be >= 0")
n_functions_value = _number(int, lambda v: v >= 0, "n-functions must be >= 0")
pos_int = _number(int, lambda v: v >= 1, "expected a positive integer")
nonneg_int = _number(int, lambda v: v >= 0, "expected a non-negative integer")
pos_float = _number(float, lambda v: v > 0 and math.isfinite(v), "expected a positive number")
nonneg_float = _number(float, lambda v: v >= 0 and math.isfinite(v), "expected a number >= 0")
unit_open = _number(float, lambda v: 0 < v < 1, "expected a value in (0, 1)")
unit_half_open = _number(float, lambda v: 0 < v <= 1, "expected a value in (0, 1]")
val_fraction = _number(float, lambda v: 0 <= v < 1, "expected a value in [0, 1)")


def probability_or_wc(text):
    if str(text).strip().lower() in ("", "wc", "weighted-cascade"):
        return None
    return _number(float, lambda v: 0 <= v <= 1, "p must lie in [0, 1]")(text)


def boolean(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def choice(*options):
    def convert(text):
        if text not in options:
            raise argparse.ArgumentTypeError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return convert


# ---------------------------------------------------------------- option tables


@dataclass
class Opt:
    name: str
    type: Callable
    default: Any = None
    help: str = ""
    required: bool = False
    switch: bool = False

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


COMMON = [
    Opt("config", str, None, "key = value file; flags override its entries"),
    Opt("workers", pos_int, None, "worker threads (default: $CURVEGNN_WORKERS or 1)"),
    Opt("verbose", boolean, False, "log progress", switch=True),
]

_TD = {f.name: f.default for f in fields(TrainConfig)}
EXPANDED = Opt(
    "gamma2-expanded-form", boolean, False, "use the expanded gamma2 form (halved cross term)", switch=True
)

TRAIN_OPTS = [
    Opt("task", choice(*TASKS), "node-class", "node-class | node-reg | graph-class | graph-reg"),
    Opt("graph", str, None, "edge list (node tasks) or directory of *.edges files", required=True),
    Opt("features", str, None, "feature CSV (node tasks) or directory of <graph>.csv"),
    Opt("labels", str, None, "label CSV: vertex (or graph), label[, split]", required=True),
    Opt("out", str, None, "output directory", required=True),
    Opt("epochs", pos_int, _TD["epochs"]),
    Opt("lr", pos_float, _TD["lr"]),
    Opt("kappa-lr", pos_float, _TD["kappa_lr"], "learning rate of the curvature estimates"),
    Opt("seed", nonneg_int, _TD["seed"]),
    Opt("k", threshold_k, _TD["k"], "depth threshold percentage"),
    Opt("n-functions", n_functions_value, _TD["n_functions"], "function family size N"),
    Opt("lambda", lam_value, _TD["lam"], "curvature reward weight"),
    Opt("layers", pos_int, _TD["layers"], "message-passing layers L"),
    Opt("hidden", pos_int, _TD["hidden"]),
    Opt("aggregator", choice(*AGGREGATORS), _TD["aggregator"]),
    Opt("weight-decay", nonneg_float, _TD["weight_decay"]),
    Opt("dt", pos_float, _TD["dt"], "heat-step scale (reporting only)"),
    Opt("depth-refresh", pos_int, _TD["depth_refresh"], "epochs between depth recomputations"),
    Opt("schedule", choice(*SCHEDULES), _TD["schedule"], "threshold schedule"),
    Opt("family-hidden", pos_int, _TD["family_hidden"]),
    Opt("kappa-mode", choice("auto", "transductive", "inductive"), "auto",
        "auto: transductive for node tasks, inductive for graph tasks"),
    Opt("train-family", boolean, _TD["train_family"], switch=True),
    Opt("learn-weights", boolean, _TD["learn_weights"], switch=True),
    EXPANDED,
    Opt("adaptive", boolean, _TD["adaptive"], "depth-adaptive forward pass", switch=True),
    Opt("train-fraction", unit_open, _TD["train_fraction"]),
    Opt("val-fraction", val_fraction, _TD["val_fraction"]),
    Opt("sweep", str, None, f"KEY=V1,V2,... over one of {', '.join(SWEEP_KEYS)}"),
    Opt("embedding", boolean, False, "write 2-D PCA coordinates of final states", switch=True),
]

COMMANDS: dict[str, tuple[list[Opt], str]] = {
    "curvature exact": (
        [
            Opt("graph", str, None, "edge list", required=True),
            Opt("out", str, None, "output CSV", required=True),
            EXPANDED,
        ],
        "exact per-vertex curvature",
    ),
    "curvature learn": (
        [
            Opt("graph", str, None, "edge list", required=True),
            Opt("features", str, None, "feature CSV (default: one-hot if transductive, else degree)"),
            Opt("out", str, None, "output CSV", required=True),
            Opt("n-functions", n_functions_value, 3, "function family size N"),
            Opt("lambda", lam_value, 1.0),
            Opt("epochs", pos_int, 2000),
            Opt("lr", pos_float, 0.01),
            Opt("seed", nonneg_int, 0),
            Opt("mode", choice("transductive", "inductive"), "transductive"),
            Opt("family-hidden", pos_int, 16),
            Opt("train-family", boolean, True, switch=True),
            Opt("learn-weights", boolean, False, switch=True),
            EXPANDED,
        ],
        "learned curvature upper bound",
    ),
    "depth-assign": (
        [
            Opt("kappa", str, None, "CSV with vertex and kappa columns", required=True),
            Opt("k", threshold_k, None, "threshold percentage", required=True),
            Opt("max-depth", pos_int, None, "depth cap L"),
            Opt("schedule", choice(*SCHEDULES), "fixed"),
            Opt("seed", nonneg_int, 0, "seed for random schedules"),
            Opt("out", str, None, "output CSV", required=True),
        ],
        "stopping depths from curvature ranks",
    ),
    "train": (TRAIN_OPTS, "train a depth-adaptive GNN with learned curvature"),
    "heatflow": (
        [
            Opt("graph", str, None, "edge list", required=True),
            Opt("f0", str, None, "CSV vertex,value (default: seeded random function)"),
            Opt("t-max", pos_float, 5.0),
            Opt("steps", pos_int, 50, "grid intervals on [0, t-max]"),
            Opt("euler", boolean, False, "explicit Euler steps instead of eigh", switch=True),
            Opt("dt", pos_float, 0.01, "Euler step"),
            Opt("check", boolean, True, "gradient decay check against exact kappa_min", switch=True),
            Opt("seed", nonneg_int, 0),
            Opt("out", str, None, "output directory", required=True),
        ],
        "heat semigroup evolution",
    ),
    "mixing": (
        [
            Opt("graph", str, None, "edge list", required=True),
            Opt("vertex", str, None, "vertex name (default: all vertices)"),
            Opt("eps", unit_half_open, 0.01),
            Opt("t-max", pos_float, 10.0),
            Opt("steps", pos_int, 2000, "grid intervals on [0, t-max]"),
            Opt("probes", nonneg_int, 32, "random probe functions"),
            Opt("seed", nonneg_int, 0),
            Opt("out", str, None, "output directory", required=True),
        ],
        "empirical local mixing times next to the curvature bounds",
    ),
    "diffusion simulate": (
        [
            Opt("graph", str, None, "edge list", required=True),
            Opt("model", choice("ic", "lt"), "ic"),
            Opt("seeds", str, None, "comma-separated seed vertices"),
            Opt("fraction", unit_half_open, 0.10, "random seed fraction when --seeds is absent"),
            Opt("runs", pos_int, 10_000),
            Opt("p", probability_or_wc, None, "IC arc probability (default: weighted cascade)"),
            Opt("seed", nonneg_int, 0),
            Opt("out", str, None, "output directory", required=True),
        ],
        "Monte Carlo influence probabilities",
    ),
    "report": (
        [Opt("run", str, None, "run directory written by train", required=True)],
        "merge a run's outputs into summary.json and sweep.csv",
    ),
    "ops eval": (
        [
            Opt("graph", str, None, "edge list", required=True),
            Opt("function", str, None, "CSV vertex,f1[,f2...]", required=True),
            Opt("out", str, None, "output CSV", required=True),
            EXPANDED,
        ],
        "laplacian, gamma and gamma2 fields of vertex functions",
    ),
}


def _add_options(parser: argparse.ArgumentParser, opts: Sequence[Opt]) -> None:
    for o in opts:
        flag = f"--{o.name}"
        if o.switch:
            parser.add_argument(flag, dest=o.dest, action=argparse.BooleanOptionalAction, help=o.help)
        else:
            parser.add_argument(flag, dest=o.dest, type=o.type, help=o.help, metavar=o.name.upper())


def build_parser() -> Parser:
    parser = Parser(prog="curvegnn", description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=Parser)
    nested: dict[str, argparse._SubParsersAction] = {}
    for name, (opts, help_text) in COMMANDS.items():
        words = name.split()
        if len(words) == 1:
            sub = groups.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)
        else:
            head, tail = words
            if head not in nested:
                p = groups.add_parser(head, help=f"{head} commands")
                nested[head] = p.add_subparsers(
                    dest="subcommand", metavar="SUBCOMMAND", parser_class=Parser
                )
            sub = nested[head].add_parser(tail, help=help_text, argument_default=argparse.SUPPRESS)
        sub.set_defaults(command_name=name)
        _add_options(sub, COMMON + opts)
    return parser


def read_config(path, opts: Sequence[Opt]) -> dict[str, Any]:
    """Parse a flat ``key = value`` file against an option table."""
    table = {o.name: o for o in opts if o.name != "config"}
    values: dict[str, Any] = {}
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("_", "-")
        if key == "gamma2-expanded" or key == "expanded-form":
            key = "gamma2-expanded-form"
        if key not in table:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise UsageError(f"{path}:{lineno}: key {key!r} repeated (first on line {seen[key]})")
        seen[key] = lineno
        try:
            values[table[key].dest] = table[key].type(value)
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"{path}:{lineno}: {key}: {exc}") from None
    return values


def resolve(name: str, given: dict[str, Any]) -> dict[str, Any]:
    """Defaults, then config file entries, then flags."""
    opts = COMMON + COMMANDS[name][0]
    values = {o.dest: o.default for o in opts}
    if given.get("config"):
        values.update(read_config(given["config"], opts))
    values.update(given)
    missing = [f"--{o.name}" for o in opts if o.required and values.get(o.dest) is None]
    if missing:
        raise UsageError(f"{name}: missing required option(s) {', '.join(missing)}")
    if values.get("workers") is None:
        try:
            values["workers"] = art.workers_default()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return values


# ---------------------------------------------------------------- helpers


def _vertex_names(g: WeightedGraph) -> list[str]:
    return g.names if g.names is not None else [str(i) for i in range(g.n_vertices)]


def _vertex_id(g: WeightedGraph, name: str) -> int:
    names = _vertex_names(g)
    try:
        return names.index(str(name).strip())
    except ValueError:
        raise ValueError(f"unknown vertex {name!r}") from None


def _config_echo(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k not in ("verbose",)}


def _out_file(path) -> Path:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _manifest_for_file(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


# ---------------------------------------------------------------- commands


def cmd_curvature_exact(cfg, argv):
    g = load_graph(cfg["graph"])
    est = exact_curvature_all(g, workers=cfg["workers"], expanded_form=cfg["gamma2_expanded_form"])
    out = _out_file(cfg["out"])
    write_vertex_csv(out, g, {"kappa": est.values, "provenance": [est.provenance] * g.n_vertices})
    art.write_manifest(_manifest_for_file(out), "curvature exact", argv, _config_echo(cfg), [cfg["graph"]])
    n_flag = int(np.sum(est.flagged))
    if n_flag:
        log.warning("%d vertices have curvature -inf", n_flag)
    return 0


def _features_or_default(path, g: WeightedGraph) -> np.ndarray:
    return load_features(path, g) if path else degree_features(g)


def cmd_curvature_learn(cfg, argv):
    g = load_graph(cfg["graph"])
    isolated = np.flatnonzero(g.degrees == 0)
    if len(isolated):
        names = _vertex_names(g)
        raise CurvatureError(
            f"isolated vertices have no curvature: {[names[i] for i in isolated[:10]]}",
            isolated.tolist(),
        )
    if cfg["features"] is None and cfg["mode"] == "transductive" and g.n_vertices <= ONE_HOT_MAX:
        # one-hot inputs let each member take independent values at every vertex
        X = np.eye(g.n_vertices)
    else:
        X = _features_or_default(cfg["features"], g)
    config = CurvatureConfig(
        n_functions=cfg["n_functions"],
        lam=cfg["lambda"],
        epochs=cfg["epochs"],
        lr=cfg["lr"],
        seed=cfg["seed"],
        hidden=(cfg["family_hidden"],),
        mode=cfg["mode"],
        train_family=cfg["train_family"],
        learn_weights=cfg["learn_weights"],
        expanded_form=cfg["gamma2_expanded_form"],
    )
    fit = fit_curvature(g, X, config)
    out = _out_file(cfg["out"])
    write_vertex_csv(out, g, {"kappa_hat": fit.estimate.values})
    weights_path = out.with_name(out.stem + ".weights.edges")
    save_graph(g.with_weights(fit.params.realized_weights()), weights_path)
    art.write_manifest(
        _manifest_for_file(out),
        "curvature learn",
        argv,
        {**_config_echo(cfg), "weights_out": str(weights_path)},
        [cfg["graph"], cfg["features"]],
    )
    return 0


def cmd_depth_assign(cfg, argv):
    names, kappa = art.read_kappa_csv(cfg["kappa"])
    d = assign_depths(kappa, cfg["k"], cfg["max_depth"], cfg["schedule"], seed=cfg["seed"])
    out = _out_file(cfg["out"])
    art.write_rows(out, ["vertex", "kappa", "T"], zip(names, kappa.tolist(), d.T.tolist()))
    art.write_manifest(_manifest_for_file(out), "depth-assign", argv, _config_echo(cfg), [cfg["kappa"]])
    return 0


def _train_config(cfg, graph_level: bool) -> TrainConfig:
    task, _ = TASKS[cfg["task"]]
    mode = cfg["kappa_mode"]
    if mode == "auto":
        mode = "inductive" if graph_level else "transductive"
    return TrainConfig(
        task=task,
        epochs=cfg["epochs"],
        lr=cfg["lr"],
        kappa_lr=cfg["kappa_lr"],
        seed=cfg["seed"],
        k=cfg["k"],
        n_functions=cfg["n_functions"],
        lam=cfg["lambda"],
        layers=cfg["layers"],
        hidden=cfg["hidden"],
        aggregator=cfg["aggregator"],
        weight_decay=cfg["weight_decay"],
        dt=cfg["dt"],
        depth_refresh=cfg["depth_refresh"],
        schedule=cfg["schedule"],
        family_hidden=cfg["family_hidden"],
        kappa_mode=mode,
        train_family=cfg["train_family"],
        learn_weights=cfg["learn_weights"],
        expanded_form=cfg["gamma2_expanded_form"],
        adaptive=cfg["adaptive"],
        train_fraction=cfg["train_fraction"],
        val_fraction=cfg["val_fraction"],
    )


def _node_data(cfg):
    g = load_graph(cfg["graph"])
    X = _features_or_default(cfg["features"], g)
    labels, splits = load_labels(cfg["labels"], g)
    names = _vertex_names(g)
    missing = [names[i] for i in range(g.n_vertices) if i not in labels]
    if missing:
        raise ValueError(f"{cfg['labels']}: no label for {len(missing)} vertices (first: {missing[0]!r})")
    y = [labels[i] for i in range(g.n_vertices)]
    tags = None
    if splits:
        unsplit = [names[i] for i in range(g.n_vertices) if i not in splits]
        if unsplit:
            raise ValueError(f"{cfg['labels']}: split column missing for vertex {unsplit[0]!r}")
        tags = [splits[i] for i in range(g.n_vertices)]
    if TASKS[cfg["task"]][0] == "regression":
        y = _floats(y, cfg["labels"])
    return g, X, y, tags


def _floats(values, source) -> list[float]:
    try:
        out = [float(v) for v in values]
    except ValueError as exc:
        raise ValueError(f"{source}: regression labels must be numbers ({exc})") from None
    if not all(math.isfinite(v) for v in out):
        raise ValueError(f"{source}: regression labels must be finite")
    return out


def _graph_data(cfg):
    root = Path(cfg["graph"])
    if not root.is_dir():
        raise ValueError(f"{root}: graph-level tasks expect a directory of *.edges files")
    files = sorted(root.glob("*.edges"))
    if not files:
        raise ValueError(f"{root}: no *.edges files")
    graphs = {f.stem: load_graph(f) for f in files}
    header, rows = art.read_rows(cfg["labels"])
    split_col = header.index("split") if "split" in header else None
    label_col = next(i for i in range(1, len(header)) if i != split_col)
    table = {}
    for row in rows:
        if row[0] not in graphs:
            raise ValueError(f"{cfg['labels']}: unknown graph {row[0]!r}")
        table[row[0]] = row
    order = [name for name in graphs if name in table]
    if not order:
        raise ValueError(f"{cfg['labels']}: no labelled graphs")
    feats = []
    for name in order:
        g = graphs[name]
        if cfg["features"]:
            path = Path(cfg["features"]) / f"{name}.csv"
            if not path.is_file():
                raise ValueError(f"{path}: missing features for graph {name!r}")
            feats.append(load_features(path, g))
        else:
            feats.append(degree_features(g))
    widths = {f.shape[1] for f in feats}
    if len(widths) != 1:
        raise ValueError(f"feature widths differ across graphs: {sorted(widths)}")
    y = [table[n][label_col] for n in order]
    if TASKS[cfg["task"]][0] == "regression":
        y = _floats(y, cfg["labels"])
    tags = [table[n][split_col] for n in order] if split_col is not None else None
    return order, [graphs[n] for n in order], feats, y, tags


def _write_run(out: Path, result: TrainResult, cfg, vertex_labels, graph_for_weights, pred_names, y):
    art.write_rows(
        out / "history.csv",
        ["epoch", "L_task", "L_curv", "metric", "val_metric", "test_metric"],
        ([h["epoch"], h["L_task"], h["L_curv"], h["metric"], h["val_metric"], h["test_metric"]]
         for h in result.history),
    )
    art.write_rows(
        out / "depths.csv",
        ["vertex", "kappa_hat", "T"],
        zip(vertex_labels, result.kappa.tolist(), result.depths.T.tolist()),
    )
    save_parameters(out / "checkpoint.json", result.parameters())
    if graph_for_weights is not None:
        save_graph(graph_for_weights.with_weights(result.curvature.realized_weights()), out / "learned_weights.edges")
    split = np.full(len(pred_names), "", dtype=object)
    for s, m in result.masks.items():
        split[m] = s
    if result.classes is not None:
        pred = [result.classes[i] for i in result.outputs.argmax(axis=1)]
    else:
        pred = result.outputs[:, 0].tolist()
    art.write_rows(out / "predictions.csv", ["id", "split", "label", "prediction"], zip(pred_names, split, y, pred))
    if cfg["embedding"] and result.hidden is not None:
        Z = art.pca_2d(result.hidden)
        art.write_rows(out / "embedding.csv", ["vertex", "x", "y"], zip(vertex_labels, Z[:, 0], Z[:, 1]))


def _train_once(cfg, out: Path, data, graph_level: bool) -> TrainResult:
    tcfg = _train_config(cfg, graph_level)
    if graph_level:
        order, graphs, feats, y, tags = data
        result = train_graphs(graphs, feats, y, tcfg, tags)
        vertex_labels = [f"{name}:{v}" for name, g in zip(order, graphs) for v in _vertex_names(g)]
        _write_run(out, result, cfg, vertex_labels, None, order, y)
    else:
        g, X, y, tags = data
        result = train(g, X, y, tcfg, tags)
        names = _vertex_names(g)
        _write_run(out, result, cfg, names, g, names, y)
    last = result.history[-1]
    log.info("%s: final metric %.4f (val %.4f, test %.4f)", out, last["metric"], last["val_metric"], last["test_metric"])
    return result


def _parse_sweep(text: str):
    if "=" not in text:
        raise UsageError(f"--sweep expects KEY=V1,V2,..., got {text!r}")
    key, raw = (s.strip() for s in text.split("=", 1))
    key = key.lower().replace("_", "-")
    if key not in SWEEP_KEYS:
        raise UsageError(f"--sweep key must be one of {', '.join(SWEEP_KEYS)}, got {key!r}")
    opt = next(o for o in TRAIN_OPTS if o.name == key)
    try:
        values = [opt.type(v.strip()) for v in raw.split(",") if v.strip()]
    except (argparse.ArgumentTypeError, ValueError) as exc:
        raise UsageError(f"--sweep {key}: {exc}") from None
    if not values:
        raise UsageError("--sweep needs at least one value")
    return opt, values


def cmd_train(cfg, argv):
    graph_level = TASKS[cfg["task"]][1]
    data = _graph_data(cfg) if graph_level else _node_data(cfg)
    out = _out_dir(cfg["out"])
    inputs = [cfg["graph"], cfg["features"], cfg["labels"], cfg["config"]]
    if cfg["sweep"]:
        opt, values = _parse_sweep(cfg["sweep"])
        runs = []
        for v in values:
            sub = f"{opt.name}-{art.fmt(v)}"
            _train_once({**cfg, opt.dest: v}, _out_dir(out / sub), data, graph_level)
            runs.append({"value": v, "dir": sub})
        art.write_json(out / art.SWEEP_INDEX, {"key": opt.name, "runs": runs})
    else:
        _train_once(cfg, out, data, graph_level)
    art.write_manifest(out / "manifest.json", "train", argv, _config_echo(cfg), inputs)
    return 0


def _time_grid(cfg) -> np.ndarray:
    return np.linspace(0.0, cfg["t_max"], cfg["steps"] + 1)


def cmd_heatflow(cfg, argv):
    g = load_graph(cfg["graph"])
    if cfg["f0"]:
        F = load_features(cfg["f0"], g)
        if F.shape[1] != 1:
            raise ValueError(f"{cfg['f0']}: expected a single value column")
        f0 = F[:, 0]
    else:
        f0 = np.random.default_rng(cfg["seed"]).standard_normal(g.n_vertices)
    times = _time_grid(cfg)
    flow = heat_flow(g, f0, times, euler_dt=cfg["dt"] if cfg["euler"] else None)
    out = _out_dir(cfg["out"])
    write_vertex_csv(out / "values.csv", g, {"value": flow.values[-1]})
    peak = flow.gamma.max(axis=1)
    summary = {
        "method": "euler" if cfg["euler"] else "eigh",
        "t_max": cfg["t_max"],
        "max_gamma_initial": peak[0],
        "max_gamma_final": peak[-1],
        "monotone_decay": bool(np.all(np.diff(peak) <= 1e-12 * max(peak[0], 1e-300))),
    }
    columns = [times, peak]
    header = ["t", "max_gamma"]
    if cfg["check"]:
        if np.any(g.degrees == 0):
            summary["check"] = "skipped: isolated vertices have no curvature"
        else:
            kappa_min = float(exact_curvature_all(g, workers=cfg["workers"]).values.min())
            check = semigroup_gradient_check(g, kappa_min, f0, times)
            summary.update(kappa_min=kappa_min, check="pass" if check.ok else "fail")
            summary["worst_margin"] = float(check.margin.min())
            columns.append(check.rhs)
            header.append("bound")
    art.write_rows(out / "trajectory.csv", header, zip(*columns))
    art.write_json(out / "summary.json", summary)
    art.write_manifest(out / "manifest.json", "heatflow", argv, _config_echo(cfg), [cfg["graph"], cfg["f0"]])
    return 0


def cmd_mixing(cfg, argv):
    g = load_graph(cfg["graph"])
    kappa = exact_curvature_all(g, workers=cfg["workers"]).values
    kappa_min = float(kappa.min())
    vertices = [_vertex_id(g, cfg["vertex"])] if cfg["vertex"] is not None else range(g.n_vertices)
    times = _time_grid(cfg)
    rows = []
    for x in vertices:
        probes = probe_functions(g, x, cfg["probes"], cfg["seed"])
        rep = mixing_time(g, x, cfg["eps"], float(kappa[x]), times, probes)
        rows.append([x, float(kappa[x]), rep.empirical, rep.bound, mixing_bound(cfg["eps"], kappa_min)])
    out = _out_dir(cfg["out"])
    names = _vertex_names(g)
    art.write_rows(
        out / "mixing.csv",
        ["vertex", "kappa", "tau", "bound_local", "bound_global"],
        ([names[r[0]], *r[1:]] for r in rows),
    )
    tau = np.array([r[2] for r in rows])
    local = np.array([r[3] for r in rows])
    glob = np.array([r[4] for r in rows])
    summary = {
        "eps": cfg["eps"],
        "kappa_min": kappa_min,
        "grid_step": cfg["t_max"] / cfg["steps"],
        "vertices": len(rows),
        "within_global_bound": int(np.sum(tau <= glob)),
        "within_local_bound": int(np.sum(tau <= local)),
        "global_check": "pass" if np.all(tau <= glob) else "fail",
        "unresolved_on_grid": int(np.sum(np.isinf(tau))),
    }
    art.write_json(out / "summary.json", summary)
    art.write_manifest(out / "manifest.json", "mixing", argv, _config_echo(cfg), [cfg["graph"]])
    return 0


def cmd_diffusion_simulate(cfg, argv):
    g = load_graph(cfg["graph"])
    if cfg["model"] == "lt" and cfg["p"] is not None:
        raise ValueError("--p applies to the ic model only")
    if cfg["seeds"]:
        seeds = sorted({_vertex_id(g, s) for s in cfg["seeds"].split(",") if s.strip()})
        if cfg["model"] == "ic":
            target = simulate_ic(g, seeds, cfg["p"], cfg["runs"], cfg["seed"], cfg["workers"])
        else:
            target = simulate_lt(g, seeds, cfg["runs"], cfg["seed"], cfg["workers"])
    else:
        seeds, target = make_influence_dataset(
            g, cfg["fraction"], cfg["model"], cfg["runs"], cfg["seed"], cfg["p"], cfg["workers"]
        )
    out = _out_dir(cfg["out"])
    prob = target.probabilities
    is_seed = np.zeros(g.n_vertices, dtype=np.int64)
    is_seed[seeds] = 1
    write_vertex_csv(out / "probabilities.csv", g, {"value": prob, "seed": is_seed})
    names = _vertex_names(g)
    art.write_json(
        out / "summary.json",
        {
            "model": target.model,
            "seeds": [names[s] for s in seeds],
            "runs": target.runs,
            "expected_spread": float(prob.sum()),
            "max_standard_error": float(np.sqrt(np.max(prob * (1 - prob)) / target.runs)),
        },
    )
    art.write_manifest(out / "manifest.json", "diffusion simulate", argv, _config_echo(cfg), [cfg["graph"]])
    return 0


def cmd_report(cfg, argv):
    run = Path(cfg["run"])
    art.report(run)
    art.write_manifest(run / "report.manifest.json", "report", argv, _config_echo(cfg), [])
    return 0


def cmd_ops_eval(cfg, argv):
    g = load_graph(cfg["graph"])
    header, _ = art.read_rows(cfg["function"])
    F = load_features(cfg["function"], g)
    expanded = cfg["gamma2_expanded_form"]
    lap = ops.laplacian(g, F)
    gam = ops.gamma(g, F)
    gam2 = ops.gamma2(g, F, expanded_form=expanded)
    columns = {}
    names = header[1:]
    for j, name in enumerate(names):
        prefix = "" if len(names) == 1 else f"{name}."
        columns[f"{prefix}laplacian"] = lap[:, j]
        columns[f"{prefix}gamma"] = gam[:, j]
        columns[f"{prefix}gamma2"] = gam2[:, j]
    out = _out_file(cfg["out"])
    write_vertex_csv(out, g, columns)
    art.write_manifest(_manifest_for_file(out), "ops eval", argv, _config_echo(cfg), [cfg["graph"], cfg["function"]])
    return 0


HANDLERS = {
    "curvature exact": cmd_curvature_exact,
    "curvature learn": cmd_curvature_learn,
    "depth-assign": cmd_depth_assign,
    "train": cmd_train,
    "heatflow": cmd_heatflow,
    "mixing": cmd_mixing,
    "diffusion simulate": cmd_diffusion_simulate,
    "report": cmd_report,
    "ops eval": cmd_ops_eval,
}


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        given = vars(ns)
        name = given.pop("command_name", None)
        if name is None:
            if given.get("command"):
                raise UsageError(f"{given['command']}: a subcommand is required")
            parser.print_help(sys.stderr)
            return 1
        given.pop("command", None)
        given.pop("subcommand", None)
        cfg = resolve(name, given)
        if cfg["verbose"]:
            logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
        return HANDLERS[name](cfg, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except art.MissingInputs as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1


def main() -> int:
    return run()
