"""Small synthetic graphs used by tests, sweeps and smoke runs."""

from __future__ import annotations

import numpy as np

from .graph import WeightedGraph


def complete_graph(n: int, w: float = 1.0) -> WeightedGraph:
    return WeightedGraph(n, [(i, j, w) for i in range(n) for j in range(i + 1, n)])


def path_graph(n: int, w: float = 1.0) -> WeightedGraph:
    return WeightedGraph(n, [(i, i + 1, w) for i in range(n - 1)])


def star_graph(leaves: int, w: float = 1.0) -> WeightedGraph:
    """Center 0 joined to vertices ``1 .. leaves``."""
    return WeightedGraph(leaves + 1, [(0, i, w) for i in range(1, leaves + 1)])


def cycle_graph(n: int, w: float = 1.0) -> WeightedGraph:
    return WeightedGraph(n, [(i, (i + 1) % n, w) for i in range(n)])


def random_graph(
    rng: np.random.Generator,
    n: int,
    p: float = 0.4,
    weight_range: tuple[float, float] = (0.5, 2.0),
    connected: bool = True,
    max_tries: int = 1000,
) -> WeightedGraph:
    """Erdos-Renyi graph with uniform weights, resampled until connected."""
    for _ in range(max_tries):
        mask = np.triu(rng.random((n, n)) < p, k=1)
        u, v = np.nonzero(mask)
        w = rng.uniform(*weight_range, size=len(u))
        g = WeightedGraph(n, zip(u.tolist(), v.tolist(), w.tolist()))
        if not connected or g.is_connected():
            return g
    raise RuntimeError(f"no connected G({n}, {p}) after {max_tries} draws")


def bounded_degree_graph(rng: np.random.Generator, n: int, degree: int) -> WeightedGraph:
    """Random graph where every vertex has degree close to ``degree`` (pairing model)."""
    stubs = np.repeat(np.arange(n), degree)
    rng.shuffle(stubs)
    edges = set()
    for a, b in zip(stubs[0::2], stubs[1::2]):
        if a != b:
            edges.add((min(a, b), max(a, b)))
    return WeightedGraph(n, [(int(a), int(b), 1.0) for a, b in sorted(edges)])


def sbm(
    rng: np.random.Generator,
    sizes=(100, 100),
    p_in: float = 0.1,
    p_out: float = 0.01,
    feature_dim: int = 8,
    signal: float = 1.0,
) -> tuple[WeightedGraph, np.ndarray, np.ndarray]:
    """Stochastic block model with Gaussian features centred on a block mean.

    Returns ``(graph, features, labels)``.
    """
    labels = np.repeat(np.arange(len(sizes)), sizes)
    n = len(labels)
    P = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    mask = np.triu(rng.random((n, n)) < P, k=1)
    u, v = np.nonzero(mask)
    g = WeightedGraph(n, [(a, b, 1.0) for a, b in zip(u.tolist(), v.tolist())])
    centres = rng.standard_normal((len(sizes), feature_dim))
    centres *= signal / np.linalg.norm(centres, axis=1, keepdims=True)
    X = centres[labels] + rng.standard_normal((n, feature_dim))
    return g, X, labels


def degree_features(g: WeightedGraph) -> np.ndarray:
    """``[1, degree / max_degree, log(1 + degree)]`` per vertex."""
    d = g.degrees.astype(np.float64)
    top = max(d.max(), 1.0)
    return np.column_stack([np.ones_like(d), d / top, np.log1p(d)])
