"""Independent Cascade and Linear Threshold influence simulation.

Monte Carlo runs are processed in fixed-size chunks. Each chunk draws from
its own Philox stream keyed by ``(seed, chunk index)``, so results do not
depend on how chunks are scheduled.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .graph import WeightedGraph

CHUNK = 2048


@dataclass
class InfluenceTarget:
    probabilities: np.ndarray
    model: str
    seeds: list[int]
    runs: int

    def __post_init__(self):
        p = self.probabilities
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("activation probabilities must lie in [0, 1]")


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), chunk]))


def ic_arc_probabilities(g: WeightedGraph, p: float | None = None) -> np.ndarray:
    """Activation probability per arc ``u -> v`` (aligned with ``g.arcs``).

    ``p=None`` selects the weighted cascade ``1 / deg(v)``.
    """
    src, dst, _ = g.arcs
    if p is None:
        return 1.0 / g.degrees[dst]
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return np.full(len(src), float(p))


def _check_seeds(g: WeightedGraph, seeds) -> np.ndarray:
    seeds = np.unique(np.asarray(list(seeds), dtype=np.int64))
    if len(seeds) == 0:
        raise ValueError("seed set must be nonempty")
    if seeds.min() < 0 or seeds.max() >= g.n_vertices:
        raise ValueError("seed vertex out of range")
    return seeds


def _run_chunks(n_runs: int, seed: int, chunk_fn, n: int, workers: int) -> np.ndarray:
    sizes = [min(CHUNK, n_runs - s) for s in range(0, n_runs, CHUNK)]
    jobs = list(enumerate(sizes))

    def job(item):
        idx, size = item
        return chunk_fn(_chunk_rng(seed, idx), size)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, jobs))
    else:
        parts = [job(item) for item in jobs]
    return np.sum(parts, axis=0) if parts else np.zeros(n)


def simulate_ic(
    g: WeightedGraph,
    seeds,
    p: float | None = None,
    runs: int = 10_000,
    seed: int = 0,
    workers: int = 1,
) -> InfluenceTarget:
    """Activation frequencies under Independent Cascade.

    Every newly active ``u`` makes one Bernoulli attempt on each inactive
    neighbor. Sampling all arc coins up front gives the same distribution,
    since each arc is tried at most once per run.
    """
    seeds = _check_seeds(g, seeds)
    if runs < 1:
        raise ValueError("runs must be at least 1")
    src, dst, _ = g.arcs
    prob = ic_arc_probabilities(g, p)
    n = g.n_vertices

    def chunk(rng, size):
        live = rng.random((size, len(src))) < prob
        active = np.zeros((size, n), dtype=bool)
        active[:, seeds] = True
        frontier = active.copy()
        while frontier.any():
            fired = frontier[:, src] & live
            reached = np.zeros((size, n), dtype=bool)
            rows, arcs = np.nonzero(fired)
            reached[rows, dst[arcs]] = True
            frontier = reached & ~active
            active |= frontier
        return active.sum(axis=0)

    counts = _run_chunks(runs, seed, chunk, n, workers)
    return InfluenceTarget(counts / runs, "ic", seeds.tolist(), runs)


def lt_in_weights(g: WeightedGraph) -> np.ndarray:
    """Dense ``W[u, v] = w(u,v) / sum_z w(z,v)``; columns of isolated vertices are 0."""
    W = g.weight_matrix()
    col = W.sum(axis=0)
    return np.divide(W, col, out=np.zeros_like(W), where=col > 0)


def simulate_lt(
    g: WeightedGraph, seeds, runs: int = 10_000, seed: int = 0, workers: int = 1
) -> InfluenceTarget:
    """Activation frequencies under Linear Threshold with uniform thresholds."""
    seeds = _check_seeds(g, seeds)
    if runs < 1:
        raise ValueError("runs must be at least 1")
    W = lt_in_weights(g)
    n = g.n_vertices

    def chunk(rng, size):
        theta = rng.random((size, n))
        active = np.zeros((size, n), dtype=bool)
        active[:, seeds] = True
        while True:
            mass = active.astype(np.float64) @ W
            new = (mass >= theta) & ~active
            if not new.any():
                return active.sum(axis=0)
            active |= new

    counts = _run_chunks(runs, seed, chunk, n, workers)
    return InfluenceTarget(counts / runs, "lt", seeds.tolist(), runs)


def make_influence_dataset(
    g: WeightedGraph,
    fraction: float = 0.10,
    model: str = "ic",
    runs: int = 10_000,
    seed: int = 0,
    p: float | None = None,
    workers: int = 1,
) -> tuple[list[int], InfluenceTarget]:
    """Uniform random seed set of ``round(fraction * |V|)`` vertices and its targets."""
    k = int(round(fraction * g.n_vertices))
    if k < 1:
        raise ValueError("fraction * |V| must be at least 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
    seeds = sorted(rng.choice(g.n_vertices, size=k, replace=False).tolist())
    if model == "ic":
        target = simulate_ic(g, seeds, p=p, runs=runs, seed=seed, workers=workers)
    elif model == "lt":
        target = simulate_lt(g, seeds, runs=runs, seed=seed, workers=workers)
    else:
        raise ValueError(f"unknown diffusion model {model!r}")
    return seeds, target


def exact_ic(g: WeightedGraph, seeds, p: float | None = None, max_vertices: int = 20) -> np.ndarray:
    """Exact IC activation probabilities by enumerating cascade rounds.

    The state after a round is ``(active, frontier)``; each inactive vertex
    next to the frontier activates independently with probability
    ``1 - prod(1 - p(u, v))`` over its frontier neighbors.
    """
    if g.n_vertices > max_vertices:
        raise ValueError(f"exact enumeration is limited to {max_vertices} vertices")
    seeds = _check_seeds(g, seeds)
    n = g.n_vertices
    src, dst, _ = g.arcs
    prob = ic_arc_probabilities(g, p)
    fail = {(int(u), int(v)): 1.0 - float(q) for u, v, q in zip(src, dst, prob)}
    nbrs = [[y for y, _ in g.neighbors(x)] for x in range(n)]

    @lru_cache(maxsize=None)
    def expected(active: int, frontier: int) -> tuple[float, ...]:
        if frontier == 0:
            return tuple(float(active >> v & 1) for v in range(n))
        cand = {}
        for u in range(n):
            if frontier >> u & 1:
                for v in nbrs[u]:
                    if not active >> v & 1:
                        cand[v] = cand.get(v, 1.0) * fail[(u, v)]
        verts = sorted(cand)
        total = np.zeros(n)
        for bits in product((0, 1), repeat=len(verts)):
            weight = 1.0
            new = 0
            for v, b in zip(verts, bits):
                q = 1.0 - cand[v]
                weight *= q if b else 1.0 - q
                if b:
                    new |= 1 << v
            if weight == 0.0:
                continue
            total += weight * np.array(expected(active | new, new))
        return tuple(total)

    start = 0
    for s in seeds:
        start |= 1 << int(s)
    return np.array(expected(start, start))


def exact_lt(g: WeightedGraph, seeds, max_configurations: int = 2_000_000) -> np.ndarray:
    """Exact LT probabilities via the live-edge view.

    With uniform thresholds, LT activation equals reachability from the
    seeds when every non-seed ``v`` keeps exactly one incoming arc, chosen
    with probability proportional to its weight.
    """
    seeds = _check_seeds(g, seeds)
    n = g.n_vertices
    seed_set = set(seeds.tolist())
    W = lt_in_weights(g)
    choices = []
    for v in range(n):
        if v in seed_set or g.degree(v) == 0:
            choices.append([(None, 1.0)])
        else:
            choices.append([(u, W[u, v]) for u, _ in g.neighbors(v)])
    total_cfg = int(np.prod([len(c) for c in choices], dtype=np.float64))
    if total_cfg > max_configurations:
        raise ValueError(f"{total_cfg} live-edge configurations exceed the enumeration limit")
    result = np.zeros(n)
    for cfg in product(*choices):
        weight = 1.0
        parent = {}
        for v, (u, q) in enumerate(cfg):
            weight *= q
            if u is not None:
                parent[v] = u
        for v in range(n):
            seen = set()
            x = v
            while x not in seed_set and x in parent and x not in seen:
                seen.add(x)
                x = parent[x]
            if x in seed_set:
                result[v] += weight
    return result
