"""Weighted undirected graphs, edge-list ingestion and CSV vertex data."""

from __future__ import annotations

import csv
import os
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Raised for malformed graph, feature or label files."""


class WeightedGraph:
    """Immutable undirected graph with strictly positive edge weights.

    Vertices are the dense ids ``0 .. n_vertices - 1``. ``names`` keeps the
    original labels when the graph came from a file.
    """

    def __init__(
        self,
        n_vertices: int,
        edges: Iterable[tuple[int, int, float]] = (),
        names: Sequence[str] | None = None,
    ):
        if n_vertices < 0:
            raise ValueError("n_vertices must be non-negative")
        adjacency: list[dict[int, float]] = [dict() for _ in range(n_vertices)]
        for u, v, w in edges:
            u, v, w = int(u), int(v), float(w)
            if not (0 <= u < n_vertices and 0 <= v < n_vertices):
                raise ValueError(f"edge ({u}, {v}) out of range for {n_vertices} vertices")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not np.isfinite(w) or w <= 0:
                raise ValueError(f"edge ({u}, {v}) has non-positive weight {w}")
            if v in adjacency[u]:
                raise ValueError(f"duplicate edge ({u}, {v})")
            adjacency[u][v] = w
            adjacency[v][u] = w
        self.n_vertices = n_vertices
        self._adj = tuple(tuple(sorted(a.items())) for a in adjacency)
        if names is not None:
            if len(names) != n_vertices:
                raise ValueError("names must have one entry per vertex")
            names = tuple(str(s) for s in names)
        self.names = names

    def __repr__(self) -> str:
        return f"WeightedGraph(n_vertices={self.n_vertices}, n_edges={self.n_edges})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return self.n_vertices == other.n_vertices and self._adj == other._adj

    def __hash__(self) -> int:
        return hash((self.n_vertices, self._adj))

    @property
    def adjacency(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        return self._adj

    def neighbors(self, x: int) -> list[tuple[int, float]]:
        """Neighbors of ``x`` as ``(id, weight)`` pairs in ascending id order."""
        self._check_vertex(x)
        return list(self._adj[x])

    def degree(self, x: int) -> int:
        self._check_vertex(x)
        return len(self._adj[x])

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.array([len(a) for a in self._adj], dtype=np.int64)
        d.setflags(write=False)
        return d

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n_vertices else 0

    @cached_property
    def edges(self) -> np.ndarray:
        """Undirected edges as an ``(E, 2)`` int array with ``u < v``, sorted."""
        e = [(u, v) for u in range(self.n_vertices) for v, _ in self._adj[u] if u < v]
        arr = np.array(e, dtype=np.int64).reshape(-1, 2)
        arr.setflags(write=False)
        return arr

    @cached_property
    def weights(self) -> np.ndarray:
        """Weights aligned with :attr:`edges`."""
        w = [w for u in range(self.n_vertices) for v, w in self._adj[u] if u < v]
        arr = np.array(w, dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def arcs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Both orientations of every edge: ``(src, dst, edge_id)``.

        Arcs are sorted by ``src`` then ``dst`` so per-vertex reductions run
        in the canonical neighbor order.
        """
        e = self.edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        eid = np.concatenate([np.arange(len(e)), np.arange(len(e))])
        order = np.lexsort((dst, src))
        out = (src[order], dst[order], eid[order])
        for a in out:
            a.setflags(write=False)
        return out

    @cached_property
    def arc_matrix(self) -> sp.csr_matrix:
        """``(n, 2E)`` sparse matrix summing weighted arc values into their source."""
        src, dst, eid = self.arcs
        m = len(src)
        return sp.csr_matrix(
            (self.weights[eid], (src, np.arange(m))), shape=(self.n_vertices, m)
        )

    def weight_matrix(self) -> np.ndarray:
        """Dense symmetric weight matrix."""
        W = np.zeros((self.n_vertices, self.n_vertices))
        e = self.edges
        W[e[:, 0], e[:, 1]] = self.weights
        W[e[:, 1], e[:, 0]] = self.weights
        return W

    def with_weights(self, weights: np.ndarray) -> "WeightedGraph":
        """Same topology with ``weights`` aligned to :attr:`edges`."""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (self.n_edges,):
            raise ValueError("weights must align with the edge list")
        e = self.edges
        return WeightedGraph(
            self.n_vertices,
            ((int(u), int(v), float(w)) for (u, v), w in zip(e, weights)),
            names=self.names,
        )

    def scaled(self, c: float) -> "WeightedGraph":
        return self.with_weights(self.weights * c)

    def relabel(self, perm: Sequence[int]) -> "WeightedGraph":
        """Graph where old vertex ``i`` becomes ``perm[i]``."""
        perm = list(perm)
        if sorted(perm) != list(range(self.n_vertices)):
            raise ValueError("perm must be a permutation of the vertex ids")
        e = self.edges
        return WeightedGraph(
            self.n_vertices,
            ((perm[u], perm[v], w) for (u, v), w in zip(e.tolist(), self.weights.tolist())),
        )

    def two_ball(self, x: int) -> list[int]:
        """``x``, then its neighbors ascending, then the 2-sphere ascending."""
        self._check_vertex(x)
        first = [y for y, _ in self._adj[x]]
        seen = {x, *first}
        sphere = {z for y in first for z, _ in self._adj[y] if z not in seen}
        return [x, *first, *sorted(sphere)]

    def subgraph(self, vertices: Sequence[int]) -> "WeightedGraph":
        """Induced subgraph; vertex ``vertices[i]`` becomes ``i``."""
        index = {v: i for i, v in enumerate(vertices)}
        edges = [
            (index[u], index[v], w)
            for u in vertices
            for v, w in self._adj[u]
            if v in index and u < v
        ]
        return WeightedGraph(len(vertices), edges)

    def components(self) -> np.ndarray:
        """Connected-component label per vertex."""
        label = -np.ones(self.n_vertices, dtype=np.int64)
        c = 0
        for s in range(self.n_vertices):
            if label[s] >= 0:
                continue
            stack = [s]
            label[s] = c
            while stack:
                u = stack.pop()
                for v, _ in self._adj[u]:
                    if label[v] < 0:
                        label[v] = c
                        stack.append(v)
            c += 1
        return label

    def is_connected(self) -> bool:
        return self.n_vertices > 0 and int(self.components().max()) == 0

    def _check_vertex(self, x: int) -> None:
        if not 0 <= x < self.n_vertices:
            raise IndexError(f"vertex {x} out of range [0, {self.n_vertices})")


def disjoint_union(graphs: Sequence[WeightedGraph]) -> tuple[WeightedGraph, np.ndarray]:
    """Block-diagonal union and the graph index of every vertex."""
    edges = []
    owner = []
    offset = 0
    for i, g in enumerate(graphs):
        for (u, v), w in zip(g.edges.tolist(), g.weights.tolist()):
            edges.append((u + offset, v + offset, w))
        owner.extend([i] * g.n_vertices)
        offset += g.n_vertices
    return WeightedGraph(offset, edges), np.array(owner, dtype=np.int64)


def _compact_ids(tokens: list[str]) -> list[str]:
    unique = list(dict.fromkeys(tokens))
    try:
        return sorted(unique, key=int)
    except ValueError:
        return unique


def parse_edge_list(text: str, source: str = "<string>") -> WeightedGraph:
    """Parse whitespace-delimited ``u v [w]`` lines; ``#`` starts a comment.

    A line with a single token declares an (possibly isolated) vertex.
    """
    records = []
    tokens: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) == 1:
            tokens.append(parts[0])
            continue
        if len(parts) > 3:
            raise GraphFormatError(f"{source}:{lineno}: expected 'u v [w]', got {raw!r}")
        u, v = parts[0], parts[1]
        try:
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise GraphFormatError(f"{source}:{lineno}: bad weight {parts[2]!r}") from None
        if u == v:
            raise GraphFormatError(f"{source}:{lineno}: self-loop at vertex {u}")
        if not np.isfinite(w) or w <= 0:
            raise GraphFormatError(f"{source}:{lineno}: weight must be positive, got {w}")
        records.append((lineno, u, v, w))
        tokens.extend((u, v))

    names = _compact_ids(tokens)
    index = {s: i for i, s in enumerate(names)}
    seen: dict[tuple[int, int], tuple[int, float]] = {}
    edges = []
    for lineno, u, v, w in records:
        a, b = sorted((index[u], index[v]))
        if (a, b) in seen:
            first_line, first_w = seen[(a, b)]
            what = "conflicting weight" if first_w != w else "duplicate edge"
            raise GraphFormatError(
                f"{source}:{lineno}: {what} {u}-{v} (first given on line {first_line})"
            )
        seen[(a, b)] = (lineno, w)
        edges.append((a, b, w))
    return WeightedGraph(len(names), edges, names=names)


def load_graph(path: str | os.PathLike) -> WeightedGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh.read(), source=str(path))


def format_edge_list(g: WeightedGraph) -> str:
    names = g.names if g.names is not None else [str(i) for i in range(g.n_vertices)]
    lines = [f"# {g.n_vertices} vertices, {g.n_edges} edges"]
    lines += [names[i] for i in range(g.n_vertices) if g.degrees[i] == 0]
    lines += [
        f"{names[u]} {names[v]} {w!r}"
        for (u, v), w in zip(g.edges.tolist(), g.weights.tolist())
    ]
    return "\n".join(lines) + "\n"


def save_graph(g: WeightedGraph, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_edge_list(g))


def _vertex_index(g: WeightedGraph) -> dict[str, int]:
    names = g.names if g.names is not None else [str(i) for i in range(g.n_vertices)]
    return {s: i for i, s in enumerate(names)}


def _read_vertex_table(path, g: WeightedGraph) -> tuple[list[str], dict[int, list[str]]]:
    index = _vertex_index(g)
    rows: dict[int, list[str]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise GraphFormatError(f"{path}: empty file") from None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise GraphFormatError(f"{path}:{lineno}: expected {len(header)} columns")
            key = row[0].strip()
            if key not in index:
                raise GraphFormatError(f"{path}:{lineno}: unknown vertex {key!r}")
            if index[key] in rows:
                raise GraphFormatError(f"{path}:{lineno}: vertex {key!r} listed twice")
            rows[index[key]] = [c.strip() for c in row[1:]]
    return header[1:], rows


def load_features(path, g: WeightedGraph) -> np.ndarray:
    """Feature matrix from a CSV with a header row and vertex ids in column one."""
    header, rows = _read_vertex_table(path, g)
    missing = [i for i in range(g.n_vertices) if i not in rows]
    if missing:
        raise GraphFormatError(f"{path}: no features for {len(missing)} vertices (first: {missing[0]})")
    try:
        X = np.array([[float(c) for c in rows[i]] for i in range(g.n_vertices)], dtype=np.float64)
    except ValueError as exc:
        raise GraphFormatError(f"{path}: {exc}") from None
    X = X.reshape(g.n_vertices, len(header))
    if not np.all(np.isfinite(X)):
        raise GraphFormatError(f"{path}: non-finite feature values")
    return X


def load_labels(path, g: WeightedGraph) -> tuple[dict[int, str], dict[int, str]]:
    """Labels (second column) and optional split tags (a ``split`` column)."""
    header, rows = _read_vertex_table(path, g)
    split_col = header.index("split") if "split" in header else None
    label_col = next(i for i in range(len(header)) if i != split_col)
    labels = {v: r[label_col] for v, r in rows.items()}
    splits = {v: r[split_col] for v, r in rows.items()} if split_col is not None else {}
    return labels, splits


def write_vertex_csv(path, g: WeightedGraph, columns: dict[str, Sequence]) -> None:
    names = g.names if g.names is not None else [str(i) for i in range(g.n_vertices)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vertex", *columns])
        for i in range(g.n_vertices):
            writer.writerow([names[i], *(_fmt(c[i]) for c in columns.values())])


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)
