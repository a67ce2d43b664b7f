"""Ground-truth Bakry-Emery curvature from the local quadratic-form pencil.

At a vertex ``x`` both ``f -> gamma2(f,f)(x)`` and ``f -> gamma(f,f)(x)``
are quadratic forms in the values of ``f`` on the two-ball ``B2(x)``. The
curvature is the infimum of their ratio. We fix ``f(x) = 0`` (both forms
vanish on constants), minimize the gamma2 form over the 2-sphere
coordinates (on which the gamma form vanishes) by a Schur complement, and
solve the remaining pencil on the neighbor block, where the gamma form is
diagonal.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import operators as ops
from .graph import WeightedGraph

PSD_TOL = 1e-10


class CurvatureError(ValueError):
    """Curvature is undefined at one or more vertices."""

    def __init__(self, message: str, vertices: list[int] | None = None):
        super().__init__(message)
        self.vertices = vertices or []


@dataclass(frozen=True)
class LocalFormPair:
    x: int
    basis: list[int]
    A: np.ndarray
    B: np.ndarray

    @property
    def n_neighbors(self) -> int:
        return int(np.count_nonzero(np.diag(self.B)[1:]))


@dataclass
class CurvatureEstimate:
    """Per-vertex curvature values; ``-inf`` marks an unbounded-below vertex."""

    values: np.ndarray
    provenance: str
    n_samples: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.provenance not in ("exact", "sampled", "learned"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if np.any(np.isnan(self.values)) or np.any(np.isposinf(self.values)):
            raise ValueError("curvature values must be finite or -inf")

    @property
    def flagged(self) -> np.ndarray:
        return np.isneginf(self.values)

    def __len__(self) -> int:
        return len(self.values)


def _local(g: WeightedGraph, x: int) -> tuple[list[int], WeightedGraph]:
    basis = g.two_ball(x)
    # gamma2 at x only reads edges incident to x or N(x); all lie inside B2(x)
    return basis, g.subgraph(basis)


def _polarize(values_single: np.ndarray, values_pair: np.ndarray, m: int) -> np.ndarray:
    M = np.diag(values_single)
    for k, (i, j) in enumerate(combinations(range(m), 2)):
        M[i, j] = M[j, i] = 0.5 * (values_pair[k] - values_single[i] - values_single[j])
    return M


def build_local_forms(g: WeightedGraph, x: int, expanded_form: bool = False) -> LocalFormPair:
    """Matrices of the gamma2 and gamma forms at ``x`` in the ``B2(x)`` basis."""
    basis, local = _local(g, x)
    m = len(basis)
    pairs = list(combinations(range(m), 2))
    probes = np.zeros((m, m + len(pairs)))
    probes[np.arange(m), np.arange(m)] = 1.0
    for k, (i, j) in enumerate(pairs):
        probes[i, m + k] = probes[j, m + k] = 1.0
    q2 = ops.gamma2(local, probes, expanded_form=expanded_form)[0]
    q1 = ops.gamma(local, probes)[0]
    A = _polarize(q2[:m], q2[m:], m)
    B = _polarize(q1[:m], q1[m:], m)
    return LocalFormPair(x, basis, A, B)


def reduced_pencil(forms: LocalFormPair) -> tuple[np.ndarray, np.ndarray] | None:
    """Gauge-fixed, Schur-reduced ``(A_red, B_red)`` on the neighbor block.

    Returns ``None`` when the gamma2 form is unbounded below on directions
    where the gamma form vanishes.
    """
    d = forms.n_neighbors
    A = forms.A[1:, 1:]
    B = forms.B[1:, 1:]
    A11, A12, A22 = A[:d, :d], A[:d, d:], A[d:, d:]
    B11 = B[:d, :d]
    if A22.size:
        evals, evecs = np.linalg.eigh(A22)
        scale = max(1.0, float(np.abs(evals).max()))
        if evals[0] < -PSD_TOL * scale:
            return None
        null = evals <= PSD_TOL * scale
        if np.any(null):
            # a linear term along a null direction of A22 is unbounded below
            leak = evecs[:, null].T @ A12.T
            if np.abs(leak).max(initial=0.0) > PSD_TOL * scale:
                return None
        inv = (evecs[:, ~null] / evals[~null]) @ evecs[:, ~null].T
        A11 = A11 - A12 @ inv @ A12.T
    return 0.5 * (A11 + A11.T), B11


def exact_curvature(g: WeightedGraph, x: int, expanded_form: bool = False) -> float:
    """Largest ``k`` with ``gamma2(f)(x) >= k gamma(f)(x)`` for all ``f``.

    Returns ``-inf`` when no finite lower bound exists.
    """
    if g.degree(x) == 0:
        raise CurvatureError(f"vertex {x} is isolated; curvature is undefined", [x])
    pencil = reduced_pencil(build_local_forms(g, x, expanded_form))
    if pencil is None:
        return float("-inf")
    A_red, B_red = pencil
    b = np.diag(B_red)
    if np.any(b <= 0) or np.abs(B_red - np.diag(b)).max() > 1e-12 * b.max():
        raise CurvatureError(f"gamma form at vertex {x} is not diagonal positive", [x])
    s = 1.0 / np.sqrt(b)
    M = A_red * s[:, None] * s[None, :]
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def pencil_min_eig(g: WeightedGraph, x: int, kappa: float) -> float:
    """Smallest eigenvalue of ``A_red - kappa * B_red`` (non-negative when valid)."""
    pencil = reduced_pencil(build_local_forms(g, x))
    if pencil is None:
        return float("-inf")
    A_red, B_red = pencil
    return float(np.linalg.eigvalsh(A_red - kappa * B_red)[0])


def exact_curvature_all(
    g: WeightedGraph, workers: int = 1, expanded_form: bool = False
) -> CurvatureEstimate:
    isolated = [int(x) for x in np.flatnonzero(g.degrees == 0)]
    if isolated:
        raise CurvatureError(
            f"{len(isolated)} isolated vertices have no curvature: {isolated[:10]}", isolated
        )

    def one(x: int) -> float:
        return exact_curvature(g, x, expanded_form)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, range(g.n_vertices)))
    else:
        values = [one(x) for x in range(g.n_vertices)]
    return CurvatureEstimate(np.array(values), "exact")


def sampled_curvature(
    g: WeightedGraph,
    x: int,
    n_samples: int,
    seed: int = 0,
    batch: int = 20000,
) -> float:
    """Minimum ratio ``gamma2/gamma`` at ``x`` over random Gaussian functions.

    Functions are drawn on ``B2(x)`` with ``f(x) = 0``; draws whose gamma
    value is below ``1e-12`` are skipped. The result bounds the exact
    curvature from above.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if g.degree(x) == 0:
        raise CurvatureError(f"vertex {x} is isolated; curvature is undefined", [x])
    basis, local = _local(g, x)
    rng = np.random.default_rng(seed)
    best = np.inf
    remaining = n_samples
    while remaining:
        k = min(batch, remaining)
        remaining -= k
        F = rng.standard_normal((len(basis), k))
        F[0] = 0.0
        num = ops.gamma2(local, F)[0]
        den = ops.gamma(local, F)[0]
        ok = den >= 1e-12
        if np.any(ok):
            best = min(best, float(np.min(num[ok] / den[ok])))
    if not np.isfinite(best):
        raise CurvatureError(f"all {n_samples} draws at vertex {x} were degenerate", [x])
    return best


def sampled_curvature_all(g: WeightedGraph, n_samples: int, seed: int = 0) -> CurvatureEstimate:
    values = [sampled_curvature(g, x, n_samples, seed + x) for x in range(g.n_vertices)]
    return CurvatureEstimate(np.array(values), "sampled", n_samples=n_samples)
