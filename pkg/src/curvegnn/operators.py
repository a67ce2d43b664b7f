"""Discrete Bakry-Emery operators on weighted graphs.

Plain versions act on numpy vertex functions of shape ``(n,)`` or on a
batch of functions stored as the columns of an ``(n, B)`` array. The taped
versions act on :class:`~curvegnn.autodiff.Tensor` values and optionally on
learnable edge weights.

Conventions::

    lap(f)(x)      = sum_y w(x,y) (f(y) - f(x))
    gamma(f,h)(x)  = 1/2 sum_y w(x,y) (f(y) - f(x)) (h(y) - h(x))
    gamma2(f)(x)   = 1/2 lap(gamma(f,f))(x) - gamma(f, lap f)(x)

With ``expanded_form=True`` the cross term is taken without its factor 1/2,
which reproduces the alternative expansion sometimes written for gamma2.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import WeightedGraph


def _check(g: WeightedGraph, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim not in (1, 2) or f.shape[0] != g.n_vertices:
        raise ValueError(f"vertex function of shape {f.shape} does not fit {g.n_vertices} vertices")
    return f


def _arc_diff(g: WeightedGraph, f: np.ndarray) -> np.ndarray:
    src, dst, _ = g.arcs
    return f[dst] - f[src]


def laplacian(g: WeightedGraph, f) -> np.ndarray:
    f = _check(g, f)
    return g.arc_matrix @ _arc_diff(g, f)


def gamma_bilinear(g: WeightedGraph, f, h) -> np.ndarray:
    f, h = _check(g, f), _check(g, h)
    return 0.5 * (g.arc_matrix @ (_arc_diff(g, f) * _arc_diff(g, h)))


def gamma(g: WeightedGraph, f) -> np.ndarray:
    f = _check(g, f)
    d = _arc_diff(g, f)
    return 0.5 * (g.arc_matrix @ (d * d))


def gamma2(g: WeightedGraph, f, expanded_form: bool = False) -> np.ndarray:
    f = _check(g, f)
    d = _arc_diff(g, f)
    lap_f = g.arc_matrix @ d
    gam = 0.5 * (g.arc_matrix @ (d * d))
    cross = g.arc_matrix @ (d * _arc_diff(g, lap_f))
    if not expanded_form:
        cross = 0.5 * cross
    return 0.5 * (g.arc_matrix @ _arc_diff(g, gam)) - cross


def local_gradient_sq(g: WeightedGraph, f, x: int) -> float:
    """Squared local gradient ``gamma(f,f)(x)`` at a single vertex."""
    f = _check(g, f)
    if f.ndim != 1:
        raise ValueError("local_gradient_sq takes a single vertex function")
    fx = f[x]
    return 0.5 * sum(w * (f[y] - fx) ** 2 for y, w in g.neighbors(x))


def laplacian_matrix(g: WeightedGraph) -> np.ndarray:
    """Dense positive semidefinite ``L = -lap`` (degree minus weights)."""
    W = g.weight_matrix()
    return np.diag(W.sum(axis=1)) - W


class TapedOperators:
    """Operator fields on taped tensors for one fixed topology.

    ``weights`` is an optional tensor of edge weights aligned with
    ``g.edges``; when omitted the graph's own weights are used as constants.
    """

    def __init__(self, g: WeightedGraph, expanded_form: bool = False):
        self.g = g
        self.n = g.n_vertices
        self.src, self.dst, self.eid = g.arcs
        self.expanded_form = expanded_form

    def arc_weights(self, weights: Tensor | None, ndim: int) -> Tensor:
        if weights is None:
            w = Tensor(self.g.weights[self.eid])
        else:
            w = ad.take(weights, self.eid)
        return ad.reshape(w, (-1, 1)) if ndim == 2 else w

    def _diff(self, f: Tensor) -> Tensor:
        return ad.take(f, self.dst) - ad.take(f, self.src)

    def _reduce(self, arc_values: Tensor) -> Tensor:
        return ad.segment_sum(arc_values, self.src, self.n)

    def laplacian(self, f: Tensor, weights: Tensor | None = None) -> Tensor:
        w = self.arc_weights(weights, f.ndim)
        return self._reduce(w * self._diff(f))

    def gamma(self, f: Tensor, weights: Tensor | None = None) -> Tensor:
        w = self.arc_weights(weights, f.ndim)
        return 0.5 * self._reduce(w * ad.square(self._diff(f)))

    def gamma_bilinear(self, f: Tensor, h: Tensor, weights: Tensor | None = None) -> Tensor:
        w = self.arc_weights(weights, f.ndim)
        return 0.5 * self._reduce(w * self._diff(f) * self._diff(h))

    def fields(self, f: Tensor, weights: Tensor | None = None) -> tuple[Tensor, Tensor, Tensor]:
        """``(lap f, gamma(f,f), gamma2(f,f))`` sharing intermediate results."""
        w = self.arc_weights(weights, f.ndim)
        d = self._diff(f)
        wd = w * d
        lap_f = self._reduce(wd)
        gam = 0.5 * self._reduce(wd * d)
        cross = self._reduce(wd * self._diff(lap_f))
        if not self.expanded_form:
            cross = 0.5 * cross
        gam2 = 0.5 * self._reduce(w * self._diff(gam)) - cross
        return lap_f, gam, gam2

    def gamma2(self, f: Tensor, weights: Tensor | None = None) -> Tensor:
        return self.fields(f, weights)[2]
