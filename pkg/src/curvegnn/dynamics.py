"""Heat-semigroup simulation and the curvature decay bounds it is checked against.

The generator is the positive semidefinite ``L = -lap``, so
``f_t = exp(-t L) f_0`` is the heat flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import operators as ops
from .graph import WeightedGraph

DENSE_CAP = 2000


class SizeLimitError(ValueError):
    pass


@dataclass
class HeatFlowResult:
    times: np.ndarray
    values: np.ndarray  # (len(times), n) vertex functions
    gamma: np.ndarray  # (len(times), n) squared local gradients
    f0: np.ndarray


def heat_flow(
    g: WeightedGraph,
    f0,
    t_grid,
    dense_cap: int = DENSE_CAP,
    euler_dt: float | None = None,
) -> HeatFlowResult:
    """Evolve ``f0`` under ``exp(-t L)`` on a strictly increasing time grid from 0.

    Uses a dense eigendecomposition of ``L``. With ``euler_dt`` the flow is
    instead integrated by explicit Euler steps (for graphs beyond the cap).
    """
    f0 = np.asarray(f0, dtype=np.float64)
    if f0.shape != (g.n_vertices,):
        raise ValueError("f0 needs one value per vertex")
    times = np.asarray(t_grid, dtype=np.float64)
    if times.ndim != 1 or times[0] != 0 or np.any(np.diff(times) <= 0):
        raise ValueError("time grid must start at 0 and increase strictly")
    if euler_dt is not None:
        values = _euler_flow(g, f0, times, euler_dt)
    else:
        if g.n_vertices > dense_cap:
            raise SizeLimitError(
                f"{g.n_vertices} vertices exceed the dense cap {dense_cap}; use Euler steps"
            )
        lam, U = np.linalg.eigh(ops.laplacian_matrix(g))
        lam = np.clip(lam, 0.0, None)
        # L kills constants, so evolving the centred part keeps them exact
        mean = f0.mean()
        coeff = U.T @ (f0 - mean)
        values = mean + (U @ (np.exp(-np.outer(lam, times)) * coeff[:, None])).T
        values[0] = f0
    gam = ops.gamma(g, values.T).T
    return HeatFlowResult(times, values, gam, f0)


def _euler_flow(g: WeightedGraph, f0: np.ndarray, times: np.ndarray, dt: float) -> np.ndarray:
    out = np.empty((len(times), len(f0)))
    f, t = f0.copy(), 0.0
    for i, target in enumerate(times):
        while t < target - 1e-12:
            h = min(dt, target - t)
            f = f + h * ops.laplacian(g, f)
            t += h
        out[i] = f
    return out


def euler_steps(g: WeightedGraph, f0, dt: float, n_steps: int) -> np.ndarray:
    """Features after ``0 .. n_steps`` explicit heat steps ``f <- f + dt lap f``.

    ``f0`` may hold one function per column; the result stacks layers first.
    """
    f = np.asarray(f0, dtype=np.float64)
    out = [f]
    for _ in range(n_steps):
        f = f + dt * ops.laplacian(g, f)
        out.append(f)
    return np.stack(out)


def mixing_bound(eps: float, kappa: float) -> float:
    """``log(1/eps) / kappa``; infinite for non-positive curvature."""
    if kappa <= 0:
        return math.inf
    return math.log(1.0 / eps) / kappa


def probe_functions(g: WeightedGraph, x: int, n_random: int = 32, seed: int = 0) -> np.ndarray:
    """Random unit-norm functions plus ``e_y - e_x`` for every neighbor ``y``."""
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((g.n_vertices, n_random))
    R /= np.linalg.norm(R, axis=0, keepdims=True)
    cols = [R]
    for y, _ in g.neighbors(x):
        e = np.zeros((g.n_vertices, 1))
        e[y], e[x] = 1.0, -1.0
        cols.append(e)
    return np.hstack(cols)


@dataclass
class MixingReport:
    x: int
    eps: float
    empirical: float
    bound: float
    kappa: float
    n_probes: int

    @property
    def within_bound(self) -> bool:
        return self.empirical <= self.bound


def mixing_time(
    g: WeightedGraph,
    x: int,
    eps: float,
    kappa_x: float,
    t_grid,
    probes: np.ndarray | None = None,
) -> MixingReport:
    """First grid time where every probe's gradient at ``x`` fell by ``eps``.

    The empirical value is ``inf`` if some probe never decays enough on the
    grid. Probes with zero initial gradient at ``x`` are ignored.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    times = np.asarray(t_grid, dtype=np.float64)
    probes = probe_functions(g, x) if probes is None else np.asarray(probes, dtype=np.float64)
    if probes.ndim == 1:
        probes = probes[:, None]
    lam, U = np.linalg.eigh(ops.laplacian_matrix(g))
    lam = np.clip(lam, 0.0, None)
    coeff = U.T @ probes  # (n, P)
    decay = np.exp(-np.outer(lam, times))  # (n, T)
    src = [y for y, _ in g.neighbors(x)]
    wts = np.array([w for _, w in g.neighbors(x)])
    ratios = []
    g0 = None
    for j in range(probes.shape[1]):
        ft = U @ (decay * coeff[:, j : j + 1])  # (n, T)
        ft[:, 0] = probes[:, j]
        gam = 0.5 * (wts[:, None] * (ft[src] - ft[x]) ** 2).sum(axis=0)
        if gam[0] <= 1e-15:
            continue
        ratios.append(gam / gam[0])
        g0 = gam[0]
    if g0 is None:
        raise ValueError(f"no probe has a non-zero gradient at vertex {x}")
    worst = np.max(ratios, axis=0)
    hit = np.flatnonzero(worst <= eps * (1 + 1e-12))
    empirical = float(times[hit[0]]) if len(hit) else math.inf
    return MixingReport(x, eps, empirical, mixing_bound(eps, kappa_x), kappa_x, len(ratios))


@dataclass
class GradientCheck:
    times: np.ndarray
    lhs: np.ndarray  # max_x gamma(f_t)(x)
    rhs: np.ndarray  # exp(-2 kappa_min t) max_x gamma(f_0)(x) (1 + tol)
    passed: np.ndarray = field(init=False)

    def __post_init__(self):
        self.passed = self.lhs <= self.rhs

    @property
    def ok(self) -> bool:
        return bool(np.all(self.passed))

    @property
    def margin(self) -> np.ndarray:
        return self.rhs - self.lhs


def semigroup_gradient_check(
    g: WeightedGraph, kappa_min: float, f0, t_grid, tol: float = 1e-6
) -> GradientCheck:
    """``max_x gamma(f_t)(x) <= exp(-2 kappa_min t) max_x gamma(f_0)(x)`` on a grid."""
    flow = heat_flow(g, f0, t_grid)
    peak = flow.gamma.max(axis=1)
    rhs = np.exp(-2.0 * kappa_min * flow.times) * peak[0] * (1.0 + tol)
    return GradientCheck(flow.times, peak, rhs)


@dataclass
class DecayReport:
    x: int
    layers: np.ndarray
    distinctiveness: np.ndarray
    bound: np.ndarray

    @property
    def within_bound(self) -> np.ndarray:
        return self.distinctiveness <= self.bound


def feature_decay(
    g: WeightedGraph,
    features_by_layer: np.ndarray,
    x: int,
    kappa_x: float,
    dt: float,
) -> DecayReport | None:
    """``D(x, l) = gamma(f_l)(x) / gamma(f_0)(x)`` next to ``exp(-kappa l dt)``.

    ``features_by_layer`` is ``(n_layers + 1, n)``. Returns ``None`` when
    the initial gradient at ``x`` is zero.
    """
    F = np.asarray(features_by_layer, dtype=np.float64)
    gam = ops.gamma(g, F.T)[x]
    if gam[0] <= 0:
        return None
    layers = np.arange(F.shape[0])
    return DecayReport(x, layers, gam / gam[0], np.exp(-kappa_x * layers * dt))


def feature_decay_bound(kappa: float, layers: int, dt: float) -> float:
    return math.exp(-kappa * layers * dt)


def layer_budget(eps: float, kappa: float, dt: float) -> float:
    """Largest ``l`` with ``exp(-kappa l dt) >= eps``: ``log(1/eps) / (kappa dt)``."""
    if kappa <= 0:
        return math.inf
    return math.log(1.0 / eps) / (kappa * dt)
