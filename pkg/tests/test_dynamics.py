import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from curvegnn import operators as ops
from curvegnn.datasets import complete_graph, cycle_graph, random_graph
from curvegnn.dynamics import (
    SizeLimitError,
    euler_steps,
    feature_decay,
    feature_decay_bound,
    heat_flow,
    layer_budget,
    mixing_bound,
    mixing_time,
    semigroup_gradient_check,
)
from curvegnn.exact import exact_curvature_all

from conftest import graphs


def test_k2_closed_form():
    t = np.linspace(0, 2, 21)
    flow = heat_flow(complete_graph(2), [0.0, 1.0], t)
    gap = flow.values[:, 1] - flow.values[:, 0]
    assert np.allclose(gap, np.exp(-2 * t), atol=1e-12)
    assert np.allclose(flow.gamma[:, 0], 0.5 * np.exp(-4 * t), atol=1e-12)


def test_identity_and_constants():
    g = cycle_graph(5)
    f0 = np.arange(5.0)
    flow = heat_flow(g, f0, [0.0, 1.0])
    assert np.array_equal(flow.values[0], f0)
    const = heat_flow(g, np.full(5, 2.0), [0.0, 0.5, 3.0])
    assert np.allclose(const.values, 2.0, atol=1e-12)


def test_grid_validation():
    g = complete_graph(2)
    for bad in ([0.5, 1.0], [0.0, 1.0, 1.0], [[0.0]]):
        with pytest.raises(ValueError):
            heat_flow(g, [0.0, 1.0], bad)
    with pytest.raises(SizeLimitError):
        heat_flow(g, [0.0, 1.0], [0.0, 1.0], dense_cap=1)


def test_euler_fallback_approximates_flow():
    g = cycle_graph(6)
    f0 = np.sin(np.arange(6.0))
    a = heat_flow(g, f0, [0.0, 0.5, 1.0]).values
    b = heat_flow(g, f0, [0.0, 0.5, 1.0], euler_dt=1e-4).values
    assert np.allclose(a, b, atol=1e-3)


@given(graphs(min_n=2, max_n=8, connected=True), st.data())
def test_semigroup_mass_and_decay(g, data):
    f0 = data.draw(arrays(np.float64, g.n_vertices, elements=st.floats(-3, 3)))
    s, t = data.draw(st.floats(0.01, 1.0)), data.draw(st.floats(0.01, 1.0))
    once = heat_flow(g, f0, [0.0, s + t]).values[1]
    first = heat_flow(g, f0, [0.0, s]).values[1]
    twice = heat_flow(g, first, [0.0, t]).values[1]
    assert np.allclose(once, twice, atol=1e-9)
    assert once.sum() == pytest.approx(f0.sum(), abs=1e-9)
    grid = np.linspace(0, 2, 11)
    energy = [f @ ops.laplacian_matrix(g) @ f for f in heat_flow(g, f0, grid).values]
    assert np.all(np.diff(energy) <= 1e-9)


def test_mixing_k2():
    grid = np.linspace(0, 3, 30001)
    rep = mixing_time(complete_graph(2), 0, 0.01, 2.0, grid)
    assert rep.empirical == pytest.approx(math.log(100) / 4, abs=grid[1])
    assert rep.bound == pytest.approx(2.3026, abs=1e-4)
    assert rep.within_bound


def test_mixing_eps_one():
    assert mixing_time(complete_graph(3), 0, 1.0, 1.0, np.linspace(0, 1, 5)).empirical == 0.0
    assert mixing_bound(1.0, 3.0) == 0.0
    assert math.isinf(mixing_bound(0.1, -1.0))
    with pytest.raises(ValueError):
        mixing_time(complete_graph(2), 0, 0.0, 1.0, [0.0, 1.0])


def test_mixing_unreached_is_inf():
    assert math.isinf(mixing_time(complete_graph(2), 0, 0.01, 2.0, [0.0, 0.1]).empirical)


def test_gradient_check():
    g = random_graph(np.random.default_rng(0), 10)
    kmin = exact_curvature_all(g).values.min()
    f0 = np.random.default_rng(1).standard_normal(10)
    check = semigroup_gradient_check(g, kmin, f0, np.linspace(0, 3, 31))
    assert check.ok and np.all(check.margin >= 0)
    flat = semigroup_gradient_check(g, kmin, np.ones(10), [0.0, 1.0])
    assert flat.ok


def test_feature_decay_layers():
    g = cycle_graph(6)
    F = euler_steps(g, np.sin(np.arange(6.0)), 0.1, 5)
    assert F.shape == (6, 6)
    rep = feature_decay(g, F, 0, 0.0, 0.1)
    assert rep.distinctiveness[0] == 1.0 and rep.bound[0] == 1.0
    assert feature_decay(g, euler_steps(g, np.ones(6), 0.1, 2), 0, 1.0, 0.1) is None


def test_bound_formulas():
    assert feature_decay_bound(1.0, 3, 1.0) == pytest.approx(0.0498, abs=1e-4)
    assert layer_budget(0.1, 2.0, 0.5) == pytest.approx(2.30, abs=0.01)
    assert math.isinf(layer_budget(0.1, 0.0, 0.5))
