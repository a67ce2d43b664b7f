"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed together at the
end of the pytest session and when this file is run as a script.
"""

import math
import time

import numpy as np
import pytest

from curvegnn import autodiff as ad
from curvegnn import operators as ops
from curvegnn.autodiff import Tensor
from curvegnn.datasets import (
    bounded_degree_graph,
    complete_graph,
    path_graph,
    random_graph,
    sbm,
    star_graph,
)
from curvegnn.diffusion import exact_ic, exact_lt, make_influence_dataset, simulate_ic, simulate_lt
from curvegnn.dynamics import euler_steps, mixing_time, semigroup_gradient_check
from curvegnn.exact import exact_curvature, exact_curvature_all, sampled_curvature
from curvegnn.gnn import (
    GnnModel,
    GraphContext,
    assign_depths,
    forward_adaptive,
    forward_standard,
    task_loss,
)
from curvegnn.graph import WeightedGraph
from curvegnn.learn import (
    CurvatureConfig,
    FunctionFamily,
    LearnedCurvatureParams,
    curvature_loss,
    estimate_curvature,
)
from curvegnn.nn import rng_for
from curvegnn.operators import TapedOperators
from curvegnn.training import TrainConfig, train

RESULTS: dict[int, str] = {}


def record(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def scaled(g: WeightedGraph, c: float) -> WeightedGraph:
    return g.with_weights(c * g.weights)


def theorem_graphs():
    """The 20 random connected graphs (|V| <= 15) shared by criteria 8 and 9."""
    rng = np.random.default_rng(11)
    out = []
    for _ in range(20):
        n = int(rng.integers(4, 16))
        g = random_graph(rng, n, p=0.4)
        out.append((g, rng.standard_normal(n)))
    return out


# ---------------------------------------------------------------- 1


def test_closed_form_curvature():
    checks = {
        "K2": (exact_curvature(complete_graph(2), 0), 2.0),
        "P3 center": (exact_curvature(path_graph(3), 1), 0.5),
        "K2 w=0.5": (exact_curvature(complete_graph(2, 0.5), 0), 1.0),
        "K2 w=3": (exact_curvature(complete_graph(2, 3.0), 0), 6.0),
    }
    err = {k: abs(v - want) for k, (v, want) in checks.items()}
    record(1, "closed forms", max(err.values()) <= 1e-9, f"max error {max(err.values()):.1e}")


# ---------------------------------------------------------------- 2


def test_sampling_oracle_dominance():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    below, close, total = 0, 0, 0
    for i in range(50):
        n = int(rng.integers(3, 13))
        g = random_graph(rng, n, p=0.4, weight_range=(0.5, 2.0))
        exact = exact_curvature_all(g).values
        for x in range(n):
            s = sampled_curvature(g, x, 100_000, seed=1000 * i + x)
            below += s < exact[x] - 1e-9
            close += s - exact[x] <= 0.05 * abs(exact[x])
            total += 1
    elapsed = time.perf_counter() - start
    frac = close / total
    ok = below == 0 and frac >= 0.9 and elapsed < 60
    record(
        2,
        "sampled >= exact",
        ok,
        f"{below} of {total} vertices below exact, gap <= 5% on {frac:.1%} (need 90%), {elapsed:.0f}s",
    )


# ---------------------------------------------------------------- 3


def test_learned_upper_bound():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    graphs = [complete_graph(2), path_graph(3)]
    graphs += [random_graph(rng, int(rng.integers(3, 11)), p=0.4) for _ in range(10)]
    worst, gaps = math.inf, []
    for g in graphs:
        exact = exact_curvature_all(g).values
        for seed in range(3):
            cfg = CurvatureConfig(n_functions=3, lam=1.0, epochs=2000, seed=seed, learn_weights=False)
            est = estimate_curvature(g, np.eye(g.n_vertices), cfg).values
            worst = min(worst, float(np.min(est - exact)))
            gaps.extend(est - exact)
    elapsed = time.perf_counter() - start
    ok = worst >= -0.05 and elapsed < 300
    record(
        3,
        "learned upper bound",
        ok,
        f"min(kappa_hat - kappa) = {worst:.3f}, median gap {np.median(gaps):.3f}, {elapsed:.0f}s",
    )


# ---------------------------------------------------------------- 4


def test_operator_identities():
    rng = np.random.default_rng(4)
    worst = {"gauge": 0.0, "scaling": 0.0, "locality": 0.0, "product": 0.0}
    for _ in range(100):
        n = int(rng.integers(2, 13))
        g = random_graph(rng, n, p=0.4, connected=False)
        f = rng.uniform(-1, 1, n)
        gam, gam2 = ops.gamma(g, f), ops.gamma2(g, f)
        c = rng.uniform(-5, 5)
        worst["gauge"] = max(
            worst["gauge"],
            np.abs(ops.gamma(g, f + c) - gam).max(),
            np.abs(ops.gamma2(g, f + c) - gam2).max(),
        )
        s = rng.uniform(0.5, 2.0)
        h = scaled(g, s)
        worst["scaling"] = max(
            worst["scaling"],
            np.abs(ops.gamma(h, f) - s * gam).max(),
            np.abs(ops.gamma2(h, f) - s**2 * gam2).max(),
        )
        x = int(rng.integers(n))
        ball1 = {x} | {y for y, _ in g.neighbors(x)}
        ball2 = set(g.two_ball(x))
        noise = rng.standard_normal(n)
        f1 = np.array([f[v] if v in ball1 else f[v] + noise[v] for v in range(n)])
        f2 = np.array([f[v] if v in ball2 else f[v] + noise[v] for v in range(n)])
        worst["locality"] = max(
            worst["locality"],
            abs(ops.laplacian(g, f1)[x] - ops.laplacian(g, f)[x]),
            abs(ops.gamma(g, f1)[x] - gam[x]),
            abs(ops.gamma2(g, f2)[x] - gam2[x]),
        )
        prod = 0.5 * (ops.laplacian(g, f**2) - 2 * f * ops.laplacian(g, f))
        worst["product"] = max(worst["product"], np.abs(prod - gam).max())
    ok = max(worst.values()) <= 1e-12
    record(4, "operator identities", ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


# ---------------------------------------------------------------- 5


def total_loss_setup(aggregator: str, seed: int = 0):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 6, p=0.5)
    X = rng.standard_normal((6, 3))
    y = rng.integers(0, 2, 6)
    model = GnnModel(3, 4, 2, 2, aggregator, seed)
    for p in model.parameters():
        p.data = rng.standard_normal(p.data.shape) * 0.5
    family = FunctionFamily(2, 3, rng_for(seed, "family"))
    curv = LearnedCurvatureParams(g, 3, rng_for(seed, "kappa"), learn_weights=True)
    curv.kappa.data = rng.uniform(-1, 3, 6)
    curv.log_weights.data = rng.uniform(-0.3, 0.3, g.n_edges)
    depths = assign_depths(curv.kappa.data, 50, 2)
    ctx, operators = GraphContext(g), TapedOperators(g)

    def loss():
        out = forward_adaptive(model, ctx, Tensor(X), depths, curv.weights())
        return task_loss(out, y, "classification") + curvature_loss(g, family, curv, Tensor(X), operators)

    params = {}
    params.update(model.named_parameters("gnn."))
    params.update(curv.named_parameters("curv."))
    params.update(family.named_parameters("family."))
    return loss, params


def gradient_error(aggregator: str) -> tuple[float, int]:
    loss, params = total_loss_setup(aggregator)
    ad.backward(loss())
    analytic = np.concatenate([p.grad.ravel() for p in params.values()])
    numeric = []
    h = 1e-6
    for p in params.values():
        for i in np.ndindex(p.data.shape):
            old = p.data[i]
            p.data[i] = old + h
            up = loss().item()
            p.data[i] = old - h
            down = loss().item()
            p.data[i] = old
            numeric.append((up - down) / (2 * h))
    numeric = np.array(numeric)
    return float(np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric)), len(numeric)


def test_total_loss_gradient():
    errors = {agg: gradient_error(agg) for agg in ("gcn-mean", "gin-sum")}
    ok = all(rel < 1e-4 for rel, _ in errors.values())
    detail = ", ".join(f"{agg} rel error {rel:.1e} ({n} parameters)" for agg, (rel, n) in errors.items())
    record(5, "total-loss gradient", ok, detail)


# ---------------------------------------------------------------- 6


def brute_force_depths(kappa, k):
    n = len(kappa)
    T = np.empty(n, dtype=int)
    for x in range(n):
        p = np.count_nonzero(kappa >= kappa[x]) / n
        t = 1
        while not p <= k * t / 100:
            t += 1
        T[x] = t
    return T


def test_depth_mechanism():
    rng = np.random.default_rng(6)
    mismatches = monotone_breaks = saturation_breaks = 0
    for i in range(1000):
        n = int(rng.integers(1, 51))
        kappa = rng.normal(0, 2, n)
        if i % 3 == 0:
            kappa = np.round(kappa)  # ties
        if i % 7 == 0:
            kappa[rng.random(n) < 0.1] = -np.inf
        for k in (5, 10, 20, 100):
            T = assign_depths(kappa, k).T
            mismatches += not np.array_equal(T, brute_force_depths(kappa, k))
            order = np.argsort(-kappa, kind="stable")
            monotone_breaks += np.any(np.diff(T[order]) < 0)
            if k == 100:
                saturation_breaks += np.any(T != 1)
    ok = mismatches == monotone_breaks == saturation_breaks == 0
    record(
        6,
        "depth assignment",
        ok,
        f"{mismatches} brute-force mismatches, {monotone_breaks} monotonicity breaks, "
        f"{saturation_breaks} k=100 breaks over 4000 cases",
    )


# ---------------------------------------------------------------- 7


def test_uniform_depth_equivalence():
    rng = np.random.default_rng(7)
    worst, cases = 0.0, 0
    for L in (1, 2, 4):
        for aggregator in ("gcn-mean", "gin-sum"):
            for _ in range(20):
                n = int(rng.integers(2, 51))
                g = random_graph(rng, n, p=min(1.0, 4.0 / n))
                X = rng.standard_normal((n, 5))
                model = GnnModel(5, 6, 3, L, aggregator, int(rng.integers(1 << 30)))
                for p in model.parameters():
                    p.data = rng.standard_normal(p.data.shape) * 0.5
                ctx = GraphContext(g)
                a = forward_adaptive(model, ctx, X, np.full(n, L)).data
                b = forward_standard(model, ctx, X).data
                worst = max(worst, float(np.abs(a - b).max()))
                cases += 1
    record(7, "uniform depth = standard GNN", worst <= 1e-12, f"max |diff| {worst:.1e} over {cases} models")


# ---------------------------------------------------------------- 8


def test_mixing_and_semigroup():
    grid = np.linspace(0.0, 3.0, 3001)
    rep = mixing_time(complete_graph(2), 0, 0.01, 2.0, grid)
    target = math.log(100) / 4
    k2_ok = abs(rep.empirical - target) <= grid[1] and rep.empirical <= rep.bound
    failed = 0
    for g, f0 in theorem_graphs():
        kmin = exact_curvature_all(g).values.min()
        failed += not semigroup_gradient_check(g, kmin, f0, np.linspace(0, 5, 101)).ok
    record(
        8,
        "mixing time and gradient decay",
        k2_ok and failed == 0,
        f"K2 tau(0.01) = {rep.empirical:.4f} (closed form {target:.4f}, bound {rep.bound:.4f}); "
        f"{failed} of 20 graphs fail the decay check",
    )


# ---------------------------------------------------------------- 9


def feature_decay_violations(exponent: float, pointwise: bool):
    """Vertices (or graphs) where distinctiveness exceeds the curvature bound."""
    dt, steps = 0.05, 40
    bad, total, worst = 0, 0, 0.0
    layers = np.arange(steps + 1)
    for g, f0 in theorem_graphs():
        kmin = exact_curvature_all(g).values.min()
        bound = np.exp(-exponent * kmin * layers * dt) * (1 + 1e-3)
        G = ops.gamma(g, euler_steps(g, f0, dt, steps).T)  # (n, layers)
        rows = G[G[:, 0] > 1e-8] if pointwise else G.max(axis=0, keepdims=True)
        for r in rows:
            ratio = (r / r[0]) / bound
            total += 1
            bad += np.any(ratio > 1)
            worst = max(worst, float(ratio.max()))
    return bad, total, worst


def test_feature_decay_pointwise():
    bad, total, worst = feature_decay_violations(1.0, pointwise=True)
    record(
        9,
        "pointwise feature decay",
        bad == 0,
        f"{bad} of {total} vertices exceed exp(-kappa_min l dt), worst D/bound {worst:.2f}",
    )


def test_feature_decay_global_diagnostic():
    """The same bound on the graph-wide maximum of the squared gradient."""
    bad, total, worst = feature_decay_violations(1.0, pointwise=False)
    assert bad == 0, f"{bad} of {total} graphs exceed the bound (worst {worst:.2f})"


# ---------------------------------------------------------------- 10


def three_sigma(p, runs):
    p = np.clip(np.asarray(p), 0.0, 1.0)  # enumeration sums can overshoot 1 by an ulp
    return 3 * np.sqrt(p * (1 - p) / runs)


def oracle_cases():
    """Small graphs, seed sets and a simulation seed fixed per graph."""
    rng = np.random.default_rng(10)
    graphs = [complete_graph(2), path_graph(3), star_graph(4)]
    graphs += [random_graph(rng, int(rng.integers(3, 11)), p=0.3) for _ in range(10)]
    for i, g in enumerate(graphs):
        seeds = sorted(rng.choice(g.n_vertices, size=min(2, g.n_vertices - 1), replace=False).tolist())
        yield i, g, seeds


def simulated_and_exact(g, seeds, runs, seed):
    return {
        "IC p=0.3": (simulate_ic(g, seeds, p=0.3, runs=runs, seed=seed).probabilities, exact_ic(g, seeds, p=0.3)),
        "IC cascade": (simulate_ic(g, seeds, runs=runs, seed=seed).probabilities, exact_ic(g, seeds)),
        "LT": (simulate_lt(g, seeds, runs=runs, seed=seed).probabilities, exact_lt(g, seeds)),
    }


def test_diffusion_targets():
    runs = 10_000
    k2 = simulate_ic(complete_graph(2), [0], p=0.5, runs=runs).probabilities[1]
    k2_ok = abs(k2 - 0.5) <= 0.015

    outside = checked = 0
    for i, g, seeds in oracle_cases():
        for sim, exact in simulated_and_exact(g, seeds, runs, seed=i).values():
            outside += int(np.sum(np.abs(sim - exact) > three_sigma(exact, runs) + 1e-12))
            checked += len(exact)

    lt = simulate_lt(star_graph(4), [1, 2], runs=runs).probabilities[0]
    lt_ok = abs(lt - 0.5) <= three_sigma(0.5, runs)

    sizes = np.array([250, 1000, 4000, 16000])
    rmse = []
    for r in sizes:
        est = [simulate_ic(complete_graph(2), [0], p=0.5, runs=int(r), seed=s).probabilities[1] for s in range(100)]
        rmse.append(np.sqrt(np.mean((np.array(est) - 0.5) ** 2)))
    slope = np.polyfit(np.log(sizes), np.log(rmse), 1)[0]
    slope_ok = abs(slope + 0.5) <= 0.2 * 0.5

    ok = k2_ok and outside == 0 and lt_ok and slope_ok
    record(
        10,
        "diffusion targets",
        ok,
        f"K2 IC {k2:.4f}; {outside} of {checked} oracle values outside 3 sigma; "
        f"LT star {lt:.4f}; error slope {slope:.3f}",
    )


def test_oracle_exceedances_are_not_bias():
    """Values outside 3 sigma at 10^4 runs, rerun with 40 times as many runs."""
    runs, rerun = 10_000, 400_000
    for i, g, seeds in oracle_cases():
        first = simulated_and_exact(g, seeds, runs, seed=i)
        for model, (sim, exact) in first.items():
            flagged = np.abs(sim - exact) > three_sigma(exact, runs) + 1e-12
            if not flagged.any():
                continue
            again = simulated_and_exact(g, seeds, rerun, seed=10_000 + i)[model][0]
            err = np.abs(again - exact)[flagged]
            assert np.all(err <= three_sigma(exact[flagged], rerun)), (i, model, err)


# ---------------------------------------------------------------- 11


def ic_problem(seed: int):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 100, p=0.05)
    seeds, target = make_influence_dataset(g, seed=seed)
    indicator = np.zeros(100)
    indicator[seeds] = 1.0
    d = g.degrees.astype(float)
    X = np.column_stack([indicator, d / d.max(), np.ones(100)])
    return g, X, target.probabilities


def test_end_to_end_smoke():
    lines, ok = [], True
    for seed in range(3):
        start = time.perf_counter()
        g, X, y = sbm(np.random.default_rng(seed))
        res = train(g, X, y, TrainConfig(seed=seed))
        elapsed = time.perf_counter() - start
        last = res.history[-1]
        good = last["metric"] > 0.9 and last["test_metric"] > 0.5 and elapsed < 120
        ok &= good
        lines.append(f"seed {seed} train {last['metric']:.3f} test {last['test_metric']:.3f} {elapsed:.0f}s")
    g, X, y = ic_problem(0)
    res = train(g, X, y, TrainConfig(task="regression", epochs=10))
    losses = np.array([h["L_task"] for h in res.history])
    monotone = bool(np.all(np.diff(losses) < 0))
    ok &= monotone
    lines.append(f"IC MSE {losses[0]:.4f} -> {losses[-1]:.4f} monotone={monotone}")
    record(11, "end-to-end smoke", ok, "; ".join(lines))


# ---------------------------------------------------------------- 12


def loss_time(g: WeightedGraph, n_functions: int, repeats: int = 7) -> float:
    X = np.column_stack([np.ones(g.n_vertices), g.degrees / g.degrees.max()])
    family = FunctionFamily(n_functions, 2, rng_for(0, "family"))
    curv = LearnedCurvatureParams(g, 2, rng_for(0, "kappa"))
    operators = TapedOperators(g)
    Xt = Tensor(X)
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        ad.backward(curvature_loss(g, family, curv, Xt, operators))
        best = min(best, time.perf_counter() - start)
    return best


def test_complexity_scaling():
    rng = np.random.default_rng(12)
    g = bounded_degree_graph(rng, 4000, 8)
    Ns = np.array([1, 3, 5])
    tN = [loss_time(g, int(N)) for N in Ns]
    slope_N = np.polyfit(np.log(Ns), np.log(tN), 1)[0]
    td, dmax = [], []
    for d in (4, 8, 16, 32):
        h = bounded_degree_graph(rng, 2000, d)
        td.append(loss_time(h, 3))
        dmax.append(h.degrees.max())
    slope_d = np.polyfit(np.log(dmax), np.log(td), 1)[0]
    ok = 0.5 <= slope_N <= 2.0 and slope_d <= 4.0
    record(
        12,
        "complexity scaling",
        ok,
        f"time ~ N^{slope_N:.2f} (need 0.5..2), time ~ d_max^{slope_d:.2f} (need <= 4)",
    )


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
