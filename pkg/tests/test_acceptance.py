"""Acceptance suite: one test per criterion, each printing a single verdict line."""
import math
import subprocess
import sys

import numpy as np

from tbrw.bench import growth_constant, layered_visits_mc, localized_region, random_subset, small_corpus
from tbrw.chain import (hitting_times, layer_bounds, layered_alpha, layered_expected_visits)
from tbrw.cover import (CoverSchedule, build_random_cover, cayley_inequality, claim_levels,
                        cov0_exact, sample_radius_set, singleton_cover, validate_cover)
from tbrw.explorer import (auto_cover, build_plan, check_local_lemma_bound, choose_k,
                           excision_chi_square, run_global, simulate_exploration)
from tbrw.generators import (AffineCayleySpec, make_affine_cayley, make_binary_tree, make_complete,
                             make_cycle, make_grid, make_layered, make_path, make_random_connected,
                             make_random_regular, make_star)
from tbrw.graph import WeightedGraph, bfs_distances, distance_matrix, weight_field_from_distances
from tbrw.strategies import (PhiU, SpanningWalk, estimate_cover_time, estimate_hitting_time,
                             estimate_weighted_hitting_time, step_law, trial_rng,
                             weighted_step_law)

SEED = 20240611


def test_criterion_01_emulation_equivalence(verdict):
    rng = np.random.default_rng([SEED, 1])
    worst, fails = 0.0, 0
    for j in range(200):
        n = int(rng.integers(2, 51))
        g = make_random_connected(n, float(rng.uniform(0.02, 0.3)), seed=rng)
        U = random_subset(rng, n)
        eps = float(rng.choice([0.1, 0.3, 0.5, 0.9]))
        v = int(rng.integers(n))
        phi = PhiU(g, U, eps)
        tv = 0.5 * np.abs(step_law(g, eps, phi, [v]) - weighted_step_law(phi.weighted_graph(), v)).sum()
        worst = max(worst, tv)
        fails += tv > 1e-12
    verdict(1, fails == 0, f"200 tuples, max TV {worst:.3e} (<= 1e-12), failures {fails}")


def _hitting_cases(seed):
    rng = np.random.default_rng(seed)
    for _, g in small_corpus(100, seed, 25):
        for _ in range(20):
            U = random_subset(rng, g.n)
            v = int(rng.integers(g.n))
            eps = float(rng.choice([0.1, 0.5]))
            d = bfs_distances(g, U)
            h = hitting_times(weight_field_from_distances(g, d, eps), U)[v]
            yield g, U, v, eps, h


def test_criterion_02_hitting_bound(verdict):
    worst, fails, count = 0.0, 0, 0
    for g, U, v, eps, h in _hitting_cases(SEED + 2):
        rhs = 2.0 * g.m / eps
        worst = max(worst, h / rhs)
        fails += h > rhs
        count += 1
    verdict(2, fails == 0, f"{count} cases, max H/(2 e(G)/eps) = {worst:.4f}, violations {fails}")


def test_criterion_03_localized_hitting_bound(verdict):
    worst, fails, count = 0.0, 0, 0
    for g, U, v, eps, h in _hitting_cases(SEED + 3):
        W = localized_region(g, U, v, eps)
        rhs = 2.0 / eps * (g.induced_edge_count(W) + 1)
        worst = max(worst, h / rhs)
        fails += h > rhs
        count += 1
    verdict(3, fails == 0, f"{count} cases, max H/(2(e(G[W])+1)/eps) = {worst:.4f}, violations {fails}")


def test_criterion_04_layered_closed_form(verdict):
    err = 0.0
    for eps in (0.0, 0.01, 0.05):
        a = layered_alpha(eps)
        for k in range(4, 9):
            err = max(err, abs(layered_expected_visits(eps, k) / a ** (k - 3) - 1.0))
    dev, se = layered_visits_mc(0.05, 10_000, SEED + 4, n=14)
    gap = max(4.0 * (1.0 - 5.0 * e) - layered_alpha(e) for e in np.linspace(0.0, 0.99, 199))
    ok = err <= 1e-9 and dev <= 3.0 * se and gap <= 0.0
    verdict(4, ok, f"max rel err {err:.2e} (<= 1e-9); MC |mean - alpha^(k-3)| = {dev:.4f} "
                   f"vs 3 SE = {3 * se:.4f}; max 4(1-5eps) - alpha = {gap:.3e} (<= 0)")


def test_criterion_05_layer_bound(verdict):
    rng = np.random.default_rng([SEED, 5])
    worst, fails, layers = 0.0, 0, 0
    for _ in range(50):
        g = make_random_connected(int(rng.integers(2, 26)), float(rng.uniform(0.05, 0.4)), seed=rng)
        U = random_subset(rng, g.n)
        eps = float(rng.uniform(0.05, 0.95))
        for lb in layer_bounds(g, U, eps):
            layers += 1
            worst = max(worst, lb.T / lb.rhs)
            fails += lb.T > lb.rhs
    verdict(5, fails == 0, f"50 graphs, {layers} layers, max T_i/rhs = {worst:.4f}, violations {fails}")


def _cover_graphs():
    return [
        ("path64", make_path(64)), ("path1024", make_path(1024)),
        ("cycle256", make_cycle(256)), ("cycle4096", make_cycle(4096)),
        ("grid8", make_grid(8, 8)), ("grid32", make_grid(32, 32)), ("grid64", make_grid(64, 64)),
        ("reg3_128", make_random_regular(128, 3, seed=1)),
        ("reg3_512", make_random_regular(512, 3, seed=2)),
        ("reg3_4096", make_random_regular(4096, 3, seed=3)),
        ("reg4_1024", make_random_regular(1024, 4, seed=4)),
        ("gnp200", make_random_connected(200, 0.03, seed=5)),
        ("gnp500", make_random_connected(500, 0.01, seed=6)),
        ("layered100", make_layered(100)[0]), ("layered1000", make_layered(1000)[0]),
        ("cayley5r2", make_affine_cayley(AffineCayleySpec(5, 2))[0]),
        ("cayley7r2", make_affine_cayley(AffineCayleySpec(7, 2))[0]),
        ("cayley5r3", make_affine_cayley(AffineCayleySpec(5, 3))[0]),
        ("tree1023", make_binary_tree(1023)), ("star500", make_star(500)),
    ]


def test_criterion_06_cover_construction(verdict):
    bad = []
    worst = 0.0
    for name, g in _cover_graphs():
        for k in (2, 3, 4):
            try:
                c = build_random_cover(g, k, seed=[SEED, g.n, k], max_retries=100)
            except Exception as exc:  # noqa: BLE001 - any failure counts against the criterion
                bad.append(f"{name}/k={k}: {exc}")
                continue
            rep = validate_cover(g, c)
            limit = CoverSchedule(g.n, k).overlap_threshold()
            worst = max(worst, rep.K_actual / limit)
            if not (rep.valid and rep.max_radius <= 2 ** (k - 1) - 1 and rep.K_actual <= limit):
                bad.append(f"{name}/k={k}")
    rng = np.random.default_rng([SEED, 6])
    claim_fail = 0
    for j in range(100):
        n = int(rng.integers(10, 501))
        g = make_random_connected(n, float(rng.uniform(0.0, 6.0 / n)), seed=rng)
        D = distance_matrix(g)
        for k in (2, 3, 4):
            claim_fail += int((claim_levels(g, CoverSchedule(n, k), dist=D) < 0).sum())
    ok = not bad and claim_fail == 0
    verdict(6, ok, f"20 graphs x k in 2..4: failures {bad or 0}, max K/limit {worst:.3f}; "
                   f"claim failures on 100 graphs: {claim_fail}")


def test_criterion_07_cayley_inequalities(verdict):
    rng = np.random.default_rng([SEED, 7])
    bad = []
    for p, radius, count in ((3, 2, 1000), (5, 2, 1000), (7, 2, 1000), (3, 3, 500), (5, 3, 500)):
        g, lab = make_affine_cayley(AffineCayleySpec(p, radius))
        for _ in range(count):
            c = int(rng.integers(g.n))
            if not cayley_inequality(g, lab, sample_radius_set(g, c, radius, rng), c).ok:
                bad.append((p, radius))
    cov0 = {n: cov0_exact(make_complete(n)) for n in range(2, 13)}
    sharp = all(abs(v - n) < 1e-12 for n, v in cov0.items())
    verdict(7, not bad and sharp, f"4000 sampled sets, counterexamples {len(bad)}; "
                                  f"cov0(K_n) = n for n = 2..12: {sharp}")


def _forced_singleton_plan(n, eps):
    g = make_cycle(n)
    c = singleton_cover(g)
    c.power = choose_k(eps, n)
    return build_plan(g, eps, 0, c)


def test_criterion_08_global_strategy(verdict):
    lines, bad = [], []
    plans = []
    families = {"cycle": lambda n: make_cycle(n),
                "grid": lambda n: make_grid(int(math.isqrt(n)), int(math.isqrt(n))),
                "reg3": lambda n: make_random_regular(n, 3, seed=n)}
    for fam, make in families.items():
        for n in (64, 256, 1024):
            g = make(n)
            D = distance_matrix(g)
            for eps in (0.2, 0.5):
                c = auto_cover(g, eps, SEED, D)
                plans.append((f"{fam}{n}/eps{eps}", build_plan(g, eps, 0, c, dist=D)))
    # multi-set plans: singleton covers and random covers of the power graph
    for eps in (0.2, 0.5):
        plans.append((f"cycle64-singletons/eps{eps}", _forced_singleton_plan(64, eps)))
    g = make_cycle(256)
    D = distance_matrix(g)
    for eps in (0.2, 0.5):
        k = choose_k(eps, g.n)
        c = build_random_cover(g, 2, seed=[SEED, 8], power=k, dist=D)
        plans.append((f"cycle256-random/eps{eps}", build_plan(g, eps, 0, c, dist=D)))

    for j, (name, plan) in enumerate(plans):
        rep = run_global(plan.g, plan.eps, 0, plan.cover, 200, SEED + j, plan=plan)
        wt_ok = reff_ok = True
        for i in range(plan.m):
            rows = {r.name: r for r in check_local_lemma_bound(plan, i, pairs=20, trials=0,
                                                               seed=SEED, dense_limit=0)}
            wt_ok &= rows["wtsum"].ok
            reff_ok &= rows["Reff"].ok
        ok = rep.decomposition_ok and rep.bound_ok and wt_ok and reff_ok
        lines.append(f"{name}: m={plan.m} mean tau {rep.tau.mean:.0f} <= {rep.bound:.3g}")
        if not ok:
            bad.append(name)

    plan = _forced_singleton_plan(64, 0.5)
    traces, pooled, j = [], 0, 0
    while pooled < 10_000:
        tr = simulate_exploration(plan, trial_rng(SEED + 88, j), record=True)
        traces.append(tr)
        pooled += tr.steps
        j += 1
    chi = excision_chi_square(plan, traces)
    ok = not bad and chi.p_value > 0.001 and chi.pooled_steps >= 10_000
    for ln in lines:
        print("   ", ln)
    verdict(8, ok, f"{len(plans)} plans (a)-(c) failures {bad or 0}; chi-square p = "
                   f"{chi.p_value:.3f} on {chi.pooled_steps} pooled steps")


def test_criterion_09_polynomial_growth(verdict):
    eps = 0.5
    means, details, ok = [], [], True
    for side in (8, 16, 32):
        g = make_grid(side, side)
        L = growth_constant(g, eps)
        C = 4.0 * L * L / (1.0 - eps)
        rep = estimate_cover_time(g, eps, SpanningWalk(g, eps, 0), 0, 200, SEED + side)
        means.append(rep.mean)
        ok &= rep.mean <= C * g.n
        details.append(f"n={g.n}: mean {rep.mean:.0f} <= C n = {C * g.n:.3g}")
    ratios = [b / a for a, b in zip(means, means[1:])]
    ok &= all(r <= 4.5 * 4 for r in ratios)
    verdict(9, ok, "; ".join(details) + f"; growth ratios {[round(r, 2) for r in ratios]} (<= 18)")


def test_criterion_10_oracle_cross_check(verdict):
    rng = np.random.default_rng([SEED, 10])
    zs = []
    for j in range(10):
        n = int(rng.integers(5, 41))
        g = make_random_connected(n, float(rng.uniform(0.05, 0.3)), seed=rng)
        target = random_subset(rng, n, 2)
        if j % 2 == 0:
            wg = WeightedGraph(g, rng.uniform(0.1, 3.0, g.m))
            exact = hitting_times(wg, target)
            v = int(np.argmax(exact))
            rep = estimate_weighted_hitting_time(wg, v, target, 10_000, SEED + j)
        else:
            eps = float(rng.choice([0.2, 0.5, 0.8]))
            phi = PhiU(g, target, eps)
            exact = hitting_times(phi.weighted_graph(), target)
            v = int(np.argmax(exact))
            rep = estimate_hitting_time(g, eps, phi, v, target, 10_000, SEED + j)
        zs.append(abs(rep.mean - exact[v]) / rep.std_err)
    ok = all(z <= 3.0 for z in zs)
    verdict(10, ok, f"10 instances x 1e4 trials, |MC - exact|/SE = {[round(float(z), 2) for z in zs]}")


def test_criterion_11_reproducibility(verdict):
    cmd = [sys.executable, "-m", "tbrw", "bench", "--seed", "7"]
    a = subprocess.run(cmd, capture_output=True, check=False)
    b = subprocess.run(cmd, capture_output=True, check=False)
    ok = a.returncode == b.returncode == 0 and a.stdout == b.stdout and len(a.stdout) > 0
    verdict(11, ok, f"two runs of 'bench --seed 7': exit {a.returncode}/{b.returncode}, "
                    f"{len(a.stdout)} bytes, identical={a.stdout == b.stdout}")
