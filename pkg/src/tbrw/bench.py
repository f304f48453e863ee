"""Bound-report suite: every inequality checked at desk scale, deterministic under a seed."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import __version__
from .chain import hitting_times, layer_bounds, layered_alpha, layered_expected_visits
from .cover import (CoverSchedule, build_random_cover, cayley_inequality, cov0_exact,
                    sample_radius_set, singleton_cover, validate_cover)
from .explorer import build_plan, check_local_lemma_bound, choose_k, run_global
from .generators import (AffineCayleySpec, make_affine_cayley, make_complete, make_cycle,
                         make_grid, make_layered, make_path, make_random_connected,
                         make_random_regular)
from .graph import Graph, bfs_distances, weight_field_from_distances
from .strategies import (NaiveToward, PhiU, SpanningWalk, estimate_cover_time, simulate_walk,
                         step_law, trial_rng, weighted_step_law)

BENCH_SCHEMA = "tbrw.bench"
BENCH_VERSION = 1
DEFAULT_SEED = 7


@dataclass
class BoundRow:
    name: str
    ref: str
    lhs: float
    rhs: float
    relation: str  # "<=" or "<"
    tolerance: float
    ok: bool


@dataclass
class BoundReport:
    suite: str
    seed: int
    rows: list[BoundRow]

    @property
    def all_pass(self) -> bool:
        return all(r.ok for r in self.rows)

    def failures(self) -> list[BoundRow]:
        return [r for r in self.rows if not r.ok]

    def to_json(self, config: dict | None = None) -> str:
        config = {"suite": self.suite, "seed": self.seed, **(config or {})}
        doc = {
            "schema": BENCH_SCHEMA,
            "version": BENCH_VERSION,
            "code_version": __version__,
            "config": config,
            "config_hash": config_hash(config),
            "seed": self.seed,
            "all_pass": self.all_pass,
            "rows": [asdict(r) for r in self.rows],
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    def table(self) -> str:
        lines = [f"{'row':<22} {'lhs':>14} {'rel':>3} {'rhs':>14}  result"]
        for r in self.rows:
            lines.append(f"{r.name:<22} {r.lhs:>14.6g} {r.relation:>3} {r.rhs:>14.6g}  "
                         f"{'pass' if r.ok else 'FAIL'}")
        return "\n".join(lines)


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def load_report(text: str) -> dict:
    doc = json.loads(text)
    if doc.get("schema") != BENCH_SCHEMA or doc.get("version") != BENCH_VERSION:
        raise ValueError(f"unsupported bench report {doc.get('schema')!r} v{doc.get('version')!r}")
    return doc


# -- shared corpus ---------------------------------------------------------------------


def small_corpus(count: int, seed: int, max_n: int = 25) -> list[tuple[str, Graph]]:
    """Connected graphs with ``n <= max_n`` cycling through the standard families."""
    rng = np.random.default_rng(seed)
    cay, _ = make_affine_cayley(AffineCayleySpec(3, 2))
    out = []
    for j in range(count):
        fam = j % 6
        if fam == 0:
            n = int(rng.integers(2, max_n + 1))
            out.append((f"path{n}", make_path(n)))
        elif fam == 1:
            a = int(rng.integers(2, 6))
            b = int(rng.integers(2, max(3, max_n // a + 1)))
            out.append((f"grid{a}x{b}", make_grid(a, b)))
        elif fam == 2:
            d = int(rng.choice([3, 4]))
            n = int(rng.integers(3, max_n // 2 + 1)) * 2
            n = max(n, d + 2)
            out.append((f"reg{n}d{d}", make_random_regular(n, d, seed=rng)))
        elif fam == 3:
            n = int(rng.integers(6, max_n + 1))
            out.append((f"layered{n}", make_layered(n)[0]))
        elif fam == 4:
            out.append(("cayley3", cay))
        else:
            n = int(rng.integers(4, max_n + 1))
            out.append((f"gnp{n}", make_random_connected(n, float(rng.uniform(0.05, 0.3)), seed=rng)))
    return out


def random_subset(rng: np.random.Generator, n: int, max_size: int | None = None) -> list[int]:
    size = int(rng.integers(1, (max_size or max(1, n // 3)) + 1))
    return sorted(rng.choice(n, size=min(size, n), replace=False).tolist())


def localized_region(g: Graph, U, v: int, eps: float) -> np.ndarray:
    """``W = V \\ {w : dist(w, U) > dist(v, U) + 2 log_{1/(1-eps)} n}``."""
    d = bfs_distances(g, U)
    thresh = d[v] + 2.0 * math.log(g.n) / -math.log1p(-eps)
    return np.flatnonzero(d <= thresh)


def growth_constant(g: Graph, eps: float) -> float:
    """``L = max_v sum_k |B(v, k)| (1 - eps)^k``, summed until the balls fill ``V``."""
    best = 0.0
    for v in range(g.n):
        d = bfs_distances(g, [v])
        counts = np.bincount(d)
        sizes = np.cumsum(counts)
        R = len(sizes) - 1
        q = 1.0 - eps
        s = float(sum(sizes[k] * q ** k for k in range(R)))
        s += g.n * q ** R / (1.0 - q)  # tail: |B(v, k)| = n for k >= R
        best = max(best, s)
    return best


# -- rows --------------------------------------------------------------------------------


def _row(name, ref, lhs, rhs, tamper, relation="<=", tol=0.0) -> BoundRow:
    rhs = float(rhs) * tamper.get(name, 1.0)
    lhs = float(lhs)
    if relation == "<":
        ok = lhs < rhs
    else:
        ok = lhs <= rhs + tol
    return BoundRow(name, ref, lhs, rhs, relation, tol, bool(ok))


def _emulation(seed, tamper):
    rng = np.random.default_rng([seed, 1])
    worst = 0.0
    for g_name, g in small_corpus(12, seed + 1, 30):
        for _ in range(4):
            U = random_subset(rng, g.n)
            eps = float(rng.choice([0.1, 0.3, 0.5, 0.9]))
            v = int(rng.integers(g.n))
            phi = PhiU(g, U, eps)
            tv = 0.5 * np.abs(step_law(g, eps, phi, [v]) - weighted_step_law(phi.weighted_graph(), v)).sum()
            worst = max(worst, tv)
    return [_row("emulation_tv", "emulation", worst, 1e-12, tamper)]


def _hitting(seed, tamper):
    rng = np.random.default_rng([seed, 2])
    worst_g = worst_w = 0.0
    for _, g in small_corpus(18, seed + 2):
        for _ in range(5):
            U = random_subset(rng, g.n)
            v = int(rng.integers(g.n))
            eps = float(rng.choice([0.1, 0.5]))
            d = bfs_distances(g, U)
            h = hitting_times(weight_field_from_distances(g, d, eps), U)[v]
            worst_g = max(worst_g, h / (2.0 * g.m / eps))
            W = localized_region(g, U, v, eps)
            worst_w = max(worst_w, h / (2.0 / eps * (g.induced_edge_count(W) + 1)))
    return [_row("hitting_global", "hitting bound", worst_g, 1.0, tamper),
            _row("hitting_local", "localized hitting bound", worst_w, 1.0, tamper)]


def _layer(seed, tamper):
    rng = np.random.default_rng([seed, 3])
    worst = 0.0
    for _, g in small_corpus(10, seed + 3):
        U = random_subset(rng, g.n)
        eps = float(rng.choice([0.1, 0.3, 0.5]))
        for lb in layer_bounds(g, U, eps):
            worst = max(worst, lb.T / lb.rhs)
    return [_row("layer_bound", "per-layer bound", worst, 1.0, tamper)]


def _layered(seed, tamper):
    err = 0.0
    for eps in (0.0, 0.01, 0.05):
        a = layered_alpha(eps)
        for k in range(4, 9):
            err = max(err, abs(layered_expected_visits(eps, k) / a ** (k - 3) - 1.0))
    gap = max(4.0 * (1.0 - 5.0 * e) - layered_alpha(e) for e in np.linspace(0.0, 0.99, 100))
    dev, se = layered_visits_mc(0.05, 2000, seed)
    return [_row("layered_closed_form", "layered ratio", err, 1e-9, tamper),
            _row("layered_alpha_lower", "alpha lower bound", gap, 0.0, tamper, tol=1e-12),
            _row("layered_visits_mc", "layered visits (3 SE)", dev, 3.0 * se, tamper)]


def layered_visits_mc(eps: float, trials: int, seed: int, n: int = 14) -> tuple[float, float]:
    """``|mean - alpha^(k-3)|`` and the standard error for visits to the top layer from ``V_2``."""
    g, layer = make_layered(n)
    layer = np.asarray(layer)
    k = max(layer) + 1
    top = np.flatnonzero(layer == k - 1).tolist()
    bottom = np.flatnonzero(layer == 1).tolist()
    start = int(np.flatnonzero(layer == 2)[0])
    phi = NaiveToward(g, bottom)
    vals = np.empty(trials)
    for j in range(trials):
        tr = simulate_walk(g, eps, phi, start, trial_rng(seed, j), target=bottom, cap=10**5)
        vals[j] = tr.visits_before(top, bottom)
    se = vals.std(ddof=1) / math.sqrt(trials)
    return abs(vals.mean() - layered_alpha(eps) ** (k - 3)), float(se)


def _covers(seed, tamper):
    worst_k = 0.0
    worst_r = 0.0
    for j, g in enumerate([make_path(256), make_random_regular(256, 3, seed=seed)]):
        for k in (2, 3):
            c = build_random_cover(g, k, seed=[seed, j, k])
            rep = validate_cover(g, c)
            if not rep.coverage_ok:
                worst_k = math.inf
            worst_k = max(worst_k, rep.K_actual / CoverSchedule(g.n, k).overlap_threshold())
            worst_r = max(worst_r, rep.max_radius - (2 ** (k - 1) - 1))
    return [_row("cover_overlap", "random cover K", worst_k, 1.0, tamper),
            _row("cover_radius", "random cover radius", worst_r, 0.0, tamper)]


def _cayley(seed, tamper):
    rng = np.random.default_rng([seed, 6])
    rows = []
    for p, radius, count in ((5, 2, 100), (3, 3, 50)):
        g, lab = make_affine_cayley(AffineCayleySpec(p, radius))
        worst = -math.inf
        for _ in range(count):
            c = int(rng.integers(g.n))
            chk = cayley_inequality(g, lab, sample_radius_set(g, c, radius, rng), c)
            worst = max(worst, chk.rhs - chk.lhs)
        rows.append(_row(f"cayley_r{radius}_p{p}", f"radius-{radius} overlap", worst, 0.0, tamper))
    rows.append(_row("cov0_complete", "cov0 on K_6", abs(cov0_exact(make_complete(6)) - 6.0), 0.0,
                     tamper, tol=1e-12))
    return rows


def _global(seed, tamper):
    g = make_cycle(64)
    eps = 0.5
    k = choose_k(eps, g.n)
    c = singleton_cover(g)
    c.power = k
    plan = build_plan(g, eps, 0, c)
    rng = np.random.default_rng([seed, 8])
    worst_w = worst_r = 0.0
    for i in rng.choice(plan.m, size=4, replace=False).tolist():
        rows = {r.name: r for r in check_local_lemma_bound(plan, i, pairs=10, trials=20, seed=seed)}
        worst_w = max(worst_w, rows["wtsum"].lhs / rows["wtsum"].rhs)
        worst_r = max(worst_r, rows["Reff"].lhs / rows["Reff"].rhs)
    rep = run_global(g, eps, 0, c, 30, seed, plan=plan)
    return [_row("wtsum", "weight sum", worst_w, 1.0, tamper, tol=1e-8),
            _row("reff", "resistance", worst_r, 1.0, tamper, tol=1e-8),
            _row("tau_le_sum_L", "decomposition", float((rep.taus - rep.sum_L).max()), 0.0, tamper),
            _row("global_mean", "global strategy", rep.tau.mean, rep.bound, tamper)]


def _spanning(seed, tamper):
    g = make_grid(8, 8)
    eps = 0.5
    L = growth_constant(g, eps)
    rep = estimate_cover_time(g, eps, SpanningWalk(g, eps, 0), 0, 100, seed)
    return [_row("spanning_grid8", "polynomial growth", rep.mean, 4 * L * L / (1 - eps) * g.n, tamper)]


def _oracle(seed, tamper):
    rng = np.random.default_rng([seed, 10])
    worst = 0.0
    for j in range(2):
        g = make_random_connected(12, 0.2, seed=rng)
        U = random_subset(rng, g.n, 2)
        eps = 0.4
        phi = PhiU(g, U, eps)
        exact = hitting_times(phi.weighted_graph(), U)
        v = int(np.argmax(exact))
        vals = [simulate_walk(g, eps, phi, v, trial_rng(seed + 100 * j, t), target=U,
                              record=False).steps for t in range(2000)]
        se = np.std(vals, ddof=1) / math.sqrt(len(vals))
        worst = max(worst, abs(np.mean(vals) - exact[v]) / (3 * se))
    return [_row("oracle_mc", "Monte Carlo vs exact (3 SE)", worst, 1.0, tamper)]


SECTIONS: dict[str, Callable] = {
    "emulation": _emulation,
    "hitting": _hitting,
    "layer": _layer,
    "layered": _layered,
    "covers": _covers,
    "cayley": _cayley,
    "global": _global,
    "spanning": _spanning,
    "oracle": _oracle,
}


def bench_suite(seed: int = DEFAULT_SEED, tamper: dict[str, float] | None = None,
                sections: list[str] | None = None) -> BoundReport:
    """Run the ``paper-bounds`` suite. ``tamper`` scales named rows' right-hand sides."""
    tamper = tamper or {}
    rows: list[BoundRow] = []
    for name in sections or list(SECTIONS):
        rows.extend(SECTIONS[name](seed, tamper))
    return BoundReport("paper-bounds", seed, rows)
