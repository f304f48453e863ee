"""Command-line front end: ``tbrw generate|cover|simulate|analyze|explore|bench``.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or input,
3 a bound violation reported by ``bench``. Worker threads for Monte Carlo
trials come from ``TBRW_THREADS`` (default 1); results do not depend on it.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .bench import DEFAULT_SEED, bench_suite, config_hash
from .chain import ResistanceSolver, hitting_times, matthews_bound, stationary
from .cover import (Cover, build_random_cover, build_sqrtlog_cover, singleton_cover,
                    validate_cover, whole_cover)
from .explorer import auto_cover, build_plan, run_global
from .generators import (AffineCayleySpec, make_affine_cayley, make_binary_tree, make_complete,
                         make_cycle, make_grid, make_layered, make_path, make_random_connected,
                         make_random_regular, make_star)
from .graph import Graph, GraphFormatError, WeightedGraph, weight_field
from .strategies import (ClosestUncovered, EstimationError, NaiveToward, PhiU, SpanningWalk,
                         UniformBias, estimate_cover_time, estimate_hitting_time, step_cap)

RESULT_SCHEMA = "tbrw.result"
RESULT_VERSION = 1
CSV_VERSION = 1

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_BOUND = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    out: str | None = None
    csv: str | None = None
    cap_multiplier: float = 10.0

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("out")
        d.pop("csv")
        return config_hash(d)


def artifact(config: ExperimentConfig, result: dict) -> dict:
    return {
        "schema": RESULT_SCHEMA,
        "version": RESULT_VERSION,
        "code_version": __version__,
        "config": config.to_dict(),
        "config_hash": config.hash(),
        "seed": config.seed,
        "result": result,
    }


def load_artifact(text: str) -> dict:
    doc = json.loads(text)
    if doc.get("schema") != RESULT_SCHEMA or doc.get("version") != RESULT_VERSION:
        raise ValueError(f"unsupported result artifact {doc.get('schema')!r} v{doc.get('version')!r}")
    return doc


def _emit(config: ExperimentConfig, result: dict) -> None:
    text = json.dumps(artifact(config, result), sort_keys=True, indent=1) + "\n"
    if config.out:
        Path(config.out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_csv(config: ExperimentConfig, header: list[str], rows) -> None:
    if not config.csv:
        return
    with open(config.csv, "w", newline="") as fh:
        fh.write(f"# schema=tbrw.trials version={CSV_VERSION} config_hash={config.hash()} "
                 f"seed={config.seed} code_version={__version__}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _parse_set(text: str | None, n: int, what: str) -> list[int]:
    if text is None:
        raise ConfigError(f"{what} is required")
    p = Path(text)
    raw = p.read_text() if p.exists() else text
    try:
        vals = sorted({int(t) for t in raw.replace(",", " ").split()})
    except ValueError as exc:
        raise ConfigError(f"bad {what}: {exc}") from None
    if not vals or vals[0] < 0 or vals[-1] >= n:
        raise ConfigError(f"{what} must be non-empty with ids in [0, {n})")
    return vals


def _load_graph(path: str) -> Graph:
    try:
        return Graph.load(path)
    except OSError as exc:
        raise ConfigError(f"cannot read graph: {exc}") from None


def _check_eps(eps: float, open_interval: bool = False) -> float:
    if not (0.0 < eps < 1.0 if open_interval else 0.0 <= eps <= 1.0):
        raise ConfigError(f"eps={eps} out of range")
    return eps


# -- subcommands ------------------------------------------------------------------------


def cmd_generate(a, config) -> int:
    try:
        g, meta = _generate(a)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not a.out:
        raise ConfigError("generate needs --out")
    g.save(a.out)
    side = {"schema": "tbrw.graph-meta", "version": 1, "code_version": __version__,
            "config_hash": config.hash(), "seed": config.seed, "n": g.n, "m": g.m, **meta}
    Path(a.out + ".json").write_text(json.dumps(side, sort_keys=True) + "\n")
    print(f"wrote {a.out} (n={g.n}, m={g.m})")
    return EXIT_OK


def _generate(a) -> tuple[Graph, dict]:
    fam = a.family
    meta: dict = {"family": fam}
    if fam == "path":
        g = make_path(a.n)
    elif fam == "cycle":
        g = make_cycle(a.n)
    elif fam == "grid":
        g = make_grid(a.rows, a.cols or a.rows)
    elif fam == "complete":
        g = make_complete(a.n)
    elif fam == "star":
        g = make_star(a.n)
    elif fam == "tree":
        g = make_binary_tree(a.n)
    elif fam == "regular":
        g = make_random_regular(a.n, a.d, seed=a.seed)
    elif fam == "random":
        g = make_random_connected(a.n, a.p_edge, seed=a.seed)
    elif fam == "layered":
        g, layer = make_layered(a.n)
        meta["layer"] = layer
    elif fam == "cayley":
        g, lab = make_affine_cayley(AffineCayleySpec(a.prime, a.radius))
        meta.update(part=lab.part, element=[list(e) for e in lab.element], p=a.prime,
                    radius=a.radius)
    else:
        raise ConfigError(f"unknown family {fam!r}")
    return g, meta


def cmd_cover(a, config) -> int:
    g = _load_graph(a.graph)
    if a.validate:
        try:
            c = Cover.from_json(Path(a.validate).read_text())
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad cover file: {exc}") from None
    elif a.builder == "random":
        c = build_random_cover(g, a.k, seed=a.seed, max_retries=a.max_retries, power=a.power)
    elif a.builder == "sqrtlog":
        c = build_sqrtlog_cover(g, seed=a.seed, max_retries=a.max_retries)
    elif a.builder == "singleton":
        c = singleton_cover(g)
    else:
        c = whole_cover(g, power=a.power)
    rep = validate_cover(g, c, power=c.power)
    result = {"cover": json.loads(c.to_json(rep.K_actual)), "report": rep.to_dict(),
              "sets": c.m, "attempts": c.attempts}
    if a.cover_out:
        Path(a.cover_out).write_text(c.to_json(rep.K_actual) + "\n")
        result.pop("cover")
    _emit(config, result)
    return EXIT_OK if rep.valid else EXIT_RUNTIME


def _strategy(a, g: Graph, eps: float):
    name = a.strategy
    if name == "phi_u":
        return PhiU(g, _parse_set(a.set, g.n, "--set"), eps)
    if name == "naive":
        return NaiveToward(g, _parse_set(a.set or a.target, g.n, "--set"))
    if name == "spanning":
        return SpanningWalk(g, eps, a.start)
    if name == "uniform":
        return UniformBias(g)
    if name == "closest":
        return ClosestUncovered(g)
    raise ConfigError(f"unknown strategy {name!r}")


def cmd_simulate(a, config) -> int:
    g = _load_graph(a.graph)
    eps = _check_eps(a.eps)
    if not 0 <= a.start < g.n:
        raise ConfigError("start out of range")
    if a.trials < 1:
        raise ConfigError("trials must be >= 1")
    phi = _strategy(a, g, eps)
    cap = step_cap(g.n, config.cap_multiplier)
    if a.target:
        target = _parse_set(a.target, g.n, "--target")
        rep = estimate_hitting_time(g, eps, phi, a.start, target, a.trials, a.seed, cap)
    else:
        rep = estimate_cover_time(g, eps, phi, a.start, a.trials, a.seed, cap)
    _write_csv(config, ["trial", "value", "capped"],
               [(j, int(v), int(v >= cap)) for j, v in enumerate(rep.values)])
    _emit(config, {"strategy": phi.name, "estimate": rep.to_dict(), "cap": cap})
    return EXIT_OK


def cmd_analyze(a, config) -> int:
    g = _load_graph(a.graph)
    if a.weights:
        try:
            wg = WeightedGraph.loads_weights(g, Path(a.weights).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read weights: {exc}") from None
    elif a.set is not None:
        wg = weight_field(g, _parse_set(a.set, g.n, "--set"), _check_eps(a.eps))
    else:
        wg = WeightedGraph.unweighted(g)
    result: dict = {"pi": stationary(wg).tolist()}
    if a.target:
        tgt = _parse_set(a.target, g.n, "--target")
        result["hitting_times"] = {"target": tgt, "values": hitting_times(wg, tgt).tolist()}
    if a.pairs:
        solver = ResistanceSolver(wg)
        pairs = []
        for tok in a.pairs.split(","):
            u, v = (int(x) for x in tok.split(":"))
            pairs.append({"u": u, "v": v, "R_eff": solver(u, v)})
        result["resistance"] = pairs
    if a.matthews:
        result["matthews"] = matthews_bound(wg, _parse_set(a.matthews, g.n, "--matthews"))
    _emit(config, result)
    return EXIT_OK


def cmd_explore(a, config) -> int:
    g = _load_graph(a.graph)
    eps = _check_eps(a.eps, open_interval=True)
    if not 0 <= a.start < g.n:
        raise ConfigError("start out of range")
    if a.cover == "auto":
        c = auto_cover(g, eps, a.seed)
    else:
        try:
            c = Cover.from_json(Path(a.cover).read_text())
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad cover file: {exc}") from None
    plan = build_plan(g, eps, a.start, c)
    rep = run_global(g, eps, a.start, c, a.trials, a.seed, step_cap(g.n, config.cap_multiplier),
                     plan=plan)
    _write_csv(config, ["trial", "tau", "sum_L"],
               [(j, int(t), int(s)) for j, (t, s) in enumerate(zip(rep.taus, rep.sum_L))])
    table = [{"bound": "tau <= sum L_i", "lhs": int((rep.taus - rep.sum_L).max()), "rhs": 0,
              "pass": rep.decomposition_ok},
             {"bound": "mean tau <= 32 eps^-1 Delta (r+1) K n log^2 n", "lhs": rep.tau.mean,
              "rhs": rep.bound, "pass": rep.bound_ok}]
    _emit(config, {"k": plan.k, "m": plan.m, "r": plan.r, "K": plan.K, **rep.to_dict(),
                   "bounds": table})
    return EXIT_OK if rep.decomposition_ok else EXIT_RUNTIME


def cmd_bench(a, config) -> int:
    if a.suite != "paper-bounds":
        raise ConfigError(f"unknown suite {a.suite!r}")
    tamper = {}
    for tok in a.tamper or []:
        name, _, val = tok.partition("=")
        try:
            tamper[name] = float(val)
        except ValueError:
            raise ConfigError(f"bad --tamper {tok!r}") from None
    rep = bench_suite(a.seed, tamper)
    text = rep.to_json({"tamper": tamper})
    if a.out:
        Path(a.out).write_text(text)
    else:
        sys.stdout.write(text)
    sys.stderr.write(rep.table() + "\n")
    if not rep.all_pass:
        sys.stderr.write("bound violations: " + ", ".join(r.name for r in rep.failures()) + "\n")
        return EXIT_BOUND
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tbrw", description="Time-biased random walk experiments")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        if seed:
            sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--out", help="output JSON path (default stdout)")

    s = sub.add_parser("generate", help="write a graph file and JSON sidecar")
    s.add_argument("family", choices=["path", "cycle", "grid", "complete", "star", "tree",
                                      "regular", "random", "layered", "cayley"])
    s.add_argument("--n", type=int, default=16)
    s.add_argument("--rows", type=int, default=4)
    s.add_argument("--cols", type=int)
    s.add_argument("--d", type=int, default=3)
    s.add_argument("--p-edge", type=float, default=0.1)
    s.add_argument("--prime", type=int, default=3)
    s.add_argument("--radius", type=int, default=2, choices=[2, 3])
    common(s)

    s = sub.add_parser("cover", help="build or validate an (r, K)-cover")
    s.add_argument("--graph", required=True)
    s.add_argument("--builder", default="random", choices=["random", "sqrtlog", "singleton", "whole"])
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--power", type=int, default=1)
    s.add_argument("--max-retries", type=int, default=100)
    s.add_argument("--validate", help="validate this cover JSON instead of building one")
    s.add_argument("--cover-out", help="write the cover JSON here")
    common(s)

    s = sub.add_parser("simulate", help="Monte Carlo cover or hitting times")
    s.add_argument("--graph", required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--strategy", default="phi_u",
                   choices=["phi_u", "naive", "spanning", "uniform", "closest"])
    s.add_argument("--set", help="U for phi_u / naive (ids or a file)")
    s.add_argument("--target", help="hitting target; omit for cover time")
    s.add_argument("--start", type=int, default=0)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--cap-multiplier", type=float, default=10.0)
    s.add_argument("--csv", help="per-trial CSV path")
    common(s)

    s = sub.add_parser("analyze", help="exact chain quantities")
    s.add_argument("--graph", required=True)
    s.add_argument("--weights", help="file with lines 'u v w'")
    s.add_argument("--set", help="U for the w_U weight field")
    s.add_argument("--eps", type=float, default=0.5)
    s.add_argument("--target")
    s.add_argument("--pairs", help="resistance pairs 'u:v,u:v'")
    s.add_argument("--matthews", help="vertex set for the Matthews bound")
    common(s, seed=False)

    s = sub.add_parser("explore", help="run the global exploration strategy")
    s.add_argument("--graph", required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--start", type=int, default=0)
    s.add_argument("--cover", default="auto", help="cover JSON for G^k, or 'auto'")
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--cap-multiplier", type=float, default=10.0)
    s.add_argument("--csv")
    common(s)

    s = sub.add_parser("bench", help="bound-report suite")
    s.add_argument("--suite", default="paper-bounds")
    s.add_argument("--tamper", action="append", metavar="ROW=FACTOR",
                   help="scale a row's right-hand side (negative control)")
    common(s)
    return p


HANDLERS = {"generate": cmd_generate, "cover": cmd_cover, "simulate": cmd_simulate,
            "analyze": cmd_analyze, "explore": cmd_explore, "bench": cmd_bench}


def config_from_args(a: argparse.Namespace) -> ExperimentConfig:
    params = {k: v for k, v in vars(a).items()
              if k not in ("command", "seed", "out", "csv", "cap_multiplier")}
    return ExperimentConfig(a.command, params, getattr(a, "seed", DEFAULT_SEED), a.out,
                            getattr(a, "csv", None), getattr(a, "cap_multiplier", 10.0))


def run(config: ExperimentConfig) -> int:
    a = argparse.Namespace(command=config.command, seed=config.seed, out=config.out,
                           csv=config.csv, cap_multiplier=config.cap_multiplier, **config.params)
    try:
        return HANDLERS[config.command](a, config)
    except GraphFormatError as exc:
        sys.stderr.write(f"error: malformed graph at line {exc.lineno}: {exc}\n")
        return EXIT_CONFIG
    except (ConfigError, KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except (EstimationError, RuntimeError, ValueError, ArithmeticError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME


def main(argv: list[str] | None = None) -> int:
    a = build_parser().parse_args(argv)
    return run(config_from_args(a))


if __name__ == "__main__":
    sys.exit(main())
