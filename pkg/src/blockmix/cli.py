"""Experiment runner CLI.

Every run resolves its configuration (config file merged with flags),
executes, and writes outputs atomically into --out: resolved-config.json,
metadata.json, and the subcommand's CSVs/JSON reports. Identical
config+seed gives byte-identical CSVs; wall-clock only ever lands in
metadata.json.

Exit codes: 0 success, 1 validation failure, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import tempfile
import time
from typing import Optional

import numpy as np

from . import __version__
from .dynamics import (
    ChainSpec,
    Configuration,
    ErgodicityError,
    GreedyFailure,
    Probe,
    greedy_initial_retry,
    run_chain,
)
from .graph import Graph, gen_gnp, read_graph, write_graph
from .partition import (
    BlockPartition,
    Params,
    PartitionError,
    build_partition,
    partition_from_json,
    partition_to_json,
    path_density,
    singleton_partition,
    validate_partition,
)
from .rngutil import master_rng

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    pass


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _validate_schema(cfg: dict, schema: dict) -> None:
    try:
        import jsonschema

        jsonschema.validate(cfg, schema)
    except ImportError:  # pragma: no cover - jsonschema is normally present
        pass
    except Exception as exc:
        raise ConfigError(f"config failed schema validation: {exc}") from exc


GRAPH_SCHEMA = {
    "type": "object",
    "properties": {
        "generate": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "d": {"type": "number", "minimum": 0},
                "seed": {"type": "integer"},
            },
            "required": ["n", "d"],
        },
        "file": {"type": "string"},
    },
}

PARAMS_SCHEMA = {
    "type": "object",
    "properties": {
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "k": {"type": "integer", "minimum": 1},
        "d": {"type": "number"},
        "lambda": {"type": "number", "minimum": 0},
        "delta": {"type": "number", "minimum": 0},
        "r": {"type": "integer", "minimum": 0},
        "cycle_cap": {"type": "integer", "minimum": 0},
    },
}


def _graph_from_config(cfg: dict, seed: int) -> Graph:
    gcfg = cfg.get("graph", {})
    _validate_schema(gcfg, GRAPH_SCHEMA)
    if "file" in gcfg:
        return read_graph(gcfg["file"])
    gen = gcfg.get("generate")
    if not gen:
        raise ConfigError("config needs graph.generate {n,d,seed} or graph.file")
    return gen_gnp(int(gen["n"]), float(gen["d"]), int(gen.get("seed", seed)))


def _params_from_config(cfg: dict, g: Graph) -> Params:
    from .partition import ALPHA

    pcfg = cfg.get("params", {})
    _validate_schema(pcfg, PARAMS_SCHEMA)
    d = float(pcfg.get("d", cfg.get("graph", {}).get("generate", {}).get("d", 0.0)))
    if d <= 0:
        d = max(1.0, 2.0 * g.m / max(g.n, 1))
    epsilon = float(pcfg.get("epsilon", 0.2))
    return Params(
        epsilon=epsilon,
        d=d,
        k=int(pcfg.get("k", max(2, math.ceil((ALPHA + epsilon) * d)))),
        n=g.n,
        lam=float(pcfg.get("lambda", 0.0)),
        r=pcfg.get("r"),
        delta=pcfg.get("delta"),
        cycle_len_cap=pcfg.get("cycle_cap"),
    )


def _partition_for(g: Graph, p: Params, cfg: dict) -> BlockPartition:
    mode = cfg.get("partition", "build")
    if mode == "singleton":
        return singleton_partition(g)
    if isinstance(mode, str) and mode not in ("build", "singleton"):
        with open(mode, "r", encoding="utf-8") as fh:
            return partition_from_json(g, fh.read())
    return build_partition(g, p)


class OutputDir:
    """Collects outputs, then commits them atomically (temp dir + rename)."""

    def __init__(self, path: str):
        self.path = path
        self._files: dict[str, str] = {}
        self._t0 = time.time()

    def add_text(self, name: str, text: str) -> None:
        self._files[name] = text

    def add_json(self, name: str, obj) -> None:
        self._files[name] = json.dumps(obj, indent=1, sort_keys=True, default=str) + "\n"

    def add_csv(self, name: str, header: list[str], rows) -> None:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_csv_cell(x) for x in row))
        self._files[name] = "\n".join(lines) + "\n"

    def commit(self, resolved_config: dict) -> None:
        self.add_json("resolved-config.json", resolved_config)
        self.add_json(
            "metadata.json",
            {
                "blockmix_version": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "wall_seconds": time.time() - self._t0,
            },
        )
        parent = os.path.dirname(os.path.abspath(self.path)) or "."
        os.makedirs(parent, exist_ok=True)
        tmp = tempfile.mkdtemp(prefix=".blockmix-", dir=parent)
        try:
            for name, text in self._files.items():
                with open(os.path.join(tmp, name), "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(text)
            os.makedirs(self.path, exist_ok=True)
            for name in self._files:
                os.replace(os.path.join(tmp, name), os.path.join(self.path, name))
        finally:
            for leftover in os.listdir(tmp):
                os.unlink(os.path.join(tmp, leftover))
            os.rmdir(tmp)


def _csv_cell(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def cmd_gen_graph(args, cfg) -> int:
    g = gen_gnp(cfg["generate"]["n"], cfg["generate"]["d"], cfg["generate"].get("seed", args.seed))
    write_graph(g, args.graph_out)
    print(f"wrote {args.graph_out}: n={g.n} m={g.m}")
    return EXIT_OK


def cmd_partition(args, cfg) -> int:
    g = _graph_from_config(cfg, args.seed)
    p = _params_from_config(cfg, g)
    if args.r is not None:
        p.r = args.r
    part = build_partition(g, p)
    out = OutputDir(args.out)
    out.add_text("partition.json", partition_to_json(part))
    max_j, hist, npaths = path_density(g, part, p)
    out.add_json(
        "partition-summary.json",
        {
            "n_blocks": part.n_blocks,
            "max_block_size": max(b.size for b in part.blocks),
            "boundary_size": len(part.boundary),
            "kinds": _kind_counts(part),
            "path_density_max_J": max_j,
            "path_density_paths": npaths,
            "path_density_hist": hist,
        },
    )
    out.commit(_resolved(args, cfg))
    return EXIT_OK


def _kind_counts(part: BlockPartition) -> dict:
    kinds = {"singleton": 0, "tree": 0, "unicyclic": 0}
    for b in part.blocks:
        kinds[b.kind] += 1
    return kinds


def cmd_validate(args, cfg) -> int:
    g = _graph_from_config(cfg, args.seed)
    p = _params_from_config(cfg, g)
    if args.r is not None:
        p.r = args.r
    part = _partition_for(g, p, cfg)
    report = validate_partition(g, part, p, rng=master_rng(args.seed))
    out = OutputDir(args.out)
    out.add_text("validation-report.json", report.to_json() + "\n")
    out.commit(_resolved(args, cfg))
    print(report.to_json())
    return EXIT_OK if report.hard_ok() else EXIT_VALIDATION


def cmd_sample(args, cfg) -> int:
    from .blocksampler import sample_block_coloring

    g = _graph_from_config(cfg, args.seed)
    p = _params_from_config(cfg, g)
    part = _partition_for(g, p, cfg)
    rng = master_rng(args.seed)
    cfg0 = greedy_initial_retry(g, p.k, args.seed, retries=args.init_retries)
    draws = int(cfg.get("draws", 1))
    rows = []
    for i in range(draws):
        bi = int(rng.integers(part.n_blocks))
        block = part.blocks[bi]
        colors = sample_block_coloring(g, block, cfg0.colors, p.k, rng)
        for u, c in sorted(colors.items()):
            cfg0.colors[u] = c
            rows.append((i, bi, u, c))
    out = OutputDir(args.out)
    out.add_csv("samples.csv", ["draw", "block", "vertex", "color"], rows)
    out.commit(_resolved(args, cfg))
    return EXIT_OK


def cmd_run(args, cfg) -> int:
    g = _graph_from_config(cfg, args.seed)
    p = _params_from_config(cfg, g)
    chain = cfg.get("chain", {})
    kind = chain.get("kind", "glauber")
    model = chain.get("model", "coloring")
    steps = int(chain.get("steps", 1000))
    part = _partition_for(g, p, cfg) if kind == "block" else None
    spec = ChainSpec(
        kind=kind, k=p.k, lam=p.lam, model=model, partition=part, seed=args.seed, force=args.force
    )
    if model == "coloring":
        cfg0 = greedy_initial_retry(g, p.k, args.seed, retries=args.init_retries)
    else:
        cfg0 = Configuration(model="hardcore", occupied=set())
    probes = []
    for pr in cfg.get("probes", []):
        probes.append(_make_probe(pr, g, p))
    rng = master_rng(args.seed)
    final = run_chain(spec, g, cfg0, steps, probes, rng=rng)
    out = OutputDir(args.out)
    rows = []
    for pr in probes:
        for rec in pr.records:
            rows.append((rec[0], pr.name) + tuple(rec[1:]))
    rows.sort(key=lambda r: (r[0], r[1]))
    out.add_csv("probes.csv", ["step", "probe_name", "value"], rows)
    from .dynamics import checkpoint_to_json

    out.add_text("checkpoint.json", checkpoint_to_json(final, rng) + "\n")
    out.commit(_resolved(args, cfg))
    return EXIT_OK


def _make_probe(pr: dict, g: Graph, p: Params) -> Probe:
    kind = pr.get("kind")
    cadence = int(pr.get("cadence", 100))
    if kind == "avail":
        v = int(pr["vertex"])

        def fn(cfg, t, _v=v):
            used = {int(cfg.colors[x]) for x in g.neighbors(_v)}
            return (p.k - len(used),)

        return Probe(name=f"avail_{v}", cadence=cadence, fn=fn)
    if kind == "occupancy":
        return Probe(name="occupancy", cadence=cadence, fn=lambda cfg, t: (len(cfg.occupied),))
    if kind == "distinct_colors":
        return Probe(
            name="distinct_colors",
            cadence=cadence,
            fn=lambda cfg, t: (len(set(int(c) for c in cfg.colors)),),
        )
    raise ConfigError(f"unknown probe kind {kind!r}")


def cmd_couple(args, cfg) -> int:
    from .coupling import (
        CoupledState,
        contraction_experiment,
        coupling_time,
        dist,
        run_coupled,
        sample_adjacent_pair,
    )
    from .dynamics import block_step

    g = _graph_from_config(cfg, args.seed)
    p = _params_from_config(cfg, g)
    part = _partition_for(g, p, cfg)
    mode = cfg.get("mode", "trace")
    rng = master_rng(args.seed)
    out = OutputDir(args.out)
    if mode == "contraction":
        rep = contraction_experiment(g, part, p.k, int(cfg.get("pairs", 1000)), rng)
        out.add_json("contraction.json", rep)
    elif mode == "coupling-time":
        rows = coupling_time(
            g,
            part,
            p.k,
            T_max=int(cfg.get("t_max", 100 * part.n_blocks)),
            replicas=int(cfg.get("replicas", 8)),
            seed=args.seed,
            threads=args.threads,
        )
        out.add_csv(
            "coupling-time.csv",
            ["replica", "vertex", "steps", "coalesced"],
            [(r["replica"], r["vertex"], r["steps"], int(r["coalesced"])) for r in rows],
        )
    else:
        X = greedy_initial_retry(g, p.k, args.seed, retries=args.init_retries)
        for _ in range(int(cfg.get("burn", 2 * part.n_blocks))):
            block_step(X, g, part, p.k, rng)
        made = None
        while made is None:
            made = sample_adjacent_pair(X, g, part, p.k, rng)
            if made is None:
                block_step(X, g, part, p.k, rng)
        s, _ = made
        trace: list = [(0, dist(s, part), len(s.diff), len(s.diff & part.boundary), len(s.D_hist))]
        run_coupled(s, g, part, p.k, rng, int(cfg.get("steps", 10 * part.n_blocks)), trace=trace)
        out.add_csv("couple.csv", ["t", "dist", "diff_size", "dt_size", "dhist_size"], trace)
    out.commit(_resolved(args, cfg))
    return EXIT_OK


def cmd_percolate(args, cfg) -> int:
    from .percolation import beta_weights, domination_test, tail_experiment

    g = _graph_from_config(cfg, args.seed)
    p = _params_from_config(cfg, g)
    part = _partition_for(g, p, cfg)
    rng = master_rng(args.seed)
    out = OutputDir(args.out)
    report: dict = {}

    blocks = [b for b in part.blocks if b.size > 1] or part.blocks
    block = blocks[int(cfg.get("block", 0)) % len(blocks)]
    u_star = int(cfg.get("u_star", block.outer_boundary[0]))
    trials = int(cfg.get("trials", 10000))
    variant = cfg.get("variant", "slack")

    tail = tail_experiment(g, block, u_star, p, variant, trials, rng, keep_samples=True)
    out.add_csv("tail.csv", ["trial", "cluster_size", "boundary_hits", "z"], tail.samples)
    out.add_csv(
        "tail-survival.csv",
        ["level", "survival", "wilson_lo", "wilson_hi"],
        tail.survival,
    )
    report["tail"] = {
        "slope": tail.slope,
        "intercept": tail.intercept,
        "slope_stderr": tail.slope_stderr,
        "trials": tail.trials,
    }

    bw_rows = []
    for b in part.blocks:
        if b.size == 0 or not b.outer_boundary:
            continue
        bw = beta_weights(g, b, b.outer_boundary[0], p)
        for v in b.vertices:
            bw_rows.append((part.owner[v], v, bw.beta[v], int(v in part.boundary)))
    out.add_csv("betas.csv", ["block", "vertex", "beta", "on_boundary"], bw_rows)

    if cfg.get("domination", False):
        dom = domination_test(g, part, p.k, block, u_star, trials, rng, p)
        report["domination"] = {
            "dominated": dom.dominated,
            "levels": dom.levels,
            "real_survival": dom.real_survival,
            "perc_survival": dom.perc_survival,
            "margins": dom.margins,
        }
    out.add_json("percolate-report.json", report)
    out.commit(_resolved(args, cfg))
    return EXIT_OK


def cmd_uniformity(args, cfg) -> int:
    from .uniformity import uniformity_experiment

    g = _graph_from_config(cfg, args.seed)
    p = _params_from_config(cfg, g)
    part = _partition_for(g, p, cfg)
    rng = master_rng(args.seed)
    nprobe = int(cfg.get("probes", 200))
    low = [v for v in range(g.n) if g.degree(v) <= p.dhat]
    if not low:
        raise ConfigError("no low-degree vertices to probe")
    probe_vertices = rng.choice(np.asarray(low), size=min(nprobe, len(low)), replace=False)
    res = uniformity_experiment(
        g,
        part,
        p.k,
        p,
        C0=float(cfg.get("C0", 5.0)),
        C=float(cfg.get("C", 5.0)),
        probe_vertices=probe_vertices,
        rng=rng,
        init_seed=args.seed,
    )
    out = OutputDir(args.out)
    out.add_csv(
        "uniformity.csv",
        ["vertex", "deg", "t", "avail", "updated", "threshold", "violated"],
        res.rows,
    )
    from .uniformity import uniformity_threshold

    out.add_json(
        "uniformity-report.json",
        {
            "violating_fraction": res.violating_fraction,
            "wilson_lo": res.wilson_lo,
            "wilson_hi": res.wilson_hi,
            "n_probes": res.n_probes,
            "window": res.window,
            "C0": float(cfg.get("C0", 5.0)),
            "C": float(cfg.get("C", 5.0)),
            # threshold at degree d, for eyeballing against k - Delta and d
            "threshold_at_d": uniformity_threshold(int(p.d), p.k, p.epsilon),
        },
    )
    out.commit(_resolved(args, cfg))
    return EXIT_OK


def cmd_spectral(args, cfg) -> int:
    from .spectral import (
        comparison_check,
        enumerate_colorings,
        enumerate_independent_sets,
        exact_tmix,
        kernel,
        relaxation,
        stationary,
    )

    g = _graph_from_config(cfg, args.seed)
    p = _params_from_config(cfg, g)
    model = cfg.get("chain", {}).get("model", "coloring")
    kind = cfg.get("chain", {}).get("kind", "glauber")
    part = _partition_for(g, p, cfg) if kind == "block" or cfg.get("comparison") else None
    space = enumerate_colorings(g, p.k) if model == "coloring" else enumerate_independent_sets(g)
    spec = ChainSpec(kind=kind, k=p.k, lam=p.lam, model=model, partition=part, seed=args.seed)
    km = kernel(g, spec, space)
    pi = stationary(km)
    expected = None
    if model == "coloring":
        expected = np.full(space.size, 1.0 / space.size)
    report = {
        "states": space.size,
        "stationary_max_dev": float(np.abs(pi - expected).max()) if expected is not None else None,
        "relaxation": relaxation(km),
        "tmix_quarter": exact_tmix(km) if space.size <= 4096 else None,
    }
    if cfg.get("comparison") and part is not None:
        report["comparison"] = comparison_check(g, part, p.k)
    out = OutputDir(args.out)
    out.add_json("spectral-report.json", report)
    out.commit(_resolved(args, cfg))
    print(json.dumps(report, indent=1, default=str))
    return EXIT_OK


def cmd_bench(args, cfg) -> int:
    from .bench import cost_scaling

    rep = cost_scaling(
        sizes=cfg.get("sizes", [100, 316, 1000, 3162, 10000]),
        ks=cfg.get("ks", [8, 16, 32, 64]),
        seed=args.seed,
        repeats=int(cfg.get("repeats", 3)),
    )
    out = OutputDir(args.out)
    out.add_csv(
        "bench.csv",
        ["axis", "block_size", "k", "seconds_per_update"],
        rep["rows"],
    )
    out.add_json(
        "bench-report.json",
        {k: v for k, v in rep.items() if k != "rows"},
    )
    out.commit(_resolved(args, cfg))
    print(json.dumps({k: v for k, v in rep.items() if k != "rows"}, indent=1))
    return EXIT_OK


def _resolved(args, cfg: dict) -> dict:
    return {
        "subcommand": args.cmd,
        "seed": args.seed,
        "config": cfg,
        "force": getattr(args, "force", False),
        "threads": getattr(args, "threads", 1),
    }


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blockmix", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="JSON config path")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--force", action="store_true", help="skip ergodicity guard")
        sp.add_argument("--r", type=int, default=None, help="breakpoint horizon override")
        sp.add_argument("--init-retries", type=int, default=16)

    for name in (
        "partition",
        "validate",
        "sample",
        "run",
        "couple",
        "percolate",
        "uniformity",
        "spectral",
        "bench",
    ):
        sp = sub.add_parser(name)
        common(sp)

    gg = sub.add_parser("gen-graph")
    common(gg)
    gg.add_argument("--graph-out", required=True, help="path for the graph file")
    return ap


HANDLERS = {
    "gen-graph": cmd_gen_graph,
    "partition": cmd_partition,
    "validate": cmd_validate,
    "sample": cmd_sample,
    "run": cmd_run,
    "couple": cmd_couple,
    "percolate": cmd_percolate,
    "uniformity": cmd_uniformity,
    "spectral": cmd_spectral,
    "bench": cmd_bench,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if args.cmd == "gen-graph" and "generate" not in cfg:
            raise ConfigError("gen-graph needs config with generate {n,d,seed}")
        return HANDLERS[args.cmd](args, cfg)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PartitionError, ErgodicityError, GreedyFailure, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
