"""Command-line entry point: generate instances, run single simulations,
sweep algorithm/alpha/seed grids into a results CSV, and validate traces.

Exit codes: 0 success, 1 validation found violations, 2 usage error,
3 input error, 4 liveness failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import statistics
import sys
import time
from multiprocessing import Pool
from pathlib import Path

from .gridmap import MapError
from .instancegen import (DEADLINE_REGIMES, RELEASE_REGIMES, GenSpec, Instance,
                          InstanceError, generate, load_instance, resolve_map)
from .scheduler import SchedulerConfig
from .simulator import LivenessError, read_trace, run, validate_trace, write_trace

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_LIVENESS = 4

DEFAULT_ALPHA_GRID = (0.0, 0.025, 0.05, 0.1, 0.2, 0.4)
DEFAULT_REGIMES = ("dense-short", "dense-long", "sparse-short", "sparse-long")
DEFAULT_CONFIGS = ("dtp", "dtpts+swap", "dtpts+switch", "dtpts+swap+switch")

CSV_COLUMNS = ("instance_id", "regime", "algo", "alpha", "swap", "switch",
               "seed", "cumulative_tardiness", "failure_count", "makespan",
               "wall_ms")

BUILTIN_WAREHOUSE = "builtin:warehouse_35x21"


def _positive_int(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _parse_config(token: str) -> SchedulerConfig:
    """Parse 'dtp', 'dtpts+swap+switch', 'tp', 'tpts'; alpha is set per run."""
    parts = token.split("+")
    algo = parts[0]
    swap = "swap" in parts[1:]
    switch = "switch" in parts[1:]
    return SchedulerConfig.make(algo, 0.0, swap, switch)


def _result_row(instance_id: str, regime: str, cfg: SchedulerConfig,
                seed: int, result) -> dict:
    return {
        "instance_id": instance_id,
        "regime": regime,
        "algo": cfg.algorithm,
        "alpha": str(cfg.alpha),
        "swap": int(cfg.enable_swap),
        "switch": int(cfg.enable_switch),
        "seed": str(seed),
        "cumulative_tardiness": result.cumulative_tardiness,
        "failure_count": result.failure_count,
        "makespan": result.makespan,
        "wall_ms": f"{result.wall_time * 1000:.1f}",
    }


# -- gen ----------------------------------------------------------------------

def cmd_gen(args) -> int:
    spec = GenSpec(map_ref=args.map, num_agents=args.agents,
                   num_tasks=args.tasks, release_regime=args.release,
                   deadline_regime=args.deadline, seed=args.seed)
    grid = resolve_map(args.map)
    instance = generate(grid, spec)
    out = Path(args.out) if args.out else Path(f"{instance.name}.inst")
    from .instancegen import save_instance
    save_instance(instance, out)
    print(f"wrote {out}: {len(instance.tasks)} tasks, "
          f"{len(instance.agent_starts)} agents, map {args.map}")
    return EXIT_OK


# -- run ----------------------------------------------------------------------

def cmd_run(args) -> int:
    instance = load_instance(args.instance)
    cfg = SchedulerConfig.make(args.algo, args.alpha, args.swap, args.switch)
    try:
        result, events = run(instance, cfg, seed=args.seed,
                             record_trace=args.trace is not None)
    except LivenessError as e:
        if args.trace is not None and e.trace is not None:
            write_trace(e.trace, args.trace)
        print(f"liveness failure: {e}", file=sys.stderr)
        return EXIT_LIVENESS
    if args.trace is not None:
        write_trace(events, args.trace)
    row = _result_row(instance.name, _regime_of(instance), cfg, args.seed, result)
    _append_rows(Path(args.results), [row])
    print(",".join(str(row[c]) for c in CSV_COLUMNS))
    return EXIT_OK


# -- sweep ----------------------------------------------------------------------

def _sweep_unit(job):
    """Run one (regime, config, alpha, seed) cell; used by worker processes."""
    (map_ref, tasks, agents, release, deadline, algo, swap, switch,
     alpha, seed, step_cap) = job
    grid = _grid_cache(map_ref)
    spec = GenSpec(map_ref=map_ref, num_agents=agents, num_tasks=tasks,
                   release_regime=release, deadline_regime=deadline, seed=seed)
    instance = generate(grid, spec)
    cfg = SchedulerConfig(algo, alpha, bool(swap), bool(switch))
    try:
        result, _ = run(instance, cfg, seed=seed, step_cap=step_cap)
    except Exception as e:  # recorded per-row; the sweep continues
        return {
            "instance_id": instance.name,
            "regime": f"{release}-{deadline}",
            "algo": algo, "alpha": str(alpha), "swap": int(swap),
            "switch": int(switch), "seed": str(seed),
            "cumulative_tardiness": "", "failure_count": "", "makespan": "",
            "wall_ms": "", "_error": repr(e),
        }
    return _result_row(instance.name, f"{release}-{deadline}", cfg, seed, result)


_GRIDS: dict[str, object] = {}


def _grid_cache(map_ref: str):
    grid = _GRIDS.get(map_ref)
    if grid is None:
        grid = resolve_map(map_ref)
        _GRIDS[map_ref] = grid
    return grid


def _row_key(row: dict) -> tuple:
    return (row["regime"], row["algo"], str(row["alpha"]), str(row["swap"]),
            str(row["switch"]), str(row["seed"]))


def _append_rows(path: Path, rows: list[dict]) -> None:
    exists = path.exists() and path.stat().st_size > 0
    with open(path, "a", newline="") as f:
        w = csv.DictWriter(f, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        if not exists:
            w.writeheader()
        for row in rows:
            w.writerow(row)


def _read_rows(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def summarize_rows(rows: list[dict]) -> list[dict]:
    """Per-cell mean/std rows over seeds (sample stdev, 0.0 for one seed)."""
    cells: dict[tuple, list[dict]] = {}
    for row in rows:
        if not str(row["seed"]).lstrip("-").isdigit():
            continue
        if row["cumulative_tardiness"] == "":
            continue
        key = (row["regime"], row["algo"], str(row["alpha"]),
               str(row["swap"]), str(row["switch"]))
        cells.setdefault(key, []).append(row)
    out = []
    for key in sorted(cells):
        group = cells[key]
        regime, algo, alpha, swap, switch = key
        iid = group[0]["instance_id"].rsplit("-s", 1)[0]
        for stat_name in ("mean", "std"):
            entry = {"instance_id": iid, "regime": regime, "algo": algo,
                     "alpha": alpha, "swap": swap, "switch": switch,
                     "seed": stat_name, "wall_ms": ""}
            for metric in ("cumulative_tardiness", "failure_count", "makespan"):
                vals = [float(r[metric]) for r in group]
                if stat_name == "mean":
                    entry[metric] = str(statistics.mean(vals))
                else:
                    entry[metric] = str(statistics.stdev(vals) if len(vals) > 1 else 0.0)
            out.append(entry)
    return out


def run_sweep(map_ref: str, tasks: int, agents: int, regimes, configs, alphas,
              seeds, out_path: Path, workers: int = 0,
              step_cap=None, progress=False) -> list[dict]:
    """Full cartesian product, resumable by row key; per-run rows are appended
    as they finish and per-cell mean/std rows are rewritten at the end."""
    base_cfgs = [_parse_config(c) for c in configs]
    jobs = []
    for regime in regimes:
        release, deadline = regime.split("-")
        if release not in RELEASE_REGIMES or deadline not in DEADLINE_REGIMES:
            raise InstanceError(f"unknown regime {regime!r}")
        for cfg in base_cfgs:
            cfg_alphas = [0.0] if cfg.algorithm in ("tp", "tpts") else alphas
            for alpha in cfg_alphas:
                for seed in seeds:
                    jobs.append((map_ref, tasks, agents, release, deadline,
                                 cfg.algorithm, int(cfg.enable_swap),
                                 int(cfg.enable_switch), float(alpha), seed,
                                 step_cap))

    existing = [r for r in _read_rows(out_path)
                if str(r["seed"]).lstrip("-").isdigit()
                and r["cumulative_tardiness"] != ""]
    done = {_row_key(r) for r in existing}
    # rewrite without stale summaries so appends stay well-ordered
    if out_path.exists():
        out_path.unlink()
    if existing:
        _append_rows(out_path, existing)

    todo = []
    for job in jobs:
        key = (f"{job[3]}-{job[4]}", job[5], str(job[8]), str(job[6]),
               str(job[7]), str(job[9]))
        if key not in done:
            todo.append(job)

    if workers <= 0:
        workers = int(os.environ.get("MAPDD_WORKERS", "0")) or (os.cpu_count() or 1)
    rows = list(existing)
    started = time.perf_counter()
    completed = 0

    def _collect(row):
        nonlocal completed
        _append_rows(out_path, [row])
        rows.append(row)
        completed += 1
        if progress and completed % 20 == 0:
            rate = completed / (time.perf_counter() - started)
            print(f"  {completed}/{len(todo)} runs "
                  f"({rate:.2f}/s)", file=sys.stderr, flush=True)

    if workers > 1 and len(todo) > 1:
        with Pool(processes=workers) as pool:
            for row in pool.imap(_sweep_unit, todo, chunksize=4):
                _collect(row)
    else:
        for job in todo:
            _collect(_sweep_unit(job))

    summary = summarize_rows(rows)
    _append_rows(out_path, summary)
    return rows + summary


def cmd_sweep(args) -> int:
    alphas = [float(a) for a in args.alphas.split(",")]
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise InstanceError(f"alpha {a} outside [0, 1]")
    if args.seeds.isdigit():
        seeds = list(range(int(args.seeds)))
    else:
        seeds = [int(s) for s in args.seeds.split(",")]
    regimes = args.regimes.split(",")
    configs = args.configs.split(",")
    rows = run_sweep(args.map, args.tasks, args.agents, regimes, configs,
                     alphas, seeds, Path(args.out), workers=args.workers,
                     progress=True)
    n_runs = sum(1 for r in rows if str(r["seed"]).lstrip("-").isdigit())
    print(f"sweep complete: {n_runs} runs in {args.out}")
    return EXIT_OK


# -- validate -------------------------------------------------------------------

def cmd_validate(args) -> int:
    instance = load_instance(args.instance)
    events = read_trace(args.trace)
    report = validate_trace(events, instance)
    if report.violations:
        for violation in report.violations[:50]:
            print(f"VIOLATION: {violation}")
        print(f"{len(report.violations)} violations found")
        return EXIT_VIOLATIONS
    print(f"trace ok: {report.completed} tasks completed, cumulative "
          f"tardiness {report.cumulative_tardiness}, makespan {report.makespan}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mapdd",
                                description="Online MAPD with task deadlines: "
                                            "simulator and benchmark harness")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random instance file")
    g.add_argument("--map", default=BUILTIN_WAREHOUSE)
    g.add_argument("--tasks", type=_positive_int, default=151)
    g.add_argument("--agents", type=_positive_int, default=15)
    g.add_argument("--release", choices=sorted(RELEASE_REGIMES), default="dense")
    g.add_argument("--deadline", choices=sorted(DEADLINE_REGIMES), default="short")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run one simulation")
    r.add_argument("--instance", required=True)
    r.add_argument("--algo", choices=("tp", "dtp", "tpts", "dtpts"), required=True)
    r.add_argument("--alpha", type=float, default=0.0)
    r.add_argument("--swap", action="store_true")
    r.add_argument("--switch", action="store_true")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--trace", default=None, help="write JSONL trace here")
    r.add_argument("--results", default="results.csv")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="batch alpha/seed/config sweep")
    s.add_argument("--map", default=BUILTIN_WAREHOUSE)
    s.add_argument("--tasks", type=_positive_int, default=151)
    s.add_argument("--agents", type=_positive_int, default=15)
    s.add_argument("--alphas", default=",".join(str(a) for a in DEFAULT_ALPHA_GRID))
    s.add_argument("--seeds", default="30",
                   help="count (N -> seeds 0..N-1) or comma list")
    s.add_argument("--regimes", default=",".join(DEFAULT_REGIMES))
    s.add_argument("--configs", default=",".join(DEFAULT_CONFIGS))
    s.add_argument("--out", default="sweep.csv")
    s.add_argument("--workers", type=int, default=0,
                   help="0 = MAPDD_WORKERS env var or cpu count")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="re-check a trace against its instance")
    v.add_argument("--trace", required=True)
    v.add_argument("--instance", required=True)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        # config coherence is a usage error, caught before any work happens
        try:
            SchedulerConfig.make(args.algo, args.alpha, args.swap, args.switch)
        except ValueError as e:
            parser.error(str(e))
    try:
        return args.func(args)
    except (InstanceError, MapError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


def _regime_of(instance: Instance) -> str:
    name = instance.name
    for release in RELEASE_REGIMES:
        for deadline in DEADLINE_REGIMES:
            if name.startswith(f"{release}-{deadline}"):
                return f"{release}-{deadline}"
    return "custom"


if __name__ == "__main__":
    sys.exit(main())
