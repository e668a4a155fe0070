"""Shared test helpers: inline map construction and fuzzed well-formed
instances for property and acceptance testing."""

from __future__ import annotations

import random

from mapdd.gridmap import GridMap, check_well_formed, parse_map
from mapdd.instancegen import Instance, TaskSpec, map_hash


def map_text(rows: list[str]) -> str:
    return f"mapd-d map v1\n{len(rows[0])} {len(rows)}\n" + "\n".join(rows) + "\n"


def make_grid(rows: list[str]) -> GridMap:
    return parse_map(map_text(rows))


def make_instance(grid: GridMap, starts, task_tuples, name="test") -> Instance:
    """task_tuples: (id, pickup, delivery, release, deadline)."""
    tasks = tuple(TaskSpec(*t) for t in task_tuples)
    return Instance(grid=grid, map_ref="inline", map_hash=map_hash(grid),
                    agent_starts=tuple(starts), tasks=tasks, name=name)


def fuzz_instance(seed: int, max_agents: int = 4, max_tasks: int = 10) -> Instance:
    """A random small well-formed instance; deterministic per seed. Retries
    candidate layouts until all three well-formedness conditions hold."""
    rng = random.Random(seed)
    for _ in range(500):
        w = rng.randint(7, 12)
        h = rng.randint(5, 9)
        cells = [["." for _ in range(w)] for _ in range(h)]
        for y in range(h):
            for x in range(w):
                if rng.random() < 0.10:
                    cells[y][x] = "@"
        free = [(x, y) for y in range(h) for x in range(w) if cells[y][x] == "."]
        n_agents = rng.randint(2, max_agents)
        n_tasks = rng.randint(4, max_tasks)
        n_T = rng.randint(4, 8)
        n_E = rng.randint(n_agents, n_agents + 2)
        if len(free) < n_T + n_E + 4:
            continue
        chosen = rng.sample(free, n_T + n_E)
        for x, y in chosen[:n_T]:
            cells[y][x] = "T"
        for x, y in chosen[n_T:]:
            cells[y][x] = "E"
        try:
            grid = make_grid(["".join(r) for r in cells])
        except Exception:
            continue
        if not check_well_formed(grid, n_agents).ok:
            continue
        task_eps = grid.task_endpoints
        starts = rng.sample(grid.non_task_endpoints, n_agents)
        tasks = []
        for j in range(n_tasks):
            release = rng.randint(0, 30)
            duration = rng.randint(5, 45)
            p = rng.choice(task_eps)
            d = rng.choice(task_eps)
            while d == p:
                d = rng.choice(task_eps)
            tasks.append((j, p, d, release, release + duration))
        return make_instance(grid, starts, tasks, name=f"fuzz-{seed}")
    raise RuntimeError(f"no well-formed fuzz layout found for seed {seed}")
