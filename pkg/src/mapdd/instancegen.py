"""Random instance generation and the versioned instance file format.

Release times and deadline durations are drawn uniformly (inclusive integer
bounds) from the named regimes; pickup/delivery pairs are drawn uniformly from
the task endpoints with pickup != delivery; agent starts are sampled without
replacement from the non-task endpoints. The RNG is Python's Mersenne Twister
(`random.Random(seed)`) with the draw order pinned below, so a (map, spec,
seed) triple reproduces exactly.
"""

from __future__ import annotations

import hashlib
import random
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .gridmap import (NON_TASK_ENDPOINT, TASK_ENDPOINT, GridMap, Vertex,
                      parse_map)

RELEASE_REGIMES = {"dense": (0, 300), "sparse": (0, 500)}
DEADLINE_REGIMES = {"short": (20, 80), "long": (60, 120)}

INSTANCE_HEADER = "mapd-d instance v1"
BUILTIN_PREFIX = "builtin:"


class InstanceError(ValueError):
    """Raised for invalid generation specs or malformed instance files."""


@dataclass(frozen=True)
class TaskSpec:
    id: int
    pickup: Vertex
    delivery: Vertex
    release: int
    deadline: int


@dataclass(frozen=True)
class GenSpec:
    map_ref: str
    num_agents: int
    num_tasks: int
    release_regime: str
    deadline_regime: str
    seed: int

    def __post_init__(self):
        if self.num_agents < 1:
            raise InstanceError("num_agents must be >= 1")
        if self.num_tasks < 1:
            raise InstanceError("num_tasks must be >= 1")
        if self.release_regime not in RELEASE_REGIMES:
            raise InstanceError(f"unknown release regime {self.release_regime!r}")
        if self.deadline_regime not in DEADLINE_REGIMES:
            raise InstanceError(f"unknown deadline regime {self.deadline_regime!r}")


@dataclass(frozen=True)
class Instance:
    grid: GridMap
    map_ref: str
    map_hash: str
    agent_starts: tuple[Vertex, ...]
    tasks: tuple[TaskSpec, ...]
    name: str = "instance"


def map_hash(grid: GridMap) -> str:
    return hashlib.sha256(grid.render().encode()).hexdigest()


def builtin_map_path(name: str) -> Path:
    return Path(__file__).parent / "assets" / f"{name}.map"


def resolve_map(ref: str, base_dir: Optional[Path] = None) -> GridMap:
    """Load a map by reference: 'builtin:<name>' for bundled assets, otherwise
    a filesystem path (relative to `base_dir` when given)."""
    if ref.startswith(BUILTIN_PREFIX):
        path = builtin_map_path(ref[len(BUILTIN_PREFIX):])
    else:
        path = Path(ref)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
    if not path.exists():
        raise InstanceError(f"map {ref!r} not found at {path}")
    return parse_map(path.read_text())


def generate(grid: GridMap, spec: GenSpec, name: Optional[str] = None) -> Instance:
    """Draw order per task: release, duration, pickup, delivery (redrawn while
    equal to pickup); agent starts are drawn first via sample()."""
    non_task = grid.non_task_endpoints
    if spec.num_agents > len(non_task):
        raise InstanceError(
            f"{spec.num_agents} agents exceed {len(non_task)} non-task endpoints")
    task_eps = grid.task_endpoints
    if len(task_eps) < 2:
        raise InstanceError("map needs at least two task endpoints")
    rng = random.Random(spec.seed)
    starts = tuple(rng.sample(non_task, spec.num_agents))
    rlo, rhi = RELEASE_REGIMES[spec.release_regime]
    dlo, dhi = DEADLINE_REGIMES[spec.deadline_regime]
    tasks = []
    for j in range(spec.num_tasks):
        release = rng.randint(rlo, rhi)
        duration = rng.randint(dlo, dhi)
        pickup = rng.choice(task_eps)
        delivery = rng.choice(task_eps)
        while delivery == pickup:
            delivery = rng.choice(task_eps)
        tasks.append(TaskSpec(j, pickup, delivery, release, release + duration))
    label = name or (f"{spec.release_regime}-{spec.deadline_regime}-s{spec.seed}")
    return Instance(grid=grid, map_ref=spec.map_ref, map_hash=map_hash(grid),
                    agent_starts=starts, tasks=tuple(tasks), name=label)


def save_instance(instance: Instance, path) -> None:
    lines = [INSTANCE_HEADER,
             f"name {instance.name}",
             f"map {instance.map_ref} sha256:{instance.map_hash}",
             f"agents {len(instance.agent_starts)}"]
    for i, (x, y) in enumerate(instance.agent_starts):
        lines.append(f"agent {i} {x} {y}")
    lines.append(f"tasks {len(instance.tasks)}")
    for t in instance.tasks:
        lines.append(f"task {t.id} {t.release} {t.pickup[0]} {t.pickup[1]} "
                     f"{t.delivery[0]} {t.delivery[1]} {t.deadline}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_instance(path, grid: Optional[GridMap] = None) -> Instance:
    """Parse and validate an instance file. The referenced map is loaded
    (relative paths resolve against the instance file) unless `grid` is given,
    and its content hash must match the recorded one. Emits a warning rather
    than failing when more agents are declared than non-task endpoints."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != INSTANCE_HEADER:
        raise InstanceError(f"{path}: expected header {INSTANCE_HEADER!r}")
    idx = 1
    name = "instance"
    if idx < len(lines) and lines[idx].startswith("name "):
        name = lines[idx][5:].strip()
        idx += 1
    if idx >= len(lines) or not lines[idx].startswith("map "):
        raise InstanceError(f"{path}: missing map line")
    map_parts = lines[idx].split()
    if len(map_parts) != 3 or not map_parts[2].startswith("sha256:"):
        raise InstanceError(f"{path}: malformed map line {lines[idx]!r}")
    map_ref, recorded_hash = map_parts[1], map_parts[2][len("sha256:"):]
    idx += 1
    if grid is None:
        grid = resolve_map(map_ref, base_dir=path.parent)
    actual = map_hash(grid)
    if actual != recorded_hash:
        raise InstanceError(
            f"{path}: map content hash mismatch for {map_ref!r} "
            f"(recorded {recorded_hash[:12]}.., found {actual[:12]}..)")

    def expect_count(keyword: str) -> int:
        nonlocal idx
        if idx >= len(lines) or not lines[idx].startswith(keyword + " "):
            raise InstanceError(f"{path}: expected '{keyword} <n>' at line {idx + 1}")
        n = int(lines[idx].split()[1])
        idx += 1
        return n

    n_agents = expect_count("agents")
    starts = []
    off_endpoint = []
    for _ in range(n_agents):
        parts = lines[idx].split()
        if len(parts) != 4 or parts[0] != "agent":
            raise InstanceError(f"{path}: malformed agent line {lines[idx]!r}")
        aid, x, y = int(parts[1]), int(parts[2]), int(parts[3])
        v = (x, y)
        if not grid.in_bounds(v) or not grid.passable(v):
            raise InstanceError(f"{path}: agent {aid} start {v} is not passable")
        if grid.kind(v) != NON_TASK_ENDPOINT:
            off_endpoint.append(aid)
        starts.append(v)
        idx += 1
    if len(set(starts)) != len(starts):
        raise InstanceError(f"{path}: duplicate agent start vertices")
    if off_endpoint:
        warnings.warn(
            f"{path}: agents {off_endpoint} do not start on non-task "
            "endpoints; the instance is not well-formed", stacklevel=2)

    n_tasks = expect_count("tasks")
    tasks = []
    for _ in range(n_tasks):
        parts = lines[idx].split()
        if len(parts) != 8 or parts[0] != "task":
            raise InstanceError(f"{path}: malformed task line {lines[idx]!r}")
        tid, release, px, py, dx, dy, deadline = (int(p) for p in parts[1:])
        for label, v in (("pickup", (px, py)), ("delivery", (dx, dy))):
            if not grid.in_bounds(v) or not grid.passable(v):
                raise InstanceError(
                    f"{path}: task {tid} {label} {v} is out of bounds or blocked")
            if grid.kind(v) != TASK_ENDPOINT:
                raise InstanceError(
                    f"{path}: task {tid} {label} {v} is not a task endpoint")
        if (px, py) == (dx, dy):
            raise InstanceError(f"{path}: task {tid} pickup equals delivery")
        tasks.append(TaskSpec(tid, (px, py), (dx, dy), release, deadline))
        idx += 1

    non_task = len(grid.non_task_endpoints)
    if n_agents > non_task:
        warnings.warn(
            f"{path}: {n_agents} agents on a map with only {non_task} "
            "non-task endpoints; the instance is not well-formed and may be "
            "unsolvable", stacklevel=2)

    return Instance(grid=grid, map_ref=map_ref, map_hash=recorded_hash,
                    agent_starts=tuple(starts), tasks=tuple(tasks), name=name)
