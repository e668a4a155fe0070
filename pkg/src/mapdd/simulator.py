"""The timestep loop: task release, scheduler invocation, synchronized motion,
pickup/delivery detection, metrics, and a line-delimited event trace.

Runs are deterministic: identical (instance, config, seed) produce
byte-identical traces. Wall time is measured but kept out of the trace.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import dataclass
from typing import Optional

from .core import (IDLE, RELOCATING, TO_DELIVERY, TO_PICKUP, AgentState,
                   SpaceTimePath, TardinessRecord, Task, Token, tardiness)
from .gridmap import OBSTACLE, DistanceCache
from .instancegen import Instance
from .planner import Planner
from .scheduler import SchedulerConfig, StepContext, run_step


class LivenessError(RuntimeError):
    """The run exceeded its step cap; carries the trace gathered so far."""

    def __init__(self, message: str, trace: Optional[list] = None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class RunResult:
    cumulative_tardiness: int
    failure_count: int
    makespan: int
    per_task: tuple[TardinessRecord, ...]
    wall_time: float

    def key_fields(self) -> dict:
        """Deterministic portion of the result (wall time excluded)."""
        return {
            "cumulative_tardiness": self.cumulative_tardiness,
            "failure_count": self.failure_count,
            "makespan": self.makespan,
            "per_task": [(r.task_id, r.tardiness) for r in self.per_task],
        }


def default_step_cap(instance: Instance) -> int:
    span = max((t.release for t in instance.tasks), default=0)
    diameter = instance.grid.width + instance.grid.height
    return 10 * (span + len(instance.tasks) * diameter)


class Simulation:
    """One MAPD-D run. Construct fresh per run; nothing is shared mutably."""

    def __init__(self, instance: Instance, cfg: SchedulerConfig,
                 seed: int = 0, record_trace: bool = False,
                 step_cap: Optional[int] = None,
                 horizon_factor: int = 4):
        self.instance = instance
        self.cfg = cfg
        self.seed = seed
        self.step_cap = step_cap if step_cap is not None else default_step_cap(instance)
        grid = instance.grid
        self.tasks: dict[int, Task] = {
            s.id: Task(s.id, s.pickup, s.delivery, s.release, s.deadline)
            for s in instance.tasks
        }
        self.pending = deque(sorted(instance.tasks, key=lambda s: (s.release, s.id)))
        self.token = Token(grid)
        self.agents: dict[int, AgentState] = {}
        for i, start in enumerate(instance.agent_starts):
            self.agents[i] = AgentState(i, start)
            self.token.set_path(i, SpaceTimePath(0, (start,)))
        self.events: Optional[list[dict]] = [] if record_trace else None
        dcache = DistanceCache(grid)
        planner = Planner(grid, dcache, horizon_factor=horizon_factor)
        self.ctx = StepContext(grid=grid, dcache=dcache, planner=planner,
                               token=self.token, agents=self.agents,
                               tasks=self.tasks, cfg=cfg, trace=self._emit)
        self.completed: list[TardinessRecord] = []
        self.makespan = 0

    def _emit(self, kind: str, **payload):
        if self.events is not None:
            self.events.append({"t": self.token.current_time, "kind": kind, **payload})

    def _emit_positions(self):
        if self.events is None:
            return
        t = self.token.current_time
        for i in sorted(self.agents):
            x, y = self.agents[i].location
            self.events.append({"t": t, "kind": "move", "agent": i, "x": x, "y": y})

    def run(self) -> RunResult:
        t0 = time.perf_counter()
        total = len(self.tasks)
        self._emit_positions()
        while len(self.completed) < total:
            now = self.token.current_time
            if now > self.step_cap:
                raise LivenessError(
                    f"step cap {self.step_cap} exceeded with "
                    f"{total - len(self.completed)} tasks open", self.events)
            released = []
            while self.pending and self.pending[0].release <= now:
                spec = self.pending.popleft()
                released.append(self.tasks[spec.id])
            run_step(self.ctx, released)
            self.token.current_time = now + 1
            self._move_all()
            self._emit_positions()
            self._detect()
            self._check_conservation(total)
        wall = time.perf_counter() - t0
        per_task = tuple(sorted(self.completed, key=lambda r: r.task_id))
        return RunResult(
            cumulative_tardiness=sum(r.tardiness for r in per_task),
            failure_count=sum(1 for r in per_task if r.tardiness > 0),
            makespan=self.makespan,
            per_task=per_task,
            wall_time=wall,
        )

    def _move_all(self):
        t = self.token.current_time
        for i in sorted(self.agents):
            self.agents[i].location = self.token.paths[i].at(t)

    def _detect(self):
        """Pickup when the agent occupies the pickup at its planned timestep;
        delivery at the planned final waypoint; relocations end silently."""
        t = self.token.current_time
        token = self.token
        for i in sorted(self.agents):
            agent = self.agents[i]
            if agent.phase == TO_PICKUP:
                a = token.assignments[agent.assigned_task]
                if t >= a.pickup_time:
                    agent.phase = TO_DELIVERY
                    if self.cfg.swap_family:
                        token.tasks.pop(agent.assigned_task, None)
                        token.dummy_paths.pop(agent.assigned_task, None)
                    self._emit("pickup", agent=i, task=agent.assigned_task)
            if agent.phase == TO_DELIVERY:
                a = token.assignments[agent.assigned_task]
                if t >= a.path_end:
                    task = self.tasks[agent.assigned_task]
                    task.completion_time = t
                    rec = tardiness(task)
                    self.completed.append(rec)
                    self.makespan = t
                    token.unassign(task.id)
                    agent.assigned_task = None
                    agent.phase = IDLE
                    self._emit("deliver", agent=i, task=task.id,
                               completion=t, tardiness=rec.tardiness)
            elif agent.phase == RELOCATING and token.paths[i].end_time <= t:
                agent.phase = IDLE

    def _check_conservation(self, total: int):
        token = self.token
        executing = sum(1 for tid in token.assignments if tid not in token.tasks)
        accounted = (len(self.completed) + len(token.tasks) + executing
                     + len(self.pending))
        assert accounted == total, (
            f"task conservation broken at t={token.current_time}: "
            f"{accounted} != {total}")


def run(instance: Instance, cfg: SchedulerConfig, seed: int = 0,
        record_trace: bool = False, step_cap: Optional[int] = None
        ) -> tuple[RunResult, Optional[list[dict]]]:
    """Simulate until every task is delivered. Deterministic given
    (instance, cfg, seed); raises LivenessError if the step cap trips."""
    sim = Simulation(instance, cfg, seed=seed, record_trace=record_trace,
                     step_cap=step_cap)
    result = sim.run()
    return result, sim.events


def trace_to_jsonl(events: list[dict]) -> str:
    return "".join(json.dumps(e, separators=(",", ":")) + "\n" for e in events)


def write_trace(events: list[dict], path):
    with open(path, "w") as f:
        f.write(trace_to_jsonl(events))


def read_trace(path) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


@dataclass
class ValidationReport:
    violations: list[str]
    cumulative_tardiness: int = 0
    failure_count: int = 0
    makespan: int = 0
    completed: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_trace(events: list[dict], instance: Instance) -> ValidationReport:
    """Independent re-check of a trace: move legality, vertex/swap conflicts,
    pickup-before-delivery ordering, and recomputed metrics.

    Deliberately shares nothing with the token's conflict machinery: positions
    are rebuilt from move events and compared pairwise per timestep.
    """
    v: list[str] = []
    cells = instance.grid.cells
    width, height = instance.grid.width, instance.grid.height
    deadlines = {s.id: s.deadline for s in instance.tasks}
    releases = {s.id: s.release for s in instance.tasks}

    positions: dict[int, dict[int, tuple[int, int]]] = {}
    horizon = 0
    for e in events:
        if e["kind"] == "move":
            positions.setdefault(e["agent"], {})[e["t"]] = (e["x"], e["y"])
            horizon = max(horizon, e["t"])

    agent_ids = sorted(positions)
    if len(agent_ids) != len(instance.agent_starts):
        v.append(f"expected {len(instance.agent_starts)} agents in trace, "
                 f"saw {len(agent_ids)}")
    for i, start in enumerate(instance.agent_starts):
        p0 = positions.get(i, {}).get(0)
        if p0 != start:
            v.append(f"agent {i} starts at {p0}, instance says {start}")

    for t in range(horizon + 1):
        occupied: dict[tuple[int, int], int] = {}
        for i in agent_ids:
            pos = positions[i].get(t)
            if pos is None:
                v.append(f"agent {i} has no position at t={t}")
                continue
            x, y = pos
            if not (0 <= x < width and 0 <= y < height) or cells[y][x] == OBSTACLE:
                v.append(f"agent {i} at impassable cell {pos} t={t}")
            if pos in occupied:
                v.append(f"vertex conflict: agents {occupied[pos]} and {i} "
                         f"both at {pos} t={t}")
            occupied[pos] = i
            if t > 0:
                prev = positions[i].get(t - 1)
                if prev is not None:
                    dx, dy = abs(x - prev[0]), abs(y - prev[1])
                    if dx + dy > 1:
                        v.append(f"agent {i} teleports {prev}->{pos} at t={t}")
        if t > 0:
            for i in agent_ids:
                pi, ci = positions[i].get(t - 1), positions[i].get(t)
                if pi is None or ci is None or pi == ci:
                    continue
                for j in agent_ids:
                    if j <= i:
                        continue
                    pj, cj = positions[j].get(t - 1), positions[j].get(t)
                    if pj is None or cj is None:
                        continue
                    if ci == pj and cj == pi:
                        v.append(f"swap conflict: agents {i}/{j} across "
                                 f"{pi}<->{pj} at t={t}")

    picked: dict[int, int] = {}   # task -> agent
    done: dict[int, int] = {}     # task -> completion
    for e in events:
        if e["kind"] == "pickup":
            tid = e["task"]
            if tid in picked:
                v.append(f"task {tid} picked up twice")
            if e["t"] < releases.get(tid, 0):
                v.append(f"task {tid} picked up before release")
            picked[tid] = e["agent"]
        elif e["kind"] == "deliver":
            tid = e["task"]
            if tid not in picked:
                v.append(f"task {tid} delivered without pickup")
            elif picked[tid] != e["agent"]:
                v.append(f"task {tid} picked by {picked[tid]} but delivered "
                         f"by {e['agent']}")
            if tid in done:
                v.append(f"task {tid} delivered twice")
            done[tid] = e["t"]
            pos = positions.get(e["agent"], {}).get(e["t"])
            spec = next((s for s in instance.tasks if s.id == tid), None)
            if spec is not None and pos != spec.delivery:
                v.append(f"task {tid} delivered at {pos}, expected {spec.delivery}")

    cumulative = 0
    failures = 0
    for tid, c in done.items():
        eps = max(0, c - deadlines.get(tid, c))
        cumulative += eps
        failures += 1 if eps > 0 else 0

    return ValidationReport(
        violations=v,
        cumulative_tardiness=cumulative,
        failure_count=failures,
        makespan=max(done.values(), default=0),
        completed=len(done),
    )
