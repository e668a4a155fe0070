"""Domain model for MAPD-D: agents, deadline-carrying tasks, space-time paths
with rest-in-place occupancy, and the token (shared memory of reserved paths,
pending tasks, and assignments).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .gridmap import GridMap, Vertex

IDLE = "idle"
TO_PICKUP = "to_pickup"
TO_DELIVERY = "to_delivery"
RELOCATING = "relocating"


@dataclass
class Task:
    """A delivery job: move a payload from `pickup` to `delivery`, ideally by
    `delivery_deadline`. `pickup_deadline` is derived (deadline minus the
    latest-possible dummy-path length) and may precede the current time."""

    id: int
    pickup: Vertex
    delivery: Vertex
    release_time: int
    delivery_deadline: int
    pickup_deadline: Optional[int] = None
    completion_time: Optional[int] = None

    def __post_init__(self):
        if self.pickup == self.delivery:
            raise ValueError(f"task {self.id}: pickup and delivery must differ")


@dataclass
class AgentState:
    id: int
    location: Vertex
    assigned_task: Optional[int] = None
    phase: str = IDLE


@dataclass(frozen=True)
class TardinessRecord:
    task_id: int
    tardiness: int


def tardiness(task: Task) -> TardinessRecord:
    """max(0, completion - deadline); zero means the task met its deadline."""
    if task.completion_time is None:
        raise ValueError(f"task {task.id} has no completion time")
    return TardinessRecord(task.id, max(0, task.completion_time - task.delivery_deadline))


@dataclass(frozen=True)
class SpaceTimePath:
    """A trajectory: vertex per timestep from `start_time` on. After the last
    timestep the owner rests at the final vertex until a new path is written
    (rest-in-place), which is how reservations stay sound between requests."""

    start_time: int
    vertices: tuple[Vertex, ...]

    def __post_init__(self):
        if not self.vertices:
            raise ValueError("path must contain at least one vertex")

    @property
    def end_time(self) -> int:
        return self.start_time + len(self.vertices) - 1

    @property
    def length(self) -> int:
        """Number of moves, |path| = timesteps spent, not vertex count."""
        return len(self.vertices) - 1

    @property
    def final(self) -> Vertex:
        return self.vertices[-1]

    def at(self, t: int) -> Vertex:
        """Occupancy at timestep t, extending at the final vertex forever."""
        if t < self.start_time:
            raise ValueError(f"t={t} precedes path start {self.start_time}")
        i = t - self.start_time
        return self.vertices[i] if i < len(self.vertices) else self.vertices[-1]


def occupancy_at(path: SpaceTimePath, t: int) -> Vertex:
    return path.at(t)


@dataclass(frozen=True)
class Conflict:
    kind: str  # "vertex" | "swap"
    time: int
    vertices: tuple[Vertex, ...]


def detect_conflict(p1: SpaceTimePath, p2: SpaceTimePath,
                    rest1: bool = True, rest2: bool = True) -> Optional[Conflict]:
    """Earliest vertex or swapping conflict between two occupancies, or None.

    With rest flags set (the default for real agent paths) each path occupies
    its final vertex at every later timestep. Dummy paths are compared with
    their rest flag cleared: they occupy nothing outside their own timespan.
    """
    def occ(p: SpaceTimePath, t: int, rest: bool) -> Optional[Vertex]:
        if t < p.start_time or (not rest and t > p.end_time):
            return None
        return p.at(t)

    lo = max(p1.start_time, p2.start_time)
    hi = max(p1.end_time, p2.end_time)
    if not rest1:
        hi = min(hi, p1.end_time)
    if not rest2:
        hi = min(hi, p2.end_time)
    hi = max(hi, lo)
    for t in range(lo, hi + 1):
        a1, a2 = occ(p1, t, rest1), occ(p2, t, rest2)
        if a1 is None or a2 is None:
            continue
        if a1 == a2:
            return Conflict("vertex", t, (a1,))
        b1, b2 = occ(p1, t + 1, rest1), occ(p2, t + 1, rest2)
        if b1 is not None and b2 is not None and a1 == b2 and a2 == b1:
            return Conflict("swap", t, (a1, a2))
    return None


class TokenConflictError(RuntimeError):
    """A path write would break the token's pairwise conflict-freedom."""


@dataclass(frozen=True)
class Assignment:
    agent_id: int
    pickup_time: int
    path_end: int


class Token:
    """Shared memory: every agent's reserved path, pending tasks with their
    dummy paths, and task-agent assignments.

    Maintains a reservation index so planners query occupancy in O(1):
      - transit: vertex -> {timestep: agent} for every on-path position,
      - rests:   vertex -> {agent: rest start} for final vertices,
      - edges:   (from, to, t) -> agent for every proper move.
    Dummy paths are annotations only and are never indexed.
    """

    def __init__(self, grid: GridMap):
        self.grid = grid
        self.current_time = 0
        self.paths: dict[int, SpaceTimePath] = {}
        self.tasks: dict[int, Task] = {}          # pending set, id -> task
        self.dummy_paths: dict[int, Optional[SpaceTimePath]] = {}
        self.assignments: dict[int, Assignment] = {}   # task id -> assignment
        self.agent_task: dict[int, int] = {}           # agent id -> task id
        self._transit: dict[Vertex, dict[int, int]] = {}
        self._rests: dict[Vertex, dict[int, int]] = {}
        self._edges: dict[tuple[Vertex, Vertex, int], int] = {}

    # -- reservation queries -------------------------------------------------

    def occupied(self, v: Vertex, t: int, ignore: Optional[int] = None) -> bool:
        times = self._transit.get(v)
        if times is not None:
            a = times.get(t)
            if a is not None and a != ignore:
                return True
        rests = self._rests.get(v)
        if rests:
            for agent, start in rests.items():
                if agent != ignore and start <= t:
                    return True
        return False

    def swap_blocked(self, u: Vertex, v: Vertex, t: int, ignore: Optional[int] = None) -> bool:
        """True if moving u->v over (t, t+1) would swap with a reserved move."""
        a = self._edges.get((v, u, t))
        return a is not None and a != ignore

    def rest_safe(self, v: Vertex, t: int, ignore: Optional[int] = None) -> bool:
        """Can an agent park at v from time t on without ever being hit?"""
        rests = self._rests.get(v)
        if rests and any(agent != ignore for agent in rests):
            return False
        times = self._transit.get(v)
        if times:
            for tt, agent in times.items():
                if agent != ignore and tt >= t:
                    return False
        return True

    def rest_owner(self, v: Vertex, ignore: Optional[int] = None) -> Optional[int]:
        """Agent whose path ends (rests) at v, if any."""
        rests = self._rests.get(v)
        if rests:
            for agent in rests:
                if agent != ignore:
                    return agent
        return None

    def rest_agents(self, v: Vertex) -> tuple[int, ...]:
        """All agents whose paths end at v (more than one only transiently,
        while a stripped agent awaits re-service)."""
        rests = self._rests.get(v)
        return tuple(rests) if rests else ()

    def earliest_rest_time(self, v: Vertex, ignore: Optional[int] = None) -> Optional[int]:
        """First timestep from which parking at v forever is conflict-free:
        one past the last reserved transit through v, or None if some other
        path already rests there."""
        rests = self._rests.get(v)
        if rests:
            for agent in rests:
                if agent != ignore:
                    return None
        latest = -1
        times = self._transit.get(v)
        if times:
            for tt, agent in times.items():
                if agent != ignore and tt > latest:
                    latest = tt
        return latest + 1

    def min_rest_start(self, v: Vertex) -> Optional[int]:
        """Earliest timestep at which some path starts resting at v."""
        rests = self._rests.get(v)
        if not rests:
            return None
        return min(rests.values())

    # -- mutations -----------------------------------------------------------

    def set_path(self, agent: int, path: SpaceTimePath, validate: bool = True):
        """Replace `agent`'s reservation. With validate (the default) the write
        is rejected if it conflicts with any other reserved path; strips after
        task swaps write the victim's resting position unvalidated, because its
        safety is restored when that agent is re-served in the same timestep."""
        if validate:
            conflict = self._write_conflict(agent, path)
            if conflict is not None:
                raise TokenConflictError(f"agent {agent}: {conflict}")
        old = self.paths.get(agent)
        if old is not None:
            self._unindex(agent, old)
        self.paths[agent] = path
        self._index(agent, path)

    def _write_conflict(self, agent: int, path: SpaceTimePath) -> Optional[str]:
        prev = path.vertices[0]
        for i, v in enumerate(path.vertices):
            t = path.start_time + i
            if self.occupied(v, t, ignore=agent):
                return f"vertex conflict at {v} t={t}"
            if i > 0 and v != prev and self.swap_blocked(prev, v, t - 1, ignore=agent):
                return f"swap conflict over {prev}->{v} t={t - 1}"
            prev = v
        if not self.rest_safe(path.final, path.end_time, ignore=agent):
            return f"unsafe rest at {path.final} from t={path.end_time}"
        return None

    def _index(self, agent: int, path: SpaceTimePath):
        prev = None
        for i, v in enumerate(path.vertices):
            t = path.start_time + i
            self._transit.setdefault(v, {})[t] = agent
            if prev is not None and prev != v:
                self._edges[(prev, v, t - 1)] = agent
            prev = v
        self._rests.setdefault(path.final, {})[agent] = path.end_time

    def _unindex(self, agent: int, path: SpaceTimePath):
        prev = None
        for i, v in enumerate(path.vertices):
            t = path.start_time + i
            times = self._transit.get(v)
            if times and times.get(t) == agent:
                del times[t]
            if prev is not None and prev != v and self._edges.get((prev, v, t - 1)) == agent:
                del self._edges[(prev, v, t - 1)]
            prev = v
        rests = self._rests.get(path.final)
        if rests and agent in rests:
            del rests[agent]

    def assign(self, task_id: int, agent_id: int, pickup_time: int, path_end: int):
        if task_id in self.assignments:
            raise ValueError(f"task {task_id} already assigned")
        if agent_id in self.agent_task:
            raise ValueError(f"agent {agent_id} already has a task")
        self.assignments[task_id] = Assignment(agent_id, pickup_time, path_end)
        self.agent_task[agent_id] = task_id

    def unassign(self, task_id: int):
        a = self.assignments.pop(task_id)
        del self.agent_task[a.agent_id]

    def check_invariants(self):
        """Debug helper: pairwise conflict-freedom of all reserved paths."""
        agents = sorted(self.paths)
        for i, a in enumerate(agents):
            for b in agents[i + 1:]:
                c = detect_conflict(self.paths[a], self.paths[b])
                if c is not None:
                    raise TokenConflictError(f"agents {a}/{b}: {c}")
