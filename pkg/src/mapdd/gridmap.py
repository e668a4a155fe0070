"""Grid maps for MAPD-D: parsing, endpoint classification, true distances,
and the well-formedness check that guarantees online instances stay solvable.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

Vertex = tuple[int, int]  # (x, y), x = column, y = row

OBSTACLE = "@"
FREE = "."
TASK_ENDPOINT = "T"
NON_TASK_ENDPOINT = "E"

_CELL_KINDS = {OBSTACLE, FREE, TASK_ENDPOINT, NON_TASK_ENDPOINT}

MAP_HEADER = "mapd-d map v1"

UNREACHABLE = -1


class MapError(ValueError):
    """Raised for malformed map files; message names the offending line/column."""


@dataclass(frozen=True)
class GridMap:
    """A 4-neighbor grid. `cells` holds one row string per y, characters as in
    the map file format. All non-obstacle cells are guaranteed connected."""

    width: int
    height: int
    cells: tuple[str, ...]

    def kind(self, v: Vertex) -> str:
        return self.cells[v[1]][v[0]]

    def in_bounds(self, v: Vertex) -> bool:
        return 0 <= v[0] < self.width and 0 <= v[1] < self.height

    def passable(self, v: Vertex) -> bool:
        return self.cells[v[1]][v[0]] != OBSTACLE

    def is_endpoint(self, v: Vertex) -> bool:
        return self.cells[v[1]][v[0]] in (TASK_ENDPOINT, NON_TASK_ENDPOINT)

    def neighbors(self, v: Vertex) -> list[Vertex]:
        """Passable 4-neighbors in the fixed expansion order up, down, left, right."""
        x, y = v
        out = []
        for nx, ny in ((x, y - 1), (x, y + 1), (x - 1, y), (x + 1, y)):
            if 0 <= nx < self.width and 0 <= ny < self.height and self.cells[ny][nx] != OBSTACLE:
                out.append((nx, ny))
        return out

    def vertex_index(self, v: Vertex) -> int:
        """Stable scalar id used for deterministic tie-breaking: y*width + x."""
        return v[1] * self.width + v[0]

    @property
    def task_endpoints(self) -> list[Vertex]:
        return self._of_kind(TASK_ENDPOINT)

    @property
    def non_task_endpoints(self) -> list[Vertex]:
        return self._of_kind(NON_TASK_ENDPOINT)

    @property
    def endpoints(self) -> list[Vertex]:
        return [v for v in self.vertices() if self.is_endpoint(v)]

    def _of_kind(self, kind: str) -> list[Vertex]:
        return [(x, y) for y in range(self.height) for x in range(self.width)
                if self.cells[y][x] == kind]

    def vertices(self) -> Iterable[Vertex]:
        for y in range(self.height):
            for x in range(self.width):
                if self.cells[y][x] != OBSTACLE:
                    yield (x, y)

    def render(self) -> str:
        """Canonical map-file text; also the basis for content hashing."""
        lines = [MAP_HEADER, f"{self.width} {self.height}"]
        lines.extend(self.cells)
        return "\n".join(lines) + "\n"


def parse_map(text: str) -> GridMap:
    """Parse map-file content. Rejects bad headers, unknown characters, ragged
    rows, and disconnected passable space, naming the offending line/column."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAP_HEADER:
        raise MapError(f"line 1: expected header {MAP_HEADER!r}")
    if len(lines) < 2:
        raise MapError("line 2: missing '<width> <height>'")
    parts = lines[1].split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise MapError(f"line 2: expected '<width> <height>', got {lines[1]!r}")
    width, height = int(parts[0]), int(parts[1])
    if width < 1 or height < 1:
        raise MapError("line 2: width and height must be >= 1")
    rows = lines[2:]
    # ignore trailing blank lines only
    while rows and rows[-1] == "":
        rows.pop()
    if len(rows) != height:
        raise MapError(f"line {len(lines)}: expected {height} rows, found {len(rows)}")
    for y, row in enumerate(rows):
        line_no = y + 3
        if len(row) != width:
            raise MapError(f"line {line_no}: ragged row, expected {width} cells, got {len(row)}")
        for x, ch in enumerate(row):
            if ch not in _CELL_KINDS:
                raise MapError(f"line {line_no}, column {x + 1}: unknown cell character {ch!r}")
    grid = GridMap(width=width, height=height, cells=tuple(rows))
    _check_connected(grid)
    return grid


def _check_connected(grid: GridMap):
    passable = [v for v in grid.vertices()]
    if not passable:
        raise MapError("line 3: map has no passable cells")
    seen = {passable[0]}
    queue = deque(seen)
    while queue:
        v = queue.popleft()
        for n in grid.neighbors(v):
            if n not in seen:
                seen.add(n)
                queue.append(n)
    for v in passable:
        if v not in seen:
            raise MapError(
                f"line {v[1] + 3}, column {v[0] + 1}: passable cell {v} "
                "is disconnected from the rest of the map")


@dataclass(frozen=True)
class DistanceField:
    """Exact shortest-path lengths from `source` over passable cells,
    ignoring agents. UNREACHABLE marks cells cut off by obstacles."""

    source: Vertex
    dist: dict[Vertex, int]

    def __getitem__(self, v: Vertex) -> int:
        return self.dist.get(v, UNREACHABLE)


def bfs_distance(grid: GridMap, source: Vertex) -> DistanceField:
    """Breadth-first true distances from `source` (must be passable)."""
    if not grid.in_bounds(source) or not grid.passable(source):
        raise ValueError(f"source {source} is not a passable cell")
    dist = {source: 0}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        d = dist[v] + 1
        for n in grid.neighbors(v):
            if n not in dist:
                dist[n] = d
                queue.append(n)
    return DistanceField(source=source, dist=dist)


class DistanceCache:
    """Lazily computed, memoized distance fields, one per source vertex.

    The planner's heuristic queries this millions of times per sweep; fields
    are immutable once built and safe to share within a run.
    """

    def __init__(self, grid: GridMap):
        self.grid = grid
        self._fields: dict[Vertex, DistanceField] = {}

    def field(self, source: Vertex) -> DistanceField:
        f = self._fields.get(source)
        if f is None:
            f = bfs_distance(self.grid, source)
            self._fields[source] = f
        return f

    def dist(self, a: Vertex, b: Vertex) -> int:
        return self.field(a)[b]


@dataclass(frozen=True)
class WellFormedReport:
    """Outcome of the three solvability conditions for online MAPD instances:
    (a) finitely many tasks, (b) agents fit on non-task endpoints,
    (c) every endpoint pair connected without traversing other endpoints."""

    finite_tasks: bool
    enough_non_task_endpoints: bool
    endpoint_paths_exist: bool
    violating_pairs: tuple[tuple[Vertex, Vertex], ...] = field(default_factory=tuple)
    num_agents: int = 0
    num_non_task_endpoints: int = 0

    @property
    def ok(self) -> bool:
        return self.finite_tasks and self.enough_non_task_endpoints and self.endpoint_paths_exist


def check_well_formed(grid: GridMap, num_agents: int) -> WellFormedReport:
    """Pure, deterministic well-formedness check.

    Condition (c) is evaluated with one BFS per endpoint over non-endpoint
    cells (touching another endpoint terminates a branch), which is equivalent
    to pairwise reachability with all other endpoints deleted.
    """
    endpoints = grid.endpoints
    non_task = grid.non_task_endpoints
    cond_b = num_agents <= len(non_task)

    violating: list[tuple[Vertex, Vertex]] = []
    endpoint_set = set(endpoints)
    for s in endpoints:
        reachable = {s}
        seen = {s}
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for n in grid.neighbors(v):
                if n in seen:
                    continue
                seen.add(n)
                if n in endpoint_set:
                    reachable.add(n)  # touch it, but do not traverse it
                else:
                    queue.append(n)
        for t in endpoints:
            if t not in reachable:
                violating.append((s, t))

    return WellFormedReport(
        finite_tasks=True,
        enough_non_task_endpoints=cond_b,
        endpoint_paths_exist=not violating,
        violating_pairs=tuple(violating),
        num_agents=num_agents,
        num_non_task_endpoints=len(non_task),
    )
