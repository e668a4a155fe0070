"""Space-time A* against the token's reservations.

Three planners share one search core:
  - forward two-leg planning (current location -> pickup -> delivery),
  - reverse-time planning of latest-possible dummy paths (delivery backwards
    to pickup, used to derive pickup deadlines),
  - relocation planning for idle agents that must clear an endpoint.

Determinism contract: nodes are expanded in ascending (f, -g, y*width+x,
insertion order) and successors are generated in the fixed order
{wait, up, down, left, right}; identical request + token always yields an
identical path. When a path must end parked forever, the earliest safe
parking time at the goal is folded into the heuristic, which keeps the
search from flooding wait states while staying admissible and consistent.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable, Optional

from .core import SpaceTimePath, Token
from .gridmap import DistanceCache, GridMap, Vertex

DEFAULT_HORIZON_FACTOR = 4


@dataclass(frozen=True)
class PlanRequest:
    agent: int
    origin: Vertex
    waypoints: tuple[Vertex, ...]
    start_time: int
    horizon: Optional[int] = None  # max arrival timestep per leg


@dataclass(frozen=True)
class ReversePlanRequest:
    origin: Vertex        # delivery, where the backward search starts
    target: Vertex        # pickup, where it must end
    end_time: int         # delivery deadline
    earliest_time: int    # clamp, normally the current token time


@dataclass(frozen=True)
class PlannedRoute:
    path: SpaceTimePath
    waypoint_times: tuple[int, ...]  # arrival timestep at each waypoint


class Planner:
    def __init__(self, grid: GridMap, dcache: Optional[DistanceCache] = None,
                 horizon_factor: int = DEFAULT_HORIZON_FACTOR,
                 max_expansions: Optional[int] = None):
        self.grid = grid
        self.dcache = dcache or DistanceCache(grid)
        self.horizon_factor = horizon_factor
        self.max_expansions = max_expansions
        # successor moves per vertex with their tie-break indices, pinned
        # order: wait, up, down, left, right
        self._moves: dict[Vertex, tuple[tuple[Vertex, int], ...]] = {}
        for v in grid.vertices():
            x, y = v
            cand = [v, (x, y - 1), (x, y + 1), (x - 1, y), (x + 1, y)]
            self._moves[v] = tuple(
                (n, n[1] * grid.width + n[0]) for n in cand
                if grid.in_bounds(n) and grid.passable(n))

    def _leg_span(self) -> int:
        return self.horizon_factor * (self.grid.width + self.grid.height)

    # -- forward planning ----------------------------------------------------

    def plan_path(self, req: PlanRequest, token: Token) -> Optional[SpaceTimePath]:
        """Plan through `waypoints` in order, wait moves allowed, conflict-free
        against every other reserved path including resting at the final vertex
        forever after. Fails atomically: no half-written legs."""
        route = self.plan_route(req, token)
        return route.path if route is not None else None

    def plan_route(self, req: PlanRequest, token: Token,
                   rest_final: bool = True) -> Optional[PlannedRoute]:
        """plan_path plus the arrival timestep at each waypoint. `rest_final`
        off drops the park-forever safety requirement at the last waypoint
        (used for hypothetical pickup legs during swap evaluation)."""
        if not req.waypoints:
            raise ValueError("waypoints must be non-empty")
        vertices: list[Vertex] = [req.origin]
        arrivals: list[int] = []
        t = req.start_time
        here = req.origin
        for i, goal in enumerate(req.waypoints):
            last = i == len(req.waypoints) - 1
            horizon = req.horizon if req.horizon is not None else t + self._leg_span()
            earliest_goal = None
            if last and rest_final:
                earliest_goal = token.earliest_rest_time(goal, ignore=req.agent)
                if earliest_goal is None or earliest_goal > horizon:
                    return None  # someone parks there, or safe only past horizon
            leg = self._search(
                start=here, start_time=t, token=token, ignore=req.agent,
                goal=goal, hmap=self.dcache.field(goal).dist,
                horizon=horizon, earliest_goal=earliest_goal)
            if leg is None:
                return None
            vertices.extend(leg[1:])
            t += len(leg) - 1
            arrivals.append(t)
            here = goal
        path = SpaceTimePath(start_time=req.start_time, vertices=tuple(vertices))
        return PlannedRoute(path=path, waypoint_times=tuple(arrivals))

    # -- reverse (dummy) planning ---------------------------------------------

    def plan_reverse(self, req: ReversePlanRequest, token: Token) -> Optional[SpaceTimePath]:
        """Latest-possible path whose forward reading leaves `target` (pickup)
        as late as possible and reaches `origin` (delivery) exactly at
        `end_time`, conflict-free against real reserved paths at the absolute
        timesteps it occupies. Search runs backwards in time from
        (origin, end_time) and never descends below `earliest_time`."""
        if req.end_time < req.earliest_time:
            return None
        dist = self.dcache.field(req.target).dist
        d = dist.get(req.origin, -1)
        if d < 0 or req.end_time - d < req.earliest_time:
            return None  # pigeonhole: even the free-space path does not fit
        if token.occupied(req.origin, req.end_time):
            return None
        blocked_from = token.min_rest_start(req.target)
        if blocked_from is not None and blocked_from <= req.earliest_time:
            return None  # pickup is parked on for the whole window
        fast = self._greedy_reverse(req, token, dist)
        if fast is not None:
            return fast
        return self._reverse_astar(req, token, dist)

    def _greedy_reverse(self, req, token, dist) -> Optional[SpaceTimePath]:
        """Try a pure descent of the distance field with no waits; this is the
        common uncongested case and avoids the full search. Falls back to A*
        (returns None) on the first blocked step."""
        v, t = req.origin, req.end_time
        back = [v]
        while v != req.target:
            t2 = t - 1
            step = None
            dv = dist[v]
            for n, _ in self._moves[v]:
                if n == v or dist[n] != dv - 1:
                    continue
                if token.occupied(n, t2) or token.swap_blocked(n, v, t2):
                    continue
                step = n
                break
            if step is None:
                return None
            back.append(step)
            v, t = step, t2
        return SpaceTimePath(start_time=t, vertices=tuple(reversed(back)))

    def _reverse_astar(self, req, token, dist) -> Optional[SpaceTimePath]:
        grid_w = self.grid.width
        moves = self._moves
        occupied = token.occupied
        swap_blocked = token.swap_blocked
        earliest = req.earliest_time
        start = (req.origin, req.end_time)
        heap = [(dist[req.origin], 0, req.origin[1] * grid_w + req.origin[0], 0, start)]
        parents: dict[tuple[Vertex, int], Optional[tuple[Vertex, int]]] = {start: None}
        counter = 0
        expansions = 0
        target = req.target
        while heap:
            _, neg_g, _, _, state = heapq.heappop(heap)
            v, t = state
            if v == target:
                back = []
                s = state
                while s is not None:
                    back.append(s[0])
                    s = parents[s]
                return SpaceTimePath(start_time=t, vertices=tuple(back))
            expansions += 1
            if self.max_expansions is not None and expansions > self.max_expansions:
                return None
            t2 = t - 1
            if t2 < earliest:
                continue
            g2 = 1 - neg_g
            for n, nvi in moves[v]:
                ns = (n, t2)
                if ns in parents:
                    continue
                h = dist.get(n, -1)
                if h < 0 or t2 - h < earliest:
                    continue
                if occupied(n, t2):
                    continue
                if n is not v and swap_blocked(n, v, t2):
                    continue
                parents[ns] = state
                counter += 1
                heapq.heappush(heap, (g2 + h, -g2, nvi, counter, ns))
        return None

    # -- relocation ------------------------------------------------------------

    def plan_relocation(self, agent: int, origin: Vertex, start_time: int,
                        token: Token, forbidden: set[Vertex]) -> Optional[SpaceTimePath]:
        """Path to the nearest endpoint that is not in `forbidden` (pending
        pickups/deliveries) and not the resting vertex of another path.
        Candidates are tried in ascending (distance, vertex index) order."""
        dist = self.dcache.field(origin)
        horizon = start_time + self._leg_span()
        cands = []
        for e in self.grid.endpoints:
            d = dist[e]
            if e == origin or e in forbidden or d < 0:
                continue
            cands.append((d, self.grid.vertex_index(e), e))
        cands.sort()
        for d, _, e in cands:
            earliest_goal = token.earliest_rest_time(e, ignore=agent)
            if earliest_goal is None or earliest_goal > horizon:
                continue
            path = self._search(
                start=origin, start_time=start_time, token=token, ignore=agent,
                goal=e, hmap=self.dcache.field(e).dist,
                horizon=horizon, earliest_goal=earliest_goal)
            if path is not None:
                return SpaceTimePath(start_time=start_time, vertices=tuple(path))
        return None

    def plan_escape(self, agent: int, origin: Vertex, start_time: int,
                    token: Token, forbidden: set[Vertex]) -> Optional[SpaceTimePath]:
        """Last-resort evacuation to any vertex where resting is safe; used when
        an agent stripped of its task cannot stay put without being run over."""
        path = self._search(
            start=origin, start_time=start_time, token=token, ignore=agent,
            goal=None, hmap=None,
            horizon=start_time + self._leg_span(), earliest_goal=None,
            goal_pred=lambda v: v not in forbidden)
        if path is None:
            return None
        return SpaceTimePath(start_time=start_time, vertices=tuple(path))

    # -- search core -----------------------------------------------------------

    def _search(self, start: Vertex, start_time: int, token: Token, ignore: int,
                goal: Optional[Vertex], hmap: Optional[dict],
                horizon: int, earliest_goal: Optional[int],
                goal_pred: Optional[Callable[[Vertex], bool]] = None
                ) -> Optional[list[Vertex]]:
        """Space-time A* over (vertex, timestep). With a `goal` vertex, `hmap`
        is its true-distance field and `earliest_goal` (when parking is
        required) lower-bounds the accepted arrival. Without a goal vertex the
        search is uniform-cost and accepts any rest-safe vertex passing
        `goal_pred`. Returns the vertex sequence from `start`, or None."""
        if hmap is not None:
            h0 = hmap.get(start, -1)
            if h0 < 0:
                return None
            if earliest_goal is not None and earliest_goal - start_time > h0:
                h0 = earliest_goal - start_time
        else:
            h0 = 0
        if start_time + h0 > horizon:
            return None
        grid_w = self.grid.width
        moves = self._moves
        occupied = token.occupied
        swap_blocked = token.swap_blocked
        rest_safe = token.rest_safe
        start_state = (start, start_time)
        heap = [(h0, 0, start[1] * grid_w + start[0], 0, start_state)]
        parents: dict[tuple[Vertex, int], Optional[tuple[Vertex, int]]] = {start_state: None}
        counter = 0
        expansions = 0
        while heap:
            _, neg_g, _, _, state = heapq.heappop(heap)
            v, t = state
            if goal is not None:
                accept = v == goal and (earliest_goal is None or t >= earliest_goal)
            else:
                accept = goal_pred(v) and rest_safe(v, t, ignore=ignore)
            if accept:
                seq = []
                s = state
                while s is not None:
                    seq.append(s[0])
                    s = parents[s]
                seq.reverse()
                return seq
            expansions += 1
            if self.max_expansions is not None and expansions > self.max_expansions:
                return None
            t2 = t + 1
            if t2 > horizon:
                continue
            g2 = 1 - neg_g
            for n, nvi in moves[v]:
                ns = (n, t2)
                if ns in parents:
                    continue
                if hmap is not None:
                    h = hmap.get(n, -1)
                    if h < 0 or t2 + h > horizon:
                        continue
                    if earliest_goal is not None and earliest_goal - t2 > h:
                        h = earliest_goal - t2
                else:
                    h = 0
                if occupied(n, t2, ignore):
                    continue
                if n is not v and swap_blocked(v, n, t, ignore):
                    continue
                parents[ns] = state
                counter += 1
                heapq.heappush(heap, (g2 + h, -g2, nvi, counter, ns))
        return None
