"""An independent token-passing (TP) implementation used as a differential
oracle. It shares only the map/instance data structures with the package and
re-implements distances, space-time search, reservations, and the TP loop
with straight-line scans over per-agent paths.

The deterministic rules are the documented ones: requests served in ascending
agent id once the agent's path has ended; candidate tasks are pending tasks
whose pickup/delivery is not the final vertex of another agent's path; the
task with minimal true distance to its pickup wins, ties to the lower id;
search expands (f, -g, y*width+x, insertion) with moves ordered wait, up,
down, left, right; a leg that must park folds the earliest safe parking time
into its heuristic; relocation targets are tried nearest-first.
"""

from __future__ import annotations

import heapq
from collections import deque


class ReferenceTP:
    def __init__(self, instance):
        self.grid = instance.grid
        self.w, self.h = self.grid.width, self.grid.height
        self.obst = {(x, y) for y in range(self.h) for x in range(self.w)
                     if self.grid.cells[y][x] == "@"}
        self.endpoints = [
            (x, y) for y in range(self.h) for x in range(self.w)
            if self.grid.cells[y][x] in ("T", "E")]
        self.starts = list(instance.agent_starts)
        self.n = len(self.starts)
        self.specs = {t.id: t for t in instance.tasks}
        self.releases = sorted(instance.tasks, key=lambda t: (t.release, t.id))
        self._dist = {}
        # per-agent committed path: (start_time, [vertices...]); rest-in-place
        self.paths = {i: (0, [self.starts[i]]) for i in range(self.n)}
        self.pending = {}          # task id -> spec, the unassigned pool
        self.assignments = []      # (t, agent, task) log
        self.done = set()
        self.span = 4 * (self.w + self.h)

    # -- independent primitives ------------------------------------------------

    def neighbors(self, v):
        x, y = v
        out = []
        for n in ((x, y - 1), (x, y + 1), (x - 1, y), (x + 1, y)):
            if 0 <= n[0] < self.w and 0 <= n[1] < self.h and n not in self.obst:
                out.append(n)
        return out

    def dist(self, a, b):
        field = self._dist.get(a)
        if field is None:
            field = {a: 0}
            q = deque([a])
            while q:
                v = q.popleft()
                for n in self.neighbors(v):
                    if n not in field:
                        field[n] = field[v] + 1
                        q.append(n)
            self._dist[a] = field
        return field.get(b, -1)

    def pos(self, agent, t):
        start, verts = self.paths[agent]
        i = t - start
        if i < 0:
            i = 0
        if i >= len(verts):
            i = len(verts) - 1
        return verts[i]

    def path_end(self, agent):
        start, verts = self.paths[agent]
        return start + len(verts) - 1

    def blocked(self, me, v, t):
        for j in range(self.n):
            if j != me and self.pos(j, t) == v:
                return True
        return False

    def swap(self, me, u, v, t):
        for j in range(self.n):
            if j != me and self.pos(j, t) == v and self.pos(j, t + 1) == u:
                return True
        return False

    def earliest_park(self, me, v):
        """First time parking at v forever is safe, or None."""
        latest = -1
        for j in range(self.n):
            if j == me:
                continue
            start, verts = self.paths[j]
            if verts[-1] == v:
                return None
            for i, u in enumerate(verts):
                if u == v and start + i > latest:
                    latest = start + i
        return latest + 1

    def astar(self, me, origin, goal, t0, park):
        if origin == goal and not park:
            return [origin]
        gdist = self._dist.setdefault(goal, None)
        if gdist is None:
            self.dist(goal, origin)
            gdist = self._dist[goal]
        horizon = t0 + self.span
        eg = None
        if park:
            eg = self.earliest_park(me, goal)
            if eg is None or eg > horizon:
                return None
        h0 = gdist.get(origin, -1)
        if h0 < 0:
            return None
        if eg is not None and eg - t0 > h0:
            h0 = eg - t0
        if t0 + h0 > horizon:
            return None
        came = {(origin, t0): None}
        heap = [(h0, 0, origin[1] * self.w + origin[0], 0, (origin, t0))]
        pushes = 0
        while heap:
            _, ng, _, _, state = heapq.heappop(heap)
            v, t = state
            if v == goal and (eg is None or t >= eg):
                seq = []
                s = state
                while s is not None:
                    seq.append(s[0])
                    s = came[s]
                seq.reverse()
                return seq
            t2 = t + 1
            if t2 > horizon:
                continue
            g2 = 1 - ng
            x, y = v
            for n in (v, (x, y - 1), (x, y + 1), (x - 1, y), (x + 1, y)):
                if n != v:
                    if not (0 <= n[0] < self.w and 0 <= n[1] < self.h):
                        continue
                    if n in self.obst:
                        continue
                if (n, t2) in came:
                    continue
                hh = gdist.get(n, -1)
                if hh < 0 or t2 + hh > horizon:
                    continue
                if eg is not None and eg - t2 > hh:
                    hh = eg - t2
                if self.blocked(me, n, t2):
                    continue
                if n != v and self.swap(me, v, n, t):
                    continue
                came[(n, t2)] = state
                pushes += 1
                heapq.heappush(heap, (g2 + hh, -g2, n[1] * self.w + n[0],
                                      pushes, (n, t2)))
        return None

    # -- the TP loop -------------------------------------------------------------

    def run(self, step_cap=100000):
        t = 0
        release_i = 0
        task_ends = {}  # agent -> (task id, end time)
        while len(self.done) < len(self.specs):
            if t > step_cap:
                raise RuntimeError("reference TP exceeded step cap")
            while (release_i < len(self.releases)
                   and self.releases[release_i].release <= t):
                spec = self.releases[release_i]
                self.pending[spec.id] = spec
                release_i += 1
            for agent in range(self.n):
                if self.path_end(agent) > t:
                    continue
                self.serve(agent, t, task_ends)
            t += 1
            for agent, (tid, end) in list(task_ends.items()):
                if end <= t:
                    self.done.add(tid)
                    del task_ends[agent]
        return self.assignments

    def serve(self, agent, t, task_ends):
        finals = {self.paths[j][1][-1] for j in range(self.n) if j != agent}
        cands = [tid for tid in sorted(self.pending)
                 if self.pending[tid].pickup not in finals
                 and self.pending[tid].delivery not in finals]
        loc = self.pos(agent, t)
        if cands:
            best, best_cost = None, None
            for tid in cands:
                c = self.dist(self.pending[tid].pickup, loc)
                if best is None or c < best_cost:
                    best, best_cost = tid, c
            spec = self.pending[best]
            leg1 = self.astar(agent, loc, spec.pickup, t, park=False)
            full = None
            if leg1 is not None:
                t_pick = t + len(leg1) - 1
                leg2 = self.astar(agent, spec.pickup, spec.delivery, t_pick,
                                  park=True)
                if leg2 is not None:
                    full = leg1 + leg2[1:]
            if full is not None:
                del self.pending[best]
                self.paths[agent] = (t, full)
                self.assignments.append((t, agent, best))
                task_ends[agent] = (best, t + len(full) - 1)
                return
            self.paths[agent] = (t, [loc, loc])  # failed plan: wait and retry
            return
        # no assignable task: clear a pending delivery vertex or stay
        if any(s.delivery == loc for s in self.pending.values()):
            path = self.relocate(agent, loc, t)
            if path is not None:
                self.paths[agent] = (t, path)
                return
        self.paths[agent] = (t, [loc, loc])

    def relocate(self, agent, loc, t):
        forbidden = set()
        for s in self.pending.values():
            forbidden.add(s.pickup)
            forbidden.add(s.delivery)
        options = []
        for e in self.endpoints:
            if e == loc or e in forbidden:
                continue
            d = self.dist(loc, e)
            if d < 0:
                continue
            options.append((d, e[1] * self.w + e[0], e))
        options.sort()
        for d, _, e in options:
            ep = self.earliest_park(agent, e)
            if ep is None or ep > t + self.span:
                continue
            path = self.astar(agent, loc, e, t, park=True)
            if path is not None:
                return path
        return None
