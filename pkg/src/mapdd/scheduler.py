"""The four token-passing schedulers: TP, D-TP, TPTS, D-TPTS.

All four share one machinery. TP is D-TP with alpha=0 (pure execution cost);
TPTS is D-TPTS with alpha=0, swapping on, switching off. The deadline-aware
variants maintain a pickup deadline per pending task (deadline minus the
latest-possible dummy-path length) and select tasks by the weighted score

    alpha * (pickup_deadline - now) + (1 - alpha) * h(agent, pickup)

D-TPTS additionally reassigns not-yet-picked-up tasks to agents that can reach
the pickup sooner (task swapping) and lets an en-route agent abandon its task
for a strictly more urgent and strictly closer new one (task switching).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import (IDLE, RELOCATING, TO_PICKUP, AgentState, SpaceTimePath,
                   Task, Token, detect_conflict)
from .gridmap import DistanceCache, GridMap, Vertex
from .planner import PlannedRoute, Planner, PlanRequest, ReversePlanRequest

ALGORITHMS = ("tp", "dtp", "tpts", "dtpts")


@dataclass(frozen=True)
class SchedulerConfig:
    algorithm: str = "tp"
    alpha: float = 0.0
    enable_swap: bool = False
    enable_switch: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.algorithm == "tp" and (self.alpha != 0.0 or self.enable_swap
                                       or self.enable_switch):
            raise ValueError("tp fixes alpha=0 with no swapping/switching")
        if self.algorithm == "tpts" and (self.alpha != 0.0 or not self.enable_swap
                                         or self.enable_switch):
            raise ValueError("tpts fixes alpha=0 with swapping only")
        if self.algorithm == "dtp" and (self.enable_swap or self.enable_switch):
            raise ValueError("dtp does not support swapping/switching")
        if self.enable_switch and self.algorithm not in ("tpts", "dtpts"):
            raise ValueError("task switching requires the dtpts family")

    @property
    def swap_family(self) -> bool:
        """True for the schedulers that keep tasks pending until pickup."""
        return self.algorithm in ("tpts", "dtpts")

    @staticmethod
    def make(algorithm: str, alpha: float = 0.0, swap: bool = False,
             switch: bool = False) -> "SchedulerConfig":
        """CLI-facing constructor: tpts implies swapping; contradictory flag
        combinations (tp with a nonzero alpha, dtp with swapping) still raise."""
        if algorithm == "tp" and (alpha != 0.0 or swap or switch):
            raise ValueError("tp fixes alpha=0 with no swapping/switching")
        if algorithm == "tpts":
            if alpha != 0.0 or switch:
                raise ValueError("tpts fixes alpha=0 and never switches tasks")
            return SchedulerConfig("tpts", 0.0, True, False)
        return SchedulerConfig(algorithm, alpha, swap, switch)


@dataclass(frozen=True)
class AssignmentScore:
    task_id: int
    margin: int      # pickup_deadline - now, signed; negative means late
    cost: int        # true distance from the agent to the pickup
    score: float


@dataclass
class StepContext:
    """Everything one scheduler step operates on. Owned by the simulator;
    the token is mutated single-threaded for the duration of a step."""

    grid: GridMap
    dcache: DistanceCache
    planner: Planner
    token: Token
    agents: dict[int, AgentState]
    tasks: dict[int, Task]          # every task ever released, by id
    cfg: SchedulerConfig
    trace: Optional[Callable[..., None]] = None
    step_stats: dict = field(default_factory=dict)

    def emit(self, kind: str, **payload):
        if self.trace is not None:
            self.trace(kind, **payload)


def score_task(cfg: SchedulerConfig, task: Task, agent_loc: Vertex, now: int,
               dcache: DistanceCache) -> AssignmentScore:
    cost = dcache.dist(task.pickup, agent_loc)
    if cfg.alpha == 0.0:
        return AssignmentScore(task.id, 0, cost, float(cost))
    margin = task.pickup_deadline - now
    return AssignmentScore(task.id, margin, cost,
                           cfg.alpha * margin + (1.0 - cfg.alpha) * cost)


def score_and_select(ctx: StepContext, agent_id: int, candidates: list[int],
                     now: int) -> int:
    """Task with the minimum weighted score; ties go to the lower task id."""
    loc = ctx.agents[agent_id].location
    best_id = None
    best = 0.0
    for tid in sorted(candidates):
        s = score_task(ctx.cfg, ctx.token.tasks[tid], loc, now, ctx.dcache)
        if best_id is None or s.score < best:
            best_id, best = tid, s.score
    if best_id is None:
        raise ValueError("candidate set is empty")
    return best_id


def candidate_tasks(ctx: StepContext, agent_id: int) -> list[int]:
    """Pending tasks whose pickup and delivery are not the resting vertex of
    any other agent's path. With swapping, tasks assigned to another agent but
    not yet picked up stay eligible (the incumbent's own reservation naturally
    ends at the delivery and must not disqualify its task)."""
    token = ctx.token
    include_assigned = ctx.cfg.swap_family and ctx.cfg.enable_swap
    out = []
    for tid in sorted(token.tasks):
        assignment = token.assignments.get(tid)
        if assignment is not None and not include_assigned:
            continue
        incumbent = assignment.agent_id if assignment is not None else None
        task = token.tasks[tid]
        blocked = False
        for v in (task.pickup, task.delivery):
            for owner in token.rest_agents(v):
                if owner != agent_id and owner != incumbent:
                    blocked = True
                    break
            if blocked:
                break
        if not blocked:
            out.append(tid)
    return out


def update_pickup_deadlines(ctx: StepContext, task_ids) -> None:
    """Replan each task's dummy path backwards from its delivery deadline and
    set pickup_deadline = deadline - |dummy path|. When no dummy path exists
    within [now, deadline], fall back to the free-space distance bound, which
    may push the margin negative; that legitimately signals urgency."""
    token = ctx.token
    for tid in sorted(task_ids):
        task = token.tasks[tid]
        req = ReversePlanRequest(origin=task.delivery, target=task.pickup,
                                 end_time=task.delivery_deadline,
                                 earliest_time=token.current_time)
        dummy = ctx.planner.plan_reverse(req, token)
        token.dummy_paths[tid] = dummy
        if dummy is not None:
            task.pickup_deadline = task.delivery_deadline - dummy.length
            ctx.emit("deadline_update", task=tid,
                     pickup_deadline=task.pickup_deadline,
                     dummy_len=dummy.length, fallback=False)
        else:
            dist = ctx.dcache.dist(task.delivery, task.pickup)
            task.pickup_deadline = task.delivery_deadline - dist
            ctx.emit("deadline_update", task=tid,
                     pickup_deadline=task.pickup_deadline,
                     dummy_len=None, fallback=True)


def _recompute_overwritten(ctx: StepContext, written: list[SpaceTimePath]) -> None:
    """A freshly reserved path invalidates the stored dummy path of any open
    pending task it collides with; those pickup deadlines are recomputed
    immediately. Assigned-but-unpicked tasks are skipped: the winner's own
    reservation always parks on the dummy's endpoint, and their deadline is
    refreshed if they ever return to the open pool."""
    if not written:
        return
    token = ctx.token
    hit = []
    for tid in sorted(token.tasks):
        if tid in token.assignments:
            continue
        dummy = token.dummy_paths.get(tid)
        if dummy is None:
            continue
        for p in written:
            if detect_conflict(dummy, p, rest1=False, rest2=True) is not None:
                hit.append(tid)
                break
    if hit:
        update_pickup_deadlines(ctx, hit)


def _requesters(ctx: StepContext) -> deque:
    now = ctx.token.current_time
    return deque(sorted(a for a, p in ctx.token.paths.items() if p.end_time <= now))


def _stay(ctx: StepContext, agent: AgentState, stranded: bool = False) -> None:
    now = ctx.token.current_time
    loc = agent.location
    path = SpaceTimePath(now, (loc, loc))
    ctx.token.set_path(agent.id, path, validate=not stranded)
    ctx.emit("stay", agent=agent.id, stranded=stranded)


def _plan_two_leg(ctx: StepContext, agent: AgentState, task: Task) -> Optional[PlannedRoute]:
    req = PlanRequest(agent=agent.id, origin=agent.location,
                      waypoints=(task.pickup, task.delivery),
                      start_time=ctx.token.current_time)
    return ctx.planner.plan_route(req, ctx.token)


def _commit_assignment(ctx: StepContext, agent: AgentState, task: Task,
                       route: PlannedRoute) -> None:
    token = ctx.token
    pickup_time = route.waypoint_times[0]
    token.assign(task.id, agent.id, pickup_time, route.path.end_time)
    token.set_path(agent.id, route.path)
    agent.assigned_task = task.id
    agent.phase = TO_PICKUP
    ctx.emit("assign", agent=agent.id, task=task.id,
             pickup_time=pickup_time, path_end=route.path.end_time)


def _pending_endpoint_set(ctx: StepContext) -> set[Vertex]:
    verts: set[Vertex] = set()
    for task in ctx.token.tasks.values():
        verts.add(task.pickup)
        verts.add(task.delivery)
    return verts


def _resolve_idle(ctx: StepContext, agent: AgentState) -> list[SpaceTimePath]:
    """Deadlock removal or stay, for an agent that obtained no task.

    An idle agent must clear out when (a) it rests on the delivery vertex of a
    pending task, (b) it rests off-endpoint (possible only after its task was
    swapped or switched away mid-route), or (c) staying put is unsafe because
    an existing reservation drives through its cell later. Otherwise it stays.
    """
    token = ctx.token
    now = token.current_time
    loc = agent.location
    unsafe = not token.rest_safe(loc, now, ignore=agent.id)
    blocking = any(task.delivery == loc for task in token.tasks.values())
    off_endpoint = not ctx.grid.is_endpoint(loc)
    if not (unsafe or blocking or off_endpoint):
        _stay(ctx, agent)
        return []

    forbidden = _pending_endpoint_set(ctx)
    path = ctx.planner.plan_relocation(agent.id, loc, now, token, forbidden)
    escape = False
    if path is None and unsafe:
        path = ctx.planner.plan_escape(agent.id, loc, now, token, forbidden)
        escape = True
    if path is not None and path.length > 0:
        token.set_path(agent.id, path)
        agent.phase = RELOCATING
        ctx.emit("relocate", agent=agent.id, to_x=path.final[0], to_y=path.final[1],
                 arrival=path.end_time, escape=escape)
        return [path]
    # nothing plannable; stay, flagged when the spot is genuinely unsafe
    _stay(ctx, agent, stranded=unsafe)
    return []


def _release(ctx: StepContext, released: list[Task]) -> None:
    for task in released:
        ctx.token.tasks[task.id] = task
        ctx.emit("release", task=task.id, deadline=task.delivery_deadline)
    update_pickup_deadlines(ctx, [t.id for t in released])


# -- D-TP (and TP as its alpha=0 special case) --------------------------------

def dtp_step(ctx: StepContext, released: list[Task]) -> None:
    """One timestep of deadline-aware token passing: release, deadline updates,
    then serve every token request. Tasks leave the pending set at assignment.
    A failed plan leaves the task pending and the agent waiting one step."""
    token = ctx.token
    now = token.current_time
    _release(ctx, released)
    queue = _requesters(ctx)
    while queue:
        agent = ctx.agents[queue.popleft()]
        written: list[SpaceTimePath] = []
        acted = False
        cands = candidate_tasks(ctx, agent.id)
        if cands:
            tid = score_and_select(ctx, agent.id, cands, now)
            task = token.tasks[tid]
            route = _plan_two_leg(ctx, agent, task)
            if route is not None:
                del token.tasks[tid]
                token.dummy_paths.pop(tid, None)
                _commit_assignment(ctx, agent, task, route)
                written.append(route.path)
                acted = True
            else:
                _stay(ctx, agent)
                acted = True
        if not acted:
            written.extend(_resolve_idle(ctx, agent))
        _recompute_overwritten(ctx, written)


# -- D-TPTS (and TPTS as its alpha=0, no-switch special case) ------------------

def task_switch_check(ctx: StepContext, agent_id: int, new_task_id: int) -> bool:
    """Abandon the current task iff the new one is strictly more urgent and
    strictly cheaper to reach. On switch the agent is unassigned and its
    reservation collapses to its current cell; it re-requests the token."""
    agent = ctx.agents[agent_id]
    if agent.phase != TO_PICKUP:
        return False
    token = ctx.token
    cur = token.tasks[agent.assigned_task]
    new = token.tasks[new_task_id]
    loc = agent.location
    if not (new.pickup_deadline < cur.pickup_deadline
            and ctx.dcache.dist(new.pickup, loc) < ctx.dcache.dist(cur.pickup, loc)):
        return False
    token.unassign(cur.id)
    token.set_path(agent_id, SpaceTimePath(token.current_time, (loc,)), validate=False)
    agent.assigned_task = None
    agent.phase = IDLE
    ctx.emit("switch", agent=agent_id, abandoned=cur.id, trigger=new_task_id)
    # back in the open pool: refresh its urgency against the current token
    update_pickup_deadlines(ctx, [cur.id])
    return True


def _attempt_steal(ctx: StepContext, agent: AgentState, task: Task) -> Optional[list[SpaceTimePath]]:
    """Reassign `task` to `agent` if its planned pickup arrival strictly beats
    the incumbent's reserved one. Atomic: on planning failure or a losing
    arrival the token is left untouched. The stripped incumbent keeps only its
    current cell and re-requests the token this same timestep."""
    token = ctx.token
    now = token.current_time
    assignment = token.assignments[task.id]
    # free-space lower bound: no plan can arrive earlier than now + h
    if now + ctx.dcache.dist(task.pickup, agent.location) >= assignment.pickup_time:
        return None
    incumbent = ctx.agents[assignment.agent_id]
    old_path = token.paths[incumbent.id]
    strip = SpaceTimePath(now, (incumbent.location,))
    token.set_path(incumbent.id, strip, validate=False)
    # pickup leg first: most attempts lose on arrival, so defer the second leg
    leg1 = ctx.planner.plan_route(
        PlanRequest(agent=agent.id, origin=agent.location,
                    waypoints=(task.pickup,), start_time=now),
        token, rest_final=False)
    route = None
    if leg1 is not None and leg1.waypoint_times[0] < assignment.pickup_time:
        pickup_t = leg1.waypoint_times[0]
        leg2 = ctx.planner.plan_route(
            PlanRequest(agent=agent.id, origin=task.pickup,
                        waypoints=(task.delivery,), start_time=pickup_t),
            token)
        if leg2 is not None:
            vertices = leg1.path.vertices + leg2.path.vertices[1:]
            route = PlannedRoute(SpaceTimePath(now, vertices),
                                 (pickup_t, leg2.waypoint_times[0]))
    if route is None:
        token.set_path(incumbent.id, old_path, validate=False)
        return None
    token.unassign(task.id)
    incumbent.assigned_task = None
    incumbent.phase = IDLE
    _commit_assignment(ctx, agent, task, route)
    ctx.emit("steal", task=task.id, from_agent=incumbent.id, to_agent=agent.id,
             pickup_time=route.waypoint_times[0])
    return [strip, route.path]


def _get_task(ctx: StepContext, agent: AgentState, queue: deque, queued: set) -> None:
    token = ctx.token
    now = token.current_time
    written: list[SpaceTimePath] = []
    assigned = False
    cands = candidate_tasks(ctx, agent.id)
    while cands:
        tid = score_and_select(ctx, agent.id, cands, now)
        cands.remove(tid)
        task = token.tasks[tid]
        if tid not in token.assignments:
            route = _plan_two_leg(ctx, agent, task)
            if route is not None:
                _commit_assignment(ctx, agent, task, route)
                written.append(route.path)
                assigned = True
                break
        elif ctx.cfg.enable_swap:
            victim = token.assignments[tid].agent_id
            new_paths = _attempt_steal(ctx, agent, task)
            if new_paths is not None:
                written.extend(new_paths)
                if victim not in queued:
                    queue.append(victim)
                    queued.add(victim)
                assigned = True
                break
    if not assigned:
        written.extend(_resolve_idle(ctx, agent))
    _recompute_overwritten(ctx, written)


def dtpts_step(ctx: StepContext, released: list[Task]) -> None:
    """One timestep of deadline-aware token passing with task swaps: release,
    deadline updates, task switching against the new tasks, then GetTask for
    every requester. Tasks leave the pending set only at pickup."""
    _release(ctx, released)
    if ctx.cfg.enable_switch and released:
        stripped: list[SpaceTimePath] = []
        for task in released:
            for agent_id in sorted(ctx.agents):
                if ctx.agents[agent_id].phase == TO_PICKUP:
                    if task_switch_check(ctx, agent_id, task.id):
                        stripped.append(ctx.token.paths[agent_id])
        _recompute_overwritten(ctx, stripped)
    queue = _requesters(ctx)
    queued = set(queue)
    served = 0
    while queue:
        served += 1
        if served > 1000 * max(1, len(ctx.agents)):
            raise RuntimeError("token request loop runaway; steal chain "
                               "failed to terminate")
        agent_id = queue.popleft()
        queued.discard(agent_id)
        _get_task(ctx, ctx.agents[agent_id], queue, queued)


def run_step(ctx: StepContext, released: list[Task]) -> None:
    if ctx.cfg.swap_family:
        dtpts_step(ctx, released)
    else:
        dtp_step(ctx, released)
