"""mapdd: online multi-agent pickup and delivery with task deadlines.

A deterministic grid-warehouse simulator plus the token-passing schedulers
TP, D-TP, TPTS, and D-TPTS, with instance generation, a benchmark sweep
harness, and an independent trace validator.
"""

from .core import (AgentState, Conflict, SpaceTimePath, TardinessRecord, Task,
                   Token, detect_conflict, occupancy_at, tardiness)
from .gridmap import (DistanceCache, DistanceField, GridMap, MapError, Vertex,
                      WellFormedReport, bfs_distance, check_well_formed,
                      parse_map)
from .instancegen import (GenSpec, Instance, InstanceError, TaskSpec, generate,
                          load_instance, resolve_map, save_instance)
from .planner import PlannedRoute, Planner, PlanRequest, ReversePlanRequest
from .scheduler import (AssignmentScore, SchedulerConfig, candidate_tasks,
                        dtp_step, dtpts_step, score_and_select, score_task,
                        task_switch_check, update_pickup_deadlines)
from .simulator import (LivenessError, RunResult, Simulation, ValidationReport,
                        read_trace, run, trace_to_jsonl, validate_trace,
                        write_trace)

__version__ = "0.1.0"
