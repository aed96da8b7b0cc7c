"""Cost-ordered depth-first planning of complete rearrangement sequences.

Each search depth commits exactly one object: rebuild the traversability
graph against the current world, enumerate candidates for every unfinished
object, try them cheapest-first, and recurse with the moved object frozen
in place as an immovable obstacle. The method variants differ in two
switches only: whether a failed candidate permits trying the next one
(backtracking), and how prerelocation poses are produced (axis sampling,
midpoint-seeded descent, or corner-seeded descent).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dubins import DubinsPath
from .geom import (CONTACT_EPS, Polygon2D, Pose2D, SweptPolygon, Workspace,
                   compose, footprint_at, polygons_intersect, wrap_angle)
from .ptgraph import RearrangementCandidate, WorldObject, build_graph, candidate_stream
from .push_model import RobotParams, same_pose_mod_symmetry
from .transit import TransitPath, plan_transit

VALIDATE_STEP = 0.005
POSE_TOL = 1e-6

METHODS = ("relopush", "b", "bo", "boss")
_PRERELO_FOR = {"relopush": "axis", "b": "axis", "bo": "midpoint", "boss": "fillet"}
_BACKTRACKS = {"relopush": False, "b": True, "bo": True, "boss": True}

ACTION_KINDS = ("transit", "push_transfer", "obstacle_relocation")


@dataclass(frozen=True)
class WorldState:
    """Snapshot of the world between actions."""

    robot_pose: Pose2D
    object_poses: dict  # id -> Pose2D, treat as immutable
    done: frozenset


@dataclass(frozen=True)
class PlanAction:
    """One executable motion.

    transit moves the robot alone along `path` (a TransitPath). The push
    kinds move object_id rigidly attached via `attach`, so the object pose
    at any point of `path` (a DubinsPath) is compose(robot_pose, attach).
    """

    kind: str
    path: object
    object_id: Optional[str] = None
    attach: Optional[Pose2D] = None
    object_from: Optional[Pose2D] = None
    object_to: Optional[Pose2D] = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")

    @property
    def length(self) -> float:
        return self.path.length

    def robot_start(self) -> Pose2D:
        return self.path.start

    def robot_end(self) -> Pose2D:
        if self.kind == "transit":
            return self.path.end
        return self.path.endpoint()

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "path": self.path.to_dict()}
        if self.kind != "transit":
            d["object_id"] = self.object_id
            d["attach"] = [self.attach.x, self.attach.y, self.attach.theta]
            d["object_from"] = [self.object_from.x, self.object_from.y,
                                self.object_from.theta]
            d["object_to"] = [self.object_to.x, self.object_to.y,
                              self.object_to.theta]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlanAction":
        kind = d["kind"]
        if kind == "transit":
            return cls(kind, TransitPath.from_dict(d["path"]))
        return cls(
            kind,
            DubinsPath.from_dict(d["path"]),
            d["object_id"],
            Pose2D(*d["attach"]),
            Pose2D(*d["object_from"]),
            Pose2D(*d["object_to"]),
        )


@dataclass(frozen=True)
class RearrangementPlan:
    """Ordered actions plus cost bookkeeping and the commit order of objects."""

    actions: tuple
    pushing_length: float
    transit_length: float
    depth_trace: tuple  # object ids in the order they were finished
    method: str

    @property
    def total_length(self) -> float:
        return self.pushing_length + self.transit_length

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "method": self.method,
            "pushing_length": self.pushing_length,
            "transit_length": self.transit_length,
            "total_length": self.total_length,
            "depth_trace": list(self.depth_trace),
            "actions": [a.to_dict() for a in self.actions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RearrangementPlan":
        return cls(
            tuple(PlanAction.from_dict(a) for a in d["actions"]),
            float(d["pushing_length"]),
            float(d["transit_length"]),
            tuple(d["depth_trace"]),
            d["method"],
        )


@dataclass(frozen=True)
class PlanOutcome:
    status: str  # ok | timeout | no_solution
    plan: Optional[RearrangementPlan]
    elapsed: float
    candidates_tried: int

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class _BudgetExceeded(Exception):
    pass


class _Budget:
    """Cooperative wall-clock and work-unit limits, checked between candidates."""

    def __init__(self, time_limit: Optional[float], work_limit: Optional[int]):
        self.deadline = None if time_limit is None else time.monotonic() + time_limit
        self.work_left = work_limit
        self.tried = 0

    def charge(self):
        self.tried += 1
        if self.work_left is not None:
            self.work_left -= 1
            if self.work_left < 0:
                raise _BudgetExceeded
        self.check_time()

    def check_time(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise _BudgetExceeded


def _footprints(scenario, poses: dict) -> dict:
    shapes = {o.object_id: o.shape for o in scenario.objects}
    return {oid: footprint_at(shapes[oid], p) for oid, p in poses.items()}


def plan(scenario, method: str = "boss", time_limit: Optional[float] = 1200.0,
         work_limit: Optional[int] = None) -> PlanOutcome:
    """Plan a full rearrangement for a scenario.

    method selects backtracking and the prerelocation strategy; time_limit
    is wall-clock seconds and work_limit (candidate evaluations) gives a
    machine-independent cap for tests. Returns ok, timeout, or no_solution.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    t0 = time.monotonic()
    ws: Workspace = scenario.workspace
    params: RobotParams = scenario.params
    backtrack = _BACKTRACKS[method]
    prerelo_mode = _PRERELO_FOR[method]
    budget = _Budget(time_limit, work_limit)
    shapes = {o.object_id: o.shape for o in scenario.objects}
    symmetries = {o.object_id: o.symmetry for o in scenario.objects}
    goals = {o.object_id: o.goal for o in scenario.objects}
    order = [o.object_id for o in scenario.objects]
    transit_cache: dict = {}

    canon_cache: dict = {}

    def world_key(poses: dict) -> tuple:
        # worlds are keyed by footprint geometry, not poses: backtracking
        # siblings that park an object at a different symmetry variant of
        # the same goal produce identical obstacle sets and should share
        # cached results
        out = []
        for oid in order:
            k = (oid, poses[oid].key(6))
            v = canon_cache.get(k)
            if v is None:
                fp = footprint_at(shapes[oid], poses[oid])
                v = canon_cache[k] = tuple(
                    sorted(map(tuple, np.round(fp.vertices, 6).tolist())))
            out.append(v)
        return tuple(out)

    unreachable: set = set()

    def cached_transit(start: Pose2D, goal: Pose2D, poses: dict):
        wkey = world_key(poses)
        # a goal that defeated the planner once defeats it from every start
        # the robot can actually occupy, since those starts interconnect
        goal_key = (goal.key(6), wkey)
        if goal_key in unreachable:
            return None
        key = (start.key(6), goal.key(6), wkey)
        if key not in transit_cache:
            budget.check_time()  # transits are the slowest uncharged step
            obstacles = [footprint_at(shapes[oid], poses[oid]) for oid in order]
            transit_cache[key] = plan_transit(start, goal, obstacles, ws, params)
            if transit_cache[key] is None:
                unreachable.add(goal_key)
        return transit_cache[key]

    def execute(state: WorldState, cand: RearrangementCandidate):
        """Turn one candidate into actions, or None if a transit fails."""
        actions = []
        robot = state.robot_pose
        poses = dict(state.object_poses)

        def add_transit(target: Pose2D) -> bool:
            nonlocal robot
            tp = cached_transit(robot, target, poses)
            if tp is None:
                return False
            if tp.length > 0.0:
                actions.append(PlanAction("transit", tp))
            robot = target
            return True

        def add_push(kind: str, oid: str, path: DubinsPath, attach: Pose2D):
            nonlocal robot
            end = path.endpoint()
            new_pose = compose(end, attach)
            actions.append(PlanAction(kind, path, oid, attach, poses[oid], new_pose))
            robot = end
            poses[oid] = new_pose

        for reloc in cand.required_relocations:
            if not add_transit(reloc.robot_path.start):
                return None
            add_push("obstacle_relocation", reloc.object_id, reloc.robot_path,
                     reloc.attach)
        edge = cand.edge
        if not add_transit(edge.src.pose.robot_pose):
            return None
        if edge.kind == "prerelocated":
            query, sol = edge.payload
            add_push("push_transfer", cand.object_id, sol.path1,
                     query.start_push.attach_transform)
            if not add_transit(sol.path2.start):
                return None
            add_push("push_transfer", cand.object_id, sol.path2,
                     query.goal_push.attach_transform)
        else:
            add_push("push_transfer", cand.object_id, edge.payload,
                     edge.src.pose.attach_transform)
        new_state = WorldState(robot, poses, state.done | {cand.object_id})
        return actions, new_state

    dead_states: set = set()
    pair_cache: dict = {}

    def solve(state: WorldState):
        """Actions finishing all remaining objects, or None to backtrack."""
        unfinished = [oid for oid in order if oid not in state.done]
        if not unfinished:
            return [], ()
        # a state whose whole candidate queue was exhausted once is dead in
        # every sibling branch with the same done set and obstacle geometry
        # (robot pose only affects transits, and workspace free space is
        # connected in practice)
        state_key = (state.done, world_key(state.object_poses))
        if state_key in dead_states:
            return None
        world = [WorldObject(oid, state.object_poses[oid], goals[oid], shapes[oid],
                             symmetries[oid]) for oid in unfinished]
        done_obs = tuple((oid, footprint_at(shapes[oid], state.object_poses[oid]))
                         for oid in order if oid in state.done)
        graph = build_graph(world, ws, params, prerelo_mode,
                            extra_obstacles=done_obs, pair_cache=pair_cache)
        # lazily resolved, cheapest pushing first; pairs past the first
        # executable candidate are never priced
        for cand in candidate_stream(graph, unfinished):
            budget.charge()
            result = execute(state, cand)
            if result is None:
                if not backtrack:
                    return None
                continue
            actions, new_state = result
            rest = solve(new_state)
            if rest is not None:
                return actions + rest[0], (cand.object_id,) + rest[1]
            if not backtrack:
                return None
        dead_states.add(state_key)
        return None

    start_poses = {o.object_id: o.start for o in scenario.objects}
    initial = WorldState(scenario.robot_pose, start_poses, frozenset())
    try:
        result = solve(initial)
    except _BudgetExceeded:
        return PlanOutcome("timeout", None, time.monotonic() - t0, budget.tried)
    elapsed = time.monotonic() - t0
    if result is None:
        return PlanOutcome("no_solution", None, elapsed, budget.tried)
    actions, trace = result
    pushing = sum(a.length for a in actions if a.kind != "transit")
    transit = sum(a.length for a in actions if a.kind == "transit")
    return PlanOutcome(
        "ok",
        RearrangementPlan(tuple(actions), pushing, transit, trace, method),
        elapsed,
        budget.tried,
    )


def _pose_close(a: Pose2D, b: Pose2D, tol: float = POSE_TOL) -> bool:
    return (math.hypot(a.x - b.x, a.y - b.y) <= tol
            and abs(wrap_angle(a.theta - b.theta)) <= tol)


def _attached_poses(robot: np.ndarray, attach: Pose2D) -> np.ndarray:
    """Object pose batch for a robot pose batch and a rigid attach transform."""
    c = np.cos(robot[:, 2])
    s = np.sin(robot[:, 2])
    out = np.empty_like(robot)
    out[:, 0] = robot[:, 0] + attach.x * c - attach.y * s
    out[:, 1] = robot[:, 1] + attach.x * s + attach.y * c
    out[:, 2] = robot[:, 2] + attach.theta
    return out


def plan_violations(plan: RearrangementPlan, scenario) -> list:
    """Replay a plan from scratch and list every invariant it breaks.

    Checks run at a sampling step independent of (and finer than) the
    planner's own: action continuity, minimum radii, collision freedom of
    every sweep, workspace containment, attach bookkeeping, cost totals,
    and final goal placement modulo each object's symmetry.
    """
    ws: Workspace = scenario.workspace
    params: RobotParams = scenario.params
    shapes = {o.object_id: o.shape for o in scenario.objects}
    problems = []
    robot = scenario.robot_pose
    poses = {o.object_id: o.start for o in scenario.objects}

    for i, act in enumerate(plan.actions):
        tag = f"action {i} ({act.kind})"
        if not _pose_close(robot, act.robot_start()):
            problems.append(f"{tag}: starts away from the robot's pose")
        if act.kind == "transit":
            if act.path.radius_used < params.rho_transit - 1e-9:
                problems.append(f"{tag}: radius below the unloaded minimum")
            samples = act.path.sample_array(VALIDATE_STEP)
            body = SweptPolygon(params.body_footprint, samples)
            if body.outside_workspace(ws).any():
                problems.append(f"{tag}: leaves the workspace")
            for oid in sorted(poses):
                if body.hits_any(footprint_at(shapes[oid], poses[oid])):
                    problems.append(f"{tag}: robot hits {oid}")
        else:
            oid = act.object_id
            if act.path.radius < params.rho_push - 1e-9:
                problems.append(f"{tag}: radius below the loaded minimum")
            if not _pose_close(poses[oid], act.object_from):
                problems.append(f"{tag}: object_from disagrees with the world")
            if not _pose_close(compose(act.path.start, act.attach), poses[oid]):
                problems.append(f"{tag}: attach does not place the object")
            end_obj = compose(act.path.endpoint(), act.attach)
            if not _pose_close(end_obj, act.object_to):
                problems.append(f"{tag}: object_to disagrees with the path")
            samples = act.path.sample_array(VALIDATE_STEP)
            body = SweptPolygon(params.body_footprint, samples)
            load = SweptPolygon(shapes[oid], _attached_poses(samples, act.attach))
            if body.outside_workspace(ws).any() or load.outside_workspace(ws).any():
                problems.append(f"{tag}: leaves the workspace")
            for other in sorted(poses):
                if other == oid:
                    continue
                fp = footprint_at(shapes[other], poses[other])
                if body.hits_any(fp) or load.hits_any(fp):
                    problems.append(f"{tag}: sweep hits {other}")
            poses[oid] = act.object_to
        robot = act.robot_end()

    pushing = sum(a.length for a in plan.actions if a.kind != "transit")
    transit = sum(a.length for a in plan.actions if a.kind == "transit")
    if abs(pushing - plan.pushing_length) > 1e-6:
        problems.append("pushing_length total disagrees with the actions")
    if abs(transit - plan.transit_length) > 1e-6:
        problems.append("transit_length total disagrees with the actions")

    transferred = {a.object_id for a in plan.actions if a.kind == "push_transfer"}
    for o in scenario.objects:
        if o.object_id not in transferred:
            problems.append(f"{o.object_id} is never transferred")
        if not same_pose_mod_symmetry(poses[o.object_id], o.goal, o.symmetry,
                                      POSE_TOL, POSE_TOL):
            problems.append(f"{o.object_id} does not end at its goal")
    if set(plan.depth_trace) != {o.object_id for o in scenario.objects}:
        problems.append("depth_trace does not cover the objects exactly once")
    final = _footprints(scenario, poses)
    ids = sorted(final)
    for a_idx, oid_a in enumerate(ids):
        for oid_b in ids[a_idx + 1:]:
            if polygons_intersect(final[oid_a], final[oid_b]):
                problems.append(f"final footprints of {oid_a} and {oid_b} overlap")
    return problems


def validate_plan(plan: RearrangementPlan, scenario) -> bool:
    """True when an independent replay finds no violated invariant."""
    return not plan_violations(plan, scenario)
