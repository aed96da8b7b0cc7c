"""Prerelocation of an object whose direct push transfer is infeasible.

Instead of pushing object j straight from its start to its goal, the robot
first pushes it to an intermediate pose o_pre (leg P1, contact face a), drives
around, and pushes it from o_pre to the goal (leg P2, contact face b). The
intermediate pose is chosen to minimize L(P1) + L(P2) subject to both legs
being bounded-curvature pushes that stay inside the workspace and clear of
all obstacles.

The minimization is warm-started from two constructed seeds. Each seed makes
one leg a pure straight push and absorbs the whole heading change into a
single fillet arc of radius rho_push on the other leg, joining the
start-heading ray and the goal line; the seed cost therefore decomposes
exactly into rho_push * |turn angle| plus the two straight lengths. A
derivative-free pattern search with feasibility rejection then descends from
every feasible seed. The Dubins length landscape is discontinuous across word
boundaries, so no gradients are used anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dubins import (
    DubinsPath,
    path_collision_free,
    sample_words_batch,
    shortest_dubins,
    shortest_words_batch,
)
from .geom import (
    Polygon2D,
    Pose2D,
    SweptPolygon,
    Workspace,
    compose,
    footprint_at,
    inverse,
    wrap_angle,
)
from .push_model import PushingPose, RobotParams

COLLISION_STEP = 0.05
_COARSE_STEP = 0.25

# pattern search schedule
_STEP0_LIN = 0.05
_STEP0_ANG = 0.05
_SHRINK = 0.5
_STEP_TOL = 1e-3
_MAX_CYCLES = 400

# axis sampling batch width: 8 grid distances across 4 faces
_BAND = 32


@dataclass(frozen=True)
class PrereloQuery:
    """One prerelocation problem for one object.

    face_pair (a, b) names the contact faces of the two legs; rigid
    attachment forces a to equal the start push face and b the goal push
    face. obstacles are world-frame polygons of everything else.
    """

    object_id: str
    start_push: PushingPose
    goal_push: PushingPose
    face_pair: tuple[int, int]
    shape: Polygon2D
    obstacles: list
    ws: Workspace
    params: RobotParams

    def __post_init__(self):
        a, b = self.face_pair
        if a != self.start_push.face_index or b != self.goal_push.face_index:
            raise ValueError("face_pair must match the contact faces of the two pushes")


@dataclass(frozen=True)
class PrereloSolution:
    pre_pose: Pose2D
    path1: DubinsPath
    path2: DubinsPath
    cost: float
    seed_used: str  # fillet_1 | fillet_2 | axis_sample | none


def _attach_a(query: PrereloQuery) -> Pose2D:
    return query.start_push.attach_transform


def _attach_b(query: PrereloQuery) -> Pose2D:
    return query.goal_push.attach_transform


def _legs_for(query: PrereloQuery, pre_pose: Pose2D) -> tuple[DubinsPath, DubinsPath]:
    """Shortest Dubins legs through pre_pose with the query's contact faces."""
    rho = query.params.rho_push
    arrive = compose(pre_pose, inverse(_attach_a(query)))
    depart = compose(pre_pose, inverse(_attach_b(query)))
    p1 = shortest_dubins(query.start_push.robot_pose, arrive, rho)
    p2 = shortest_dubins(depart, query.goal_push.robot_pose, rho)
    return p1, p2


def _leg_footprints(query: PrereloQuery) -> tuple[Polygon2D, Polygon2D]:
    # robot-frame object footprints for the two legs, memoized on the query
    fp = getattr(query, "_leg_fp", None)
    if fp is None:
        fp = (footprint_at(query.shape, _attach_a(query)),
              footprint_at(query.shape, _attach_b(query)))
        object.__setattr__(query, "_leg_fp", fp)
    return fp


def legs_feasible(query: PrereloQuery, p1: DubinsPath, p2: DubinsPath,
                  steps: tuple = (_COARSE_STEP, COLLISION_STEP)) -> bool:
    body = query.params.body_footprint
    obj1, obj2 = _leg_footprints(query)
    # a hit at any sampled pose is final, and most infeasible candidates
    # already collide at the coarse spacing, so reject cheaply first
    for step in steps:
        if not path_collision_free(p1, obj1, query.obstacles, query.ws,
                                   step, robot_footprint=body):
            return False
        if not path_collision_free(p2, obj2, query.obstacles, query.ws,
                                   step, robot_footprint=body):
            return False
    return True


def _coarse_feasible(query: PrereloQuery, p1: DubinsPath, p2: DubinsPath) -> bool:
    return legs_feasible(query, p1, p2, steps=(_COARSE_STEP,))


def _compose_batch(poses: np.ndarray, t: Pose2D) -> np.ndarray:
    """poses (N, 3) each composed with the fixed transform t."""
    c = np.cos(poses[:, 2])
    s = np.sin(poses[:, 2])
    out = np.empty_like(poses)
    out[:, 0] = poses[:, 0] + t.x * c - t.y * s
    out[:, 1] = poses[:, 1] + t.x * s + t.y * c
    out[:, 2] = poses[:, 2] + t.theta
    return out


def _legs_clear_batch(query: PrereloQuery, pre_poses: np.ndarray) -> np.ndarray:
    """Coarse-step feasibility of both legs for N candidate pre-poses.

    Vectorized counterpart of the legs_feasible coarse pass: same words,
    sampling rule and penetration tolerance, evaluated for the whole
    candidate grid in a handful of array passes.
    """
    n = pre_poses.shape[0]
    rho = query.params.rho_push
    a = query.start_push.robot_pose
    g = query.goal_push.robot_pose
    arrive = _compose_batch(pre_poses, inverse(_attach_a(query)))
    depart = _compose_batch(pre_poses, inverse(_attach_b(query)))
    fixed_a = np.broadcast_to((a.x, a.y, a.theta), (n, 3))
    fixed_g = np.broadcast_to((g.x, g.y, g.theta), (n, 3))
    body = query.params.body_footprint
    obj1, obj2 = _leg_footprints(query)
    ok = np.ones(n, dtype=bool)
    for starts, goals, obj in ((fixed_a, arrive, obj1), (depart, fixed_g, obj2)):
        codes, segs = shortest_words_batch(starts, goals, rho)
        poses, offs = sample_words_batch(starts, codes, segs, rho, _COARSE_STEP)
        bad = np.zeros(poses.shape[0], dtype=bool)
        for local in (obj, body):
            sweep = SweptPolygon(local, poses)
            bad |= sweep.outside_workspace(query.ws)
            for obs in query.obstacles:
                bad |= sweep.hits(obs)
        ok &= ~np.logical_or.reduceat(bad, offs[:-1])
    return ok


def _unit(theta: float) -> tuple[float, float]:
    return math.cos(theta), math.sin(theta)


def _nhat(theta: float) -> tuple[float, float]:
    # left normal of a heading; arc chord offsets are differences of these
    return -math.sin(theta), math.cos(theta)


def _solve_two_ray(us, ug, rhs) -> Optional[tuple[float, float]]:
    """tau*us + s*ug = rhs with tau, s >= 0; None when no such split exists."""
    det = us[0] * ug[1] - us[1] * ug[0]
    if abs(det) > 1e-12:
        tau = (rhs[0] * ug[1] - rhs[1] * ug[0]) / det
        s = (us[0] * rhs[1] - us[1] * rhs[0]) / det
    else:
        # parallel rays: rhs must lie along them
        cross = us[0] * rhs[1] - us[1] * rhs[0]
        if abs(cross) > 1e-9:
            return None
        along = us[0] * rhs[0] + us[1] * rhs[1]
        same_dir = us[0] * ug[0] + us[1] * ug[1] > 0.0
        if not same_dir or along < 0.0:
            return None
        tau = s = along / 2.0  # split the collinear run at its midpoint
    if tau < -1e-9 or s < -1e-9:
        return None
    return max(tau, 0.0), max(s, 0.0)


def _arc_word(turn: float) -> str:
    return "LSL" if turn >= 0.0 else "RSR"


def fillet_geometry(query: PrereloQuery, variant: int) -> Optional[PrereloSolution]:
    """Fillet construction alone, without the collision gate.

    Variant 1 makes P2 a pure straight push and P1 straight-then-arc; the
    fillet circle of radius rho_push is tangent to the start-heading ray and
    to the back-extension of the goal pushing line. Variant 2 mirrors it
    (P1 straight, P2 arc-then-straight). None when no forward tangent
    exists. Callers that need a usable seed must still check feasibility;
    seed_fillet does both.
    """
    if variant not in (1, 2):
        raise ValueError("variant must be 1 or 2")
    rho = query.params.rho_push
    a_pose = query.start_push.robot_pose
    g_pose = query.goal_push.robot_pose
    th_s = a_pose.theta
    th_g = g_pose.theta
    us = _unit(th_s)
    ug = _unit(th_g)
    attach_a = _attach_a(query)
    attach_b = _attach_b(query)

    if variant == 1:
        # arrival heading of leg 1 fixed by the face change between legs
        t_ab = compose(attach_a, inverse(attach_b))
        t_ba = inverse(t_ab)
        th_e = wrap_angle(th_g + t_ba.theta)
        turn = wrap_angle(th_e - th_s)
        if abs(abs(turn) - math.pi) < 1e-9:
            return None
        cg, sg = math.cos(th_g), math.sin(th_g)
        off_x = cg * t_ba.x - sg * t_ba.y
        off_y = sg * t_ba.x + cg * t_ba.y
        sigma = rho if turn >= 0.0 else -rho
        n_s = _nhat(th_s)
        n_e = _nhat(th_e)
        rhs = (
            g_pose.x + off_x - a_pose.x - sigma * (n_s[0] - n_e[0]),
            g_pose.y + off_y - a_pose.y - sigma * (n_s[1] - n_e[1]),
        )
        split = _solve_two_ray(us, ug, rhs)
        if split is None:
            return None
        tau, s = split
        p1 = DubinsPath(_arc_word(turn), (0.0, tau, rho * abs(turn)), rho, a_pose)
        arrive = p1.endpoint()
        pre_pose = compose(arrive, attach_a)
        depart = compose(pre_pose, inverse(attach_b))
        p2 = DubinsPath("LSL", (0.0, s, 0.0), rho, depart)
        seed_name = "fillet_1"
    else:
        # leg 1 straight: departure heading of leg 2 fixed the same way
        t_ab = compose(attach_a, inverse(attach_b))
        th_b = wrap_angle(th_s + t_ab.theta)
        turn = wrap_angle(th_g - th_b)
        if abs(abs(turn) - math.pi) < 1e-9:
            return None
        cs, ss = math.cos(th_s), math.sin(th_s)
        off_x = cs * t_ab.x - ss * t_ab.y
        off_y = ss * t_ab.x + cs * t_ab.y
        sigma = rho if turn >= 0.0 else -rho
        n_b = _nhat(th_b)
        n_g = _nhat(th_g)
        rhs = (
            g_pose.x - a_pose.x - off_x - sigma * (n_b[0] - n_g[0]),
            g_pose.y - a_pose.y - off_y - sigma * (n_b[1] - n_g[1]),
        )
        split = _solve_two_ray(us, ug, rhs)
        if split is None:
            return None
        tau, s = split
        p1 = DubinsPath("LSL", (0.0, tau, 0.0), rho, a_pose)
        arrive = p1.endpoint()
        pre_pose = compose(arrive, attach_a)
        depart = compose(pre_pose, inverse(attach_b))
        p2 = DubinsPath(_arc_word(turn), (rho * abs(turn), s, 0.0), rho, depart)
        seed_name = "fillet_2"

    # the constructed legs must actually meet the goal pushing pose
    end = p2.endpoint()
    if (math.hypot(end.x - g_pose.x, end.y - g_pose.y) > 1e-6
            or abs(wrap_angle(end.theta - th_g)) > 1e-6):
        return None
    return PrereloSolution(pre_pose, p1, p2, p1.length + p2.length, seed_name)


def seed_fillet(query: PrereloQuery, variant: int) -> Optional[PrereloSolution]:
    """Fillet warm start; None when geometrically or physically infeasible."""
    sol = fillet_geometry(query, variant)
    if sol is None or not legs_feasible(query, sol.path1, sol.path2):
        return None
    return sol


def _evaluate(query: PrereloQuery, pre_pose: Pose2D):
    p1, p2 = _legs_for(query, pre_pose)
    return p1.length + p2.length, p1, p2


def _pattern_search(query: PrereloQuery, start_pose: Pose2D, seed_name: str,
                    start_cost: float, p1, p2) -> PrereloSolution:
    """Feasible descent over (x, y, theta) of the intermediate pose."""
    x, y, th = start_pose.x, start_pose.y, start_pose.theta
    best_cost, best_p1, best_p2 = start_cost, p1, p2
    best_pose = start_pose
    lin, ang = _STEP0_LIN, _STEP0_ANG
    for _ in range(_MAX_CYCLES):
        moved = False
        for dx, dy, dth in ((lin, 0.0, 0.0), (-lin, 0.0, 0.0),
                            (0.0, lin, 0.0), (0.0, -lin, 0.0),
                            (0.0, 0.0, ang), (0.0, 0.0, -ang)):
            cand = Pose2D(x + dx, y + dy, th + dth)
            cost, c1, c2 = _evaluate(query, cand)
            if cost >= best_cost - 1e-12:
                continue
            if not legs_feasible(query, c1, c2):
                continue
            x, y, th = cand.x, cand.y, cand.theta
            best_cost, best_p1, best_p2 = cost, c1, c2
            best_pose = cand
            moved = True
            break
        if not moved:
            lin *= _SHRINK
            ang *= _SHRINK
            if lin < _STEP_TOL and ang < _STEP_TOL:
                break
    return PrereloSolution(best_pose, best_p1, best_p2, best_cost, seed_name)


def _midpoint_seed(query: PrereloQuery) -> Optional[tuple[Pose2D, float, DubinsPath, DubinsPath]]:
    """Uninformed seed: midpoint of the two robot poses, circular-mean heading."""
    a = query.start_push.robot_pose
    g = query.goal_push.robot_pose
    mx, my = (a.x + g.x) / 2.0, (a.y + g.y) / 2.0
    mth = math.atan2(math.sin(a.theta) + math.sin(g.theta),
                     math.cos(a.theta) + math.cos(g.theta))
    pre = compose(Pose2D(mx, my, mth), _attach_a(query))
    cost, p1, p2 = _evaluate(query, pre)
    if not legs_feasible(query, p1, p2):
        return None
    return pre, cost, p1, p2


def optimize_prerelocation(query: PrereloQuery,
                           seed_mode: str = "fillet") -> Optional[PrereloSolution]:
    """Lowest-cost feasible prerelocation found by seeded local descent.

    seed_mode 'fillet' descends from both fillet constructions (axis
    sampling as last resort); 'midpoint' descends from the uninformed
    midpoint seed only, which is the ablation without seed construction.
    Deterministic: fixed seed order and poll order, no randomness.
    """
    candidates: list[PrereloSolution] = []
    if seed_mode == "fillet":
        for variant in (1, 2):
            seed = seed_fillet(query, variant)
            if seed is not None:
                candidates.append(_pattern_search(
                    query, seed.pre_pose, seed.seed_used, seed.cost,
                    seed.path1, seed.path2))
    elif seed_mode == "midpoint":
        mid = _midpoint_seed(query)
        if mid is not None:
            pre, cost, p1, p2 = mid
            candidates.append(_pattern_search(query, pre, "none", cost, p1, p2))
    else:
        raise ValueError(f"unknown seed_mode {seed_mode!r}")

    if not candidates:
        fallback = sample_axis_prerelocation(query)
        if fallback is None:
            return None
        candidates.append(_pattern_search(
            query, fallback.pre_pose, "axis_sample", fallback.cost,
            fallback.path1, fallback.path2))
    return min(candidates, key=lambda sol: sol.cost)


def sample_axis_prerelocation(query: PrereloQuery, step: float = 0.1,
                              max_dist: float = 3.0) -> Optional[PrereloSolution]:
    """Closest feasible pre-pose sampled along the object's push axes.

    Candidates keep the start orientation and slide the object along each
    face's inward-normal (push) direction in step increments, nearest first,
    face index breaking ties. Greedy: the first feasible candidate wins.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    o_start = compose(query.start_push.robot_pose, _attach_a(query))
    c, s = math.cos(o_start.theta), math.sin(o_start.theta)
    axes = []
    for k in range(query.shape.normals.shape[0]):
        nx, ny = query.shape.normals[k]
        # push direction: inward normal, expressed in the world frame
        axes.append((-(c * nx - s * ny), -(s * nx + c * ny)))
    n_steps = int(max_dist / step + 1e-9)
    # static placement gates run batched over the whole candidate grid;
    # row order (distance major, face minor) preserves the greedy order
    dists = np.arange(1, n_steps + 1) * step
    ax = np.asarray(axes)
    poses = np.empty((n_steps * ax.shape[0], 3))
    poses[:, 0] = o_start.x + np.outer(dists, ax[:, 0]).ravel()
    poses[:, 1] = o_start.y + np.outer(dists, ax[:, 1]).ravel()
    poses[:, 2] = o_start.theta
    placed = SweptPolygon(query.shape, poses)
    ok = ~placed.outside_workspace(query.ws)
    for obs in query.obstacles:
        if not ok.any():
            return None
        ok &= placed.min_gap(obs) > 0.0
    cand = np.nonzero(ok)[0]
    # distance bands keep the batches small: the winner usually sits near
    # the front of the grid and whole-grid batches waste work on the tail
    for lo in range(0, cand.size, _BAND):
        sel = cand[lo:lo + _BAND]
        for i in sel[_legs_clear_batch(query, poses[sel])]:
            pre = Pose2D(poses[i, 0], poses[i, 1], poses[i, 2])
            cost, p1, p2 = _evaluate(query, pre)
            if legs_feasible(query, p1, p2):
                return PrereloSolution(pre, p1, p2, cost, "axis_sample")
    return None
