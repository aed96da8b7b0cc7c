"""Non-pushing robot motions between arbitrary poses at the transit radius.

Forward search over a motion-primitive lattice (grid-discretized positions,
16 heading bins; straight / max-left / max-right, each forward and reverse,
one grid cell long), with analytic Dubins-shot attempts toward the goal from
promising nodes. Cost is path length; the heuristic is the obstacle-free
Dubins length at the transit radius, which is admissible for forward-only
driving. Reverse primitives are allowed by default (the pusher is a car, not
pushing during transit) and can be disabled for sensitivity runs.

The result stores exact (letter, signed length) segments so later validation
can replay the geometry at any sampling resolution without re-searching.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dubins import all_words, shortest_lengths
from .geom import Polygon2D, Pose2D, SweptPolygon, Workspace, wrap_angle
from .push_model import RobotParams
from .reeds_shepp import rs_lengths

HEADING_BINS = 16
GOAL_POS_TOL = 0.05
GOAL_ANG_TOL = 0.1
COLLISION_STEP = 0.05
_SHOT_NEAR = 3.0   # always try the analytic shot below this heuristic value
_SHOT_EVERY = 4    # otherwise try it on every n-th expansion
# reverse-out distances for the two-phase shot; tight anti-parallel
# re-grasps need to back far enough that a CSC word fits the workspace
_BACKOUT = (0.5, 1.0, 1.5, 2.0)
_MAX_POPS = 4000
_POLISH_MIN = 32     # extra budget after an incumbent is found
_POLISH_MAX = 200
_SHOT_BACKOFF = 24   # consecutive failures before the shot interval doubles
_SHOT_MAX_EVERY = 64


@dataclass(frozen=True)
class TransitPath:
    """Sequence of constant-curvature segments at radius_used."""

    segments: tuple          # (letter 'L'|'S'|'R', signed length in meters)
    waypoints: tuple         # segment-boundary poses, start first
    length: float            # sum of absolute segment lengths
    radius_used: float

    @property
    def start(self) -> Pose2D:
        return self.waypoints[0]

    @property
    def end(self) -> Pose2D:
        return self.waypoints[-1]

    def uses_reverse(self) -> bool:
        return any(seg_len < 0.0 for _, seg_len in self.segments)

    def sample_array(self, step: float) -> np.ndarray:
        """Poses (N, 3) along the path at arc-length spacing <= step."""
        if step <= 0.0:
            raise ValueError("step must be positive")
        chunks = [np.array([[self.waypoints[0].x, self.waypoints[0].y,
                             self.waypoints[0].theta]])]
        pose = self.waypoints[0]
        for letter, seg_len in self.segments:
            size = abs(seg_len)
            if size < 1e-12:
                continue
            n = max(1, math.ceil(size / step - 1e-12))
            fracs = np.linspace(0.0, 1.0, n + 1)[1:]
            chunks.append(_segment_points(pose, letter, seg_len, self.radius_used, fracs))
            pose = seg_advance(pose, letter, seg_len, self.radius_used)
        return np.concatenate(chunks, axis=0)

    def to_dict(self) -> dict:
        return {
            "segments": [[letter, seg_len] for letter, seg_len in self.segments],
            "start": [self.start.x, self.start.y, self.start.theta],
            "radius": self.radius_used,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransitPath":
        return build_transit_path(Pose2D(*d["start"]),
                                  [(s[0], s[1]) for s in d["segments"]],
                                  d["radius"])


def seg_advance(pose: Pose2D, letter: str, seg_len: float, radius: float) -> Pose2D:
    """Endpoint after one signed constant-curvature segment."""
    if seg_len == 0.0:
        return pose
    x, y, th = pose.x, pose.y, pose.theta
    if letter == "S":
        return Pose2D(x + seg_len * math.cos(th), y + seg_len * math.sin(th), th)
    phi = seg_len / radius
    if letter == "L":
        th2 = th + phi
        return Pose2D(x + radius * (math.sin(th2) - math.sin(th)),
                      y - radius * (math.cos(th2) - math.cos(th)), th2)
    if letter == "R":
        th2 = th - phi
        return Pose2D(x - radius * (math.sin(th2) - math.sin(th)),
                      y + radius * (math.cos(th2) - math.cos(th)), th2)
    raise ValueError(f"unknown segment letter {letter!r}")


def _segment_points(pose: Pose2D, letter: str, seg_len: float, radius: float,
                    fracs: np.ndarray) -> np.ndarray:
    s = fracs * seg_len
    out = np.empty((s.size, 3))
    th = pose.theta
    if letter == "S":
        out[:, 0] = pose.x + s * math.cos(th)
        out[:, 1] = pose.y + s * math.sin(th)
        out[:, 2] = th
        return out
    sign = 1.0 if letter == "L" else -1.0
    th2 = th + sign * s / radius
    out[:, 0] = pose.x + sign * radius * (np.sin(th2) - math.sin(th))
    out[:, 1] = pose.y - sign * radius * (np.cos(th2) - math.cos(th))
    out[:, 2] = th2
    return out


def build_transit_path(start: Pose2D, segments, radius: float) -> TransitPath:
    waypoints = [start]
    total = 0.0
    pose = start
    kept = []
    for letter, seg_len in segments:
        if abs(seg_len) < 1e-12:
            continue
        pose = seg_advance(pose, letter, seg_len, radius)
        waypoints.append(pose)
        kept.append((letter, float(seg_len)))
        total += abs(seg_len)
    return TransitPath(tuple(kept), tuple(waypoints), total, radius)


class _Lattice:
    """Search bookkeeping: discretization and collision batching."""

    def __init__(self, ws: Workspace, obstacles, body: Polygon2D):
        self.ws = ws
        self.res = ws.grid_resolution
        self.obstacles = obstacles
        self.body = body

    def cell(self, pose: Pose2D):
        ib = int(round(pose.theta / (2.0 * math.pi / HEADING_BINS))) % HEADING_BINS
        return (int(math.floor((pose.x - self.ws.xmin) / self.res)),
                int(math.floor((pose.y - self.ws.ymin) / self.res)), ib)

    def poses_free(self, poses: np.ndarray) -> np.ndarray:
        """Mask of collision-free, in-workspace poses."""
        sweep = SweptPolygon(self.body, poses)
        ok = ~sweep.outside_workspace(self.ws)
        for poly in self.obstacles:
            if not ok.any():
                break
            ok &= ~sweep.hits(poly)
        return ok


def plan_transit(start: Pose2D, goal: Pose2D, obstacles: list[Polygon2D],
                 ws: Workspace, params: RobotParams,
                 allow_reverse: bool = True,
                 max_pops: int = _MAX_POPS) -> Optional[TransitPath]:
    """Collision-free transit path honoring the transit turn radius, or None.

    With reverse driving every primitive is its own time-reverse, so
    reachability is symmetric and the search can run from either endpoint.
    It runs from the goal: unreachable goals usually sit in small enclosed
    pockets (behind a pushing face crowded by neighbors), and rooting the
    search there exhausts the pocket in a few expansions instead of
    flooding the whole workspace before giving up. Analytic completions
    then connect the frontier back to the start, as original-time words
    driving out of it.
    """
    if not allow_reverse:
        return _search_transit(start, goal, obstacles, ws, params, False, max_pops,
                               shot_from_goal=False)
    return _search_transit(goal, start, obstacles, ws, params, True, max_pops,
                           shot_from_goal=True)


def _search_transit(start: Pose2D, goal: Pose2D, obstacles: list[Polygon2D],
                    ws: Workspace, params: RobotParams,
                    allow_reverse: bool, max_pops: int,
                    shot_from_goal: bool) -> Optional[TransitPath]:
    """Lattice search rooted at `start` toward `goal`.

    With shot_from_goal the roles are reversed in original time: the
    produced path DRIVES from `goal` to `start`, lattice motion is emitted
    time-reversed, and analytic completions leave `goal` instead of
    entering it (a corner pose is easy to drive out of but often admits no
    in-workspace Dubins word into it).
    """
    rho = params.rho_transit
    lattice = _Lattice(ws, obstacles, params.body_footprint)
    anchor = goal if shot_from_goal else start

    if (math.hypot(goal.x - start.x, goal.y - start.y) <= 1e-9
            and abs(wrap_angle(goal.theta - start.theta)) <= 1e-9):
        return build_transit_path(anchor, [], rho)

    ends = np.array([[goal.x, goal.y, goal.theta], [start.x, start.y, start.theta]])
    if not lattice.poses_free(ends).all():
        return None

    step = ws.grid_resolution
    arc = step  # primitive arc length equals one grid cell
    prims = [("S", step), ("L", arc), ("R", arc)]
    if allow_reverse:
        prims += [("S", -step), ("L", -arc), ("R", -arc)]

    def forward_words(pose: Pose2D, target: Pose2D, budget: float = math.inf):
        # every admissible word, shortest first; a longer word sometimes
        # stays inside the workspace when the shortest one exits it.
        # Words no shorter than budget cannot beat the incumbent: skip.
        paths = all_words(pose, target, rho)
        paths.sort(key=lambda p: p.length)
        for path in paths:
            if path.length >= budget:
                break
            end = path.endpoint()
            if (math.hypot(end.x - target.x, end.y - target.y) > 1e-6
                    or abs(wrap_angle(end.theta - target.theta)) > 1e-6):
                continue
            # cheap coarse rejection before the fine check
            if not lattice.poses_free(path.sample_array(0.3)).all():
                continue
            samples = path.sample_array(COLLISION_STEP)
            if lattice.poses_free(samples).all():
                return [(letter, seg)
                        for letter, seg in zip(path.word, path.seg_lengths)]
        return None

    ladder = [([], goal, 0.0)]
    if shot_from_goal:
        # fixed departure ladder out of the true start: the pose itself,
        # then progressively longer straight reverse legs. A post-push
        # start touches the object it just moved, so every forward word
        # from the pose itself collides and the reverse leg is what makes
        # completions possible at all.
        for back in _BACKOUT:
            n = max(1, math.ceil(back / COLLISION_STEP))
            fracs = np.linspace(0.0, 1.0, n + 1)[1:]
            pts = _segment_points(goal, "S", -back, rho, fracs)
            if not lattice.poses_free(pts).all():
                break  # further back-outs only extend the colliding sweep
            ladder.append(([("S", -back)], Pose2D(*pts[-1]), back))

    def shot(pose: Pose2D, with_backout: bool, budget: float):
        if shot_from_goal:
            # original-time drive OUT of `goal`, from the nearest viable
            # rung; a corner pose is easy to leave but often admits no
            # in-workspace word into it
            for prefix, rung, cost in ladder:
                if cost >= budget:
                    break
                segs = forward_words(rung, pose, budget - cost)
                if segs is not None:
                    return prefix + segs
            return None
        segs = forward_words(pose, goal, budget)
        if segs is not None:
            return segs
        if not (allow_reverse and with_backout):
            return None
        # two-phase completion: back straight out, then a forward word.
        # Anti-parallel alignments often admit no forward word from the
        # endpoint itself (every Dubins circle leaves the workspace),
        # while a short reverse leg opens up an S-curve.
        for back in _BACKOUT:
            if back >= budget:
                break
            n = max(1, math.ceil(back / COLLISION_STEP))
            fracs = np.linspace(0.0, 1.0, n + 1)[1:]
            pts = _segment_points(pose, "S", -back, rho, fracs)
            if not lattice.poses_free(pts).all():
                break
            out_pose = Pose2D(*pts[-1])
            segs = forward_words(out_pose, goal, budget - back)
            if segs is not None:
                return [("S", -back)] + segs
        return None

    if shot_from_goal:
        # remaining cost is an original-time drive goal -> pose; by the
        # heading-flip identity len(a -> b) = len(b~ -> a~), where ~ adds
        # pi to the heading, that is the many-to-one query the batch
        # kernel answers
        _fx, _fy, _fth = goal.x, goal.y, goal.theta + math.pi

        def dubins_to_go(poses: np.ndarray) -> np.ndarray:
            flipped = poses.copy()
            flipped[:, 2] += math.pi
            return shortest_lengths(flipped, _fx, _fy, _fth, rho)
    else:
        def dubins_to_go(poses: np.ndarray) -> np.ndarray:
            return shortest_lengths(poses, goal.x, goal.y, goal.theta, rho)

    def heuristic_parts(poses: np.ndarray):
        """(heuristic, forward-only heuristic) for a pose batch."""
        fwd = dubins_to_go(poses)
        if not allow_reverse:
            return fwd, fwd
        # the two-gear bound is symmetric, so query direction is moot
        vals = np.minimum(fwd, rs_lengths(poses, goal.x, goal.y, goal.theta, rho))
        return vals, fwd

    # nodes: pose, g, parent index, primitive that led here, forward heuristic
    h0_arr, hf0_arr = heuristic_parts(np.array([[start.x, start.y, start.theta]]))
    nodes = [(start, 0.0, -1, None, float(hf0_arr[0]))]
    heap = [(float(h0_arr[0]), 0, 0)]
    closed: dict = {}
    counter = 1
    pops = 0
    # incumbent completion; the search keeps polishing it for a bounded
    # number of pops since transit length is not part of the plan objective
    best_cost = math.inf
    best: Optional[tuple] = None
    best_pop = 0
    shot_interval = _SHOT_EVERY
    fail_streak = 0
    while heap and pops < max_pops:
        f, _, ni = heapq.heappop(heap)
        if f >= best_cost - 1e-9:
            break  # nothing left that could beat the incumbent
        pose, g, _, _, hf = nodes[ni]
        cell = lattice.cell(pose)
        if cell in closed and closed[cell] <= g + 1e-9:
            continue
        closed[cell] = g
        pops += 1
        if best is not None:
            # polish budget scales with how hard the incumbent was to find
            polish = min(max(best_pop, _POLISH_MIN), _POLISH_MAX)
            if pops - best_pop > polish:
                break

        h = f - g
        near_goal = (math.hypot(goal.x - pose.x, goal.y - pose.y) <= GOAL_POS_TOL
                     and abs(wrap_angle(goal.theta - pose.theta)) <= GOAL_ANG_TOL)
        if near_goal or pops == 1 or pops % shot_interval == 0:
            with_backout = near_goal or h <= _SHOT_NEAR
            if shot_from_goal:
                # h bounds every completion from below, ladder included
                segs = (None if g + h >= best_cost - 1e-9
                        else shot(pose, True, best_cost - g - 1e-9))
            elif not with_backout and g + hf >= best_cost - 1e-9:
                # a forward-only completion cannot beat the incumbent when
                # even the obstacle-free forward length is too long
                segs = None
            else:
                segs = shot(pose, with_backout, best_cost - g - 1e-9)
            if segs is None:
                # repeated failures usually mean the goal is geometrically
                # unreachable from this region; throttle the attempts
                fail_streak += 1
                if (fail_streak % _SHOT_BACKOFF == 0
                        and shot_interval < _SHOT_MAX_EVERY):
                    shot_interval *= 2
            else:
                fail_streak = 0
                shot_interval = _SHOT_EVERY
                cost = g + sum(abs(s) for _, s in segs)
                if cost < best_cost - 1e-9:
                    best_cost = cost
                    best = (ni, segs)
                    best_pop = pops

        # batch-check all primitive sample poses at once
        cand_poses = []
        cand_samples = []
        for letter, seg_len in prims:
            nxt = seg_advance(pose, letter, seg_len, rho)
            fracs = np.array([0.5, 1.0])
            cand_samples.append(_segment_points(pose, letter, seg_len, rho, fracs))
            cand_poses.append((letter, seg_len, nxt))
        stacked = np.concatenate(cand_samples, axis=0)
        free = lattice.poses_free(stacked)
        live = []
        for idx, (letter, seg_len, nxt) in enumerate(cand_poses):
            if not free[2 * idx:2 * idx + 2].all():
                continue
            ncell = lattice.cell(nxt)
            ng = g + abs(seg_len)
            if ncell in closed and closed[ncell] <= ng + 1e-9:
                continue
            live.append((letter, seg_len, nxt, ng))
        if live:
            batch = np.array([[p.x, p.y, p.theta] for _, _, p, _ in live])
            hs, hfs = heuristic_parts(batch)
            for (letter, seg_len, nxt, ng), nh, nhf in zip(live, hs, hfs):
                if ng + nh >= best_cost - 1e-9:
                    continue
                nodes.append((nxt, ng, ni, (letter, seg_len), float(nhf)))
                heapq.heappush(heap, (ng + nh, counter, len(nodes) - 1))
                counter += 1
    if best is not None:
        ni, segs = best
        return _reconstruct(nodes, ni, segs, anchor, rho, shot_from_goal)
    return None


def _reconstruct(nodes, ni, shot_segs, anchor: Pose2D, rho: float,
                 backward: bool) -> TransitPath:
    rev = []
    while ni >= 0:
        _, _, parent, prim, _ = nodes[ni]
        if prim is not None:
            rev.append(prim)
        ni = parent
    lattice_segs = list(reversed(rev))
    shot_part = [(letter, seg) for letter, seg in shot_segs if abs(seg) > 1e-12]
    if backward:
        # goal-rooted search: the completion leaves the true start, then
        # the lattice motion is replayed time-reversed back to the root
        segments = shot_part + [(letter, -seg)
                                for letter, seg in reversed(lattice_segs)]
    else:
        segments = lattice_segs + shot_part
    return build_transit_path(anchor, segments, rho)
