"""Push-traversability graph: which objects can reach their goals, and how.

Vertices are pushing poses at start and goal object configurations. A
directed edge from a start vertex encodes one feasible way to transfer the
object to a goal pushing pose:

* direct: a collision-free Dubins push at the pushing radius
* prerelocated: two pushes through an optimized intermediate pose
* blocked_chain: a push that is collision-free against the workspace but
  runs through other movable objects; the edge records those blockers, and
  search expands them into straight-line relocation pushes

Goal vertices are deduplicated across the object's rotational symmetry
group, so a symmetric object exposes every admissible contact face for each
distinct robot arrival pose.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

from .dubins import DubinsPath, all_words, shortest_dubins
from .geom import (
    CONTACT_EPS,
    Polygon2D,
    Pose2D,
    SweptPolygon,
    Workspace,
    compose,
    footprint_at,
    inside_workspace,
    inverse,
    polygons_intersect,
    wrap_angle,
)
from .prerelo_opt import (
    COLLISION_STEP,
    PrereloQuery,
    PrereloSolution,
    fillet_geometry,
    optimize_prerelocation,
    sample_axis_prerelocation,
)
from .push_model import (
    PushingPose,
    RobotParams,
    pushing_poses,
    robot_pose_for_face,
    symmetry_variants,
)

# final blocker placement must clear the transfer sweep by this margin,
# covering the sagitta error of 0.05 m arc sampling at the pushing radius
RELOCATION_CLEARANCE = 0.01

PRERELO_MODES = ("fillet", "midpoint", "axis")


@dataclass(frozen=True)
class WorldObject:
    object_id: str
    start: Pose2D
    goal: Pose2D
    shape: Polygon2D
    symmetry: int = 1


@dataclass(frozen=True)
class PTVertex:
    object_id: str
    config: str  # start | goal
    face_index: int
    pose: PushingPose
    # contact faces whose push arrives at this robot pose (symmetry collapses
    # several faces onto one pose); meaningful for goal vertices
    faces_ok: tuple = ()

    def sort_key(self):
        return (self.object_id, self.config, self.face_index, self.pose.robot_pose.key(6))


@dataclass(frozen=True)
class PTEdge:
    src: PTVertex
    dst: PTVertex
    weight: float
    kind: str  # direct | prerelocated | blocked_chain
    payload: object  # DubinsPath for direct/blocked_chain, PrereloSolution otherwise
    blockers: tuple = ()

    def __post_init__(self):
        if (self.kind == "blocked_chain") != bool(self.blockers):
            raise ValueError("blockers must be present exactly for blocked_chain edges")


@dataclass(frozen=True)
class ObstacleRelocation:
    """Straight clearing push of a blocker, ready to execute."""

    object_id: str
    face_index: int
    distance: float
    start_pose: Pose2D
    new_pose: Pose2D
    robot_path: DubinsPath
    attach: Pose2D


@dataclass(frozen=True)
class RearrangementCandidate:
    object_id: str
    vertex_path: tuple
    push_length: float  # transfer legs plus required relocation pushes
    required_relocations: tuple
    edge: PTEdge


_UNSET = object()

_PENDING, _RESOLVED, _DEAD = 0, 1, 2

_KIND_RANK = {"direct": 0, "prerelocated": 1, "blocked_chain": 2}


class _PairState:
    """Mutable resolution state of one (start vertex, goal vertex) pair."""

    __slots__ = ("object_id", "sv", "gv", "lb", "stage", "edge", "relocs", "key")

    def __init__(self, object_id: str, sv: PTVertex, gv: PTVertex, lb: float):
        self.object_id = object_id
        self.sv = sv
        self.gv = gv
        self.lb = lb          # no edge for this pair can push less than this
        self.stage = _PENDING
        self.edge: Optional[PTEdge] = None
        self.relocs = _UNSET  # blocked_chain expansion, memoized
        self.key = None       # shared-cache key, set on first resolution


class PTGraph:
    """Snapshot of vertices plus lazily resolved edges for one world.

    Edge computation is driven by candidate_stream, which resolves a pair
    only when its cost lower bound reaches the front of the queue; the
    `edges` property forces full resolution for callers that want the
    classical adjacency view.
    """

    def __init__(self, objects: list[WorldObject], ws: Workspace, params: RobotParams,
                 prerelo_mode: str, vertices: dict, obstacles_map: dict,
                 extra_obstacles: tuple = (), pair_cache: Optional[dict] = None):
        self.objects = {o.object_id: o for o in objects}
        self.ws = ws
        self.params = params
        self.prerelo_mode = prerelo_mode
        self.vertices = vertices  # id -> (src_vertices, goal_vertices)
        self.extra_obstacles = tuple(extra_obstacles)  # (id, Polygon2D), immovable
        self._obstacles = obstacles_map  # id -> [(other_id, Polygon2D)]
        # resolved pairs keyed by pose and obstacle geometry; a caller that
        # rebuilds graphs for many worlds (e.g. a backtracking sequencer)
        # shares one dict so repeated worlds resolve for free
        self._pair_cache = {} if pair_cache is None else pair_cache
        self._pairs: dict = {}
        for oid, (src, goal) in vertices.items():
            # any transfer moves the robot between the two pushing poses; a
            # two-push transfer can shortcut by at most the attach offsets at
            # the intermediate object pose, so euclidean distance minus that
            # slack bounds every edge kind from below
            amag = {v.face_index: math.hypot(v.pose.attach_transform.x,
                                             v.pose.attach_transform.y)
                    for v in src}
            for sv in src:
                for gv in goal:
                    a, g = sv.pose.robot_pose, gv.pose.robot_pose
                    slack = amag[sv.face_index] + max(amag[b] for b in gv.faces_ok)
                    lb = max(0.0, math.hypot(g.x - a.x, g.y - a.y) - slack)
                    self._pairs[(oid, sv.face_index, gv.sort_key())] = \
                        _PairState(oid, sv, gv, lb)

    def pair_states(self, object_id: str) -> list:
        src, goal = self.vertices[object_id]
        return [self._pairs[(object_id, sv.face_index, gv.sort_key())]
                for sv in src for gv in goal]

    def resolved_edges(self, object_id: str) -> list:
        out = []
        for ps in self.pair_states(object_id):
            if ps.stage == _PENDING:
                _resolve_pair(self, ps)
            if ps.edge is not None:
                out.append(ps.edge)
        return out

    @property
    def edges(self) -> dict:
        """Fully resolved adjacency: id -> list of edges (forces resolution)."""
        return {oid: self.resolved_edges(oid) for oid in self.objects}

    def dump(self) -> str:
        """Deterministic adjacency listing for golden-file comparisons."""
        lines = []
        for oid in sorted(self.objects):
            src, goal = self.vertices[oid]
            lines.append(f"object {oid}")
            for v in src:
                p = v.pose.robot_pose
                lines.append(f"  s[{v.face_index}] ({p.x:.4f}, {p.y:.4f}, {p.theta:.4f})")
            for i, v in enumerate(goal):
                p = v.pose.robot_pose
                faces = ",".join(str(f) for f in v.faces_ok)
                lines.append(f"  g[{i}] ({p.x:.4f}, {p.y:.4f}, {p.theta:.4f}) faces={faces}")
            for e in sorted(self.resolved_edges(oid),
                            key=lambda e: (e.src.face_index, e.dst.sort_key(), e.kind)):
                gi = goal.index(e.dst)
                extra = f" blockers={','.join(e.blockers)}" if e.blockers else ""
                lines.append(
                    f"  edge s[{e.src.face_index}] -> g[{gi}] {e.kind} "
                    f"w={e.weight:.6f}{extra}")
        return "\n".join(lines) + "\n"


def object_vertices(entry: WorldObject, params: RobotParams):
    """Start vertices (one per face) and symmetry-deduped goal vertices."""
    src = []
    for pp in pushing_poses(entry.start, entry.shape, params):
        pp = PushingPose(entry.object_id, pp.face_index, pp.robot_pose, pp.attach_transform)
        src.append(PTVertex(entry.object_id, "start", pp.face_index, pp))
    seen: dict = {}
    order = []
    for variant in symmetry_variants(entry.goal, entry.symmetry):
        for pp in pushing_poses(variant, entry.shape, params):
            key = pp.robot_pose.key(6)
            if key not in seen:
                seen[key] = [pp, []]
                order.append(key)
            seen[key][1].append(pp.face_index)
    goal = []
    for key in order:
        pp, faces = seen[key]
        faces = tuple(sorted(set(faces)))
        pp = PushingPose(entry.object_id, faces[0], pp.robot_pose, pp.attach_transform)
        goal.append(PTVertex(entry.object_id, "goal", faces[0], pp, faces_ok=faces))
    return src, goal


def push_sweeps(path: DubinsPath, shape: Polygon2D, attach: Pose2D,
                params: RobotParams, step: float = COLLISION_STEP):
    """Swept body and attached-object footprints along a pushing path."""
    poses = path.sample_array(step)
    return [SweptPolygon(params.body_footprint, poses),
            SweptPolygon(footprint_at(shape, attach), poses)]


def _sweep_obstacle_check(sweeps, obstacles):
    """(hit_ids_in_first_hit_order, clear) for a list of swept footprints."""
    first_hit: dict = {}
    for sweep in sweeps:
        for oid, poly in obstacles:
            idx = sweep.first_hit(poly)
            if idx >= 0 and (oid not in first_hit or idx < first_hit[oid]):
                first_hit[oid] = idx
    ordered = sorted(first_hit, key=lambda oid: (first_hit[oid], oid))
    return tuple(ordered), not ordered


def edge_between(entry: WorldObject, src_v: PTVertex, dst_v: PTVertex,
                 obstacles: list[tuple[str, Polygon2D]], ws: Workspace,
                 params: RobotParams, prerelo_mode: str = "fillet") -> Optional[PTEdge]:
    """Best single edge between a start vertex and a goal vertex.

    obstacles are (object_id, world polygon) for every other object.
    Tries the shortest collision-free direct word first, then a
    prerelocation (strategy per prerelo_mode), then a blocked chain.
    """
    if prerelo_mode not in PRERELO_MODES:
        raise ValueError(f"prerelo_mode must be one of {PRERELO_MODES}")
    k = src_v.face_index
    rho = params.rho_push
    direct_ok = k in dst_v.faces_ok
    blocked: Optional[tuple] = None

    if direct_ok:
        start_pose = src_v.pose.robot_pose
        # arrival keeps contact face k; symmetry guarantees dst_v admits it
        goal_pose = dst_v.pose.robot_pose
        attach = src_v.pose.attach_transform
        words = sorted(all_words(start_pose, goal_pose, rho),
                       key=lambda p: p.length)
        for path in words:
            end = path.endpoint()
            if (math.hypot(end.x - goal_pose.x, end.y - goal_pose.y) > 1e-6
                    or abs(wrap_angle(end.theta - goal_pose.theta)) > 1e-6):
                continue
            sweeps = push_sweeps(path, entry.shape, attach, params)
            if any(s.outside_workspace(ws).any() for s in sweeps):
                continue
            hit_ids, clear = _sweep_obstacle_check(sweeps, obstacles)
            if clear:
                return PTEdge(src_v, dst_v, path.length, "direct", path)
            if blocked is None:
                blocked = (path, hit_ids)

    prerelo = _prerelocated_edge(entry, src_v, dst_v, obstacles, ws, params, prerelo_mode)
    if prerelo is not None:
        return prerelo

    if blocked is not None:
        path, hit_ids = blocked
        return PTEdge(src_v, dst_v, path.length, "blocked_chain", path, blockers=hit_ids)
    return None


def _prerelocated_edge(entry, src_v, dst_v, obstacles, ws, params,
                       prerelo_mode) -> Optional[PTEdge]:
    obstacle_polys = [poly for _, poly in obstacles]
    shape = entry.shape
    candidates = []
    for b in dst_v.faces_ok:
        goal_push = PushingPose(entry.object_id, b,
                                dst_v.pose.robot_pose,
                                inverse_attach(shape, b, params))
        query = PrereloQuery(entry.object_id, src_v.pose, goal_push,
                             (src_v.face_index, b), shape, obstacle_polys, ws, params)
        candidates.append((_cheap_score(query, prerelo_mode), b, query))
    candidates.sort(key=lambda c: (c[0], c[1]))
    for score, b, query in candidates:
        if prerelo_mode == "axis":
            sol = sample_axis_prerelocation(query)
        else:
            mode = "fillet" if prerelo_mode == "fillet" else "midpoint"
            sol = optimize_prerelocation(query, seed_mode=mode)
        if sol is not None:
            return PTEdge(src_v, dst_v, sol.cost, "prerelocated", (query, sol))
    return None


def _cheap_score(query: PrereloQuery, prerelo_mode: str) -> float:
    """Collision-free ranking cost for face-pair enumeration."""
    if prerelo_mode == "fillet":
        costs = []
        for variant in (1, 2):
            sol = fillet_geometry(query, variant)
            if sol is not None:
                costs.append(sol.cost)
        return min(costs) if costs else math.inf
    # midpoint and axis modes rank by the unconstrained two-leg length
    # through the midpoint intermediate pose
    a = query.start_push.robot_pose
    g = query.goal_push.robot_pose
    mth = math.atan2(math.sin(a.theta) + math.sin(g.theta),
                     math.cos(a.theta) + math.cos(g.theta))
    mid = compose(Pose2D((a.x + g.x) / 2.0, (a.y + g.y) / 2.0, mth),
                  query.start_push.attach_transform)
    arrive = compose(mid, inverse(query.start_push.attach_transform))
    depart = compose(mid, inverse(query.goal_push.attach_transform))
    rho = query.params.rho_push
    return (shortest_dubins(a, arrive, rho).length
            + shortest_dubins(depart, g, rho).length)


def inverse_attach(shape: Polygon2D, face: int, params: RobotParams) -> Pose2D:
    from .push_model import attach_transform
    return attach_transform(shape, face, params.bumper_offset)


def build_graph(world, ws: Workspace, params: RobotParams,
                prerelo_mode: str = "fillet",
                extra_obstacles: tuple = (),
                pair_cache: Optional[dict] = None) -> PTGraph:
    """Graph over a world of (id, start, goal, shape[, symmetry]) entries.

    Vertices and pair lower bounds are computed here; edges resolve on
    demand (candidate_stream, search_rearrangement, or the edges property).
    extra_obstacles lists (id, Polygon2D) footprints that block pushes but can
    never be relocated, e.g. objects already finished by a higher-level planner.
    pair_cache, when given, shares resolved pairs across graphs of the same
    objects in different worlds.
    """
    if prerelo_mode not in PRERELO_MODES:
        raise ValueError(f"prerelo_mode must be one of {PRERELO_MODES}")
    objects = []
    for entry in world:
        if isinstance(entry, WorldObject):
            objects.append(entry)
        else:
            objects.append(WorldObject(*entry))
    footprints = {o.object_id: footprint_at(o.shape, o.start) for o in objects}
    ids = [o.object_id for o in objects]
    if len(set(ids)) != len(ids) or any(oid in footprints for oid, _ in extra_obstacles):
        raise ValueError("duplicate object ids")
    for i, a in enumerate(objects):
        for b in objects[i + 1:]:
            if polygons_intersect(footprints[a.object_id], footprints[b.object_id]):
                raise ValueError(
                    f"start footprints of {a.object_id} and {b.object_id} overlap")

    vertices = {}
    obstacles_map = {}
    for entry in objects:
        vertices[entry.object_id] = object_vertices(entry, params)
        obstacles = [(oid, poly) for oid, poly in footprints.items()
                     if oid != entry.object_id]
        obstacles.extend(extra_obstacles)
        obstacles_map[entry.object_id] = obstacles
    return PTGraph(objects, ws, params, prerelo_mode, vertices, obstacles_map,
                   tuple(extra_obstacles), pair_cache)


def plan_obstacle_relocation(blocker_id: str, blocker_pose: Pose2D, shape: Polygon2D,
                             forbidden_region: list, others: list[Polygon2D],
                             ws: Workspace, params: RobotParams,
                             step: Optional[float] = None,
                             max_range: Optional[float] = None
                             ) -> Optional[ObstacleRelocation]:
    """Minimal straight clearing push for a blocker.

    forbidden_region is the pending transfer's swept footprint as a list of
    SweptPolygon; the blocker's final placement must clear it with margin.
    The clearing push itself (robot and blocker swept together) must be
    collision-free against `others` and the workspace. Distances are
    sampled at grid steps, nearest first, ties broken by lowest face index.
    """
    if step is None:
        step = ws.grid_resolution
    if max_range is None:
        max_range = math.hypot(ws.width, ws.height)
    world_shape = footprint_at(shape, blocker_pose)
    pushes = pushing_poses(blocker_pose, shape, params)
    c, s = math.cos(blocker_pose.theta), math.sin(blocker_pose.theta)
    directions = []
    for f in range(shape.normals.shape[0]):
        nx, ny = shape.normals[f]
        directions.append((-(c * nx - s * ny), -(s * nx + c * ny)))
    n_steps = int(max_range / step + 1e-9)
    for i in range(1, n_steps + 1):
        dist = i * step
        for f, (dx, dy) in enumerate(directions):
            new_pose = Pose2D(blocker_pose.x + dist * dx,
                              blocker_pose.y + dist * dy, blocker_pose.theta)
            new_fp = footprint_at(shape, new_pose)
            if not inside_workspace(new_fp, ws):
                continue
            if any(polygons_intersect(new_fp, o) for o in others):
                continue
            if any(sweep.min_gap(new_fp).min() < RELOCATION_CLEARANCE
                   for sweep in forbidden_region):
                continue
            push = pushes[f]
            robot_path = DubinsPath("LSL", (0.0, dist, 0.0), params.rho_push,
                                    push.robot_pose)
            sweeps = push_sweeps(robot_path, shape, push.attach_transform, params)
            if any(sw.outside_workspace(ws).any() for sw in sweeps):
                continue
            if any(sw.hits_any(o) for sw in sweeps for o in others):
                continue
            return ObstacleRelocation(blocker_id, f, dist, blocker_pose, new_pose,
                                      robot_path, push.attach_transform)
    return None


def _expand_blockers(graph: PTGraph, edge: PTEdge) -> Optional[tuple]:
    """Relocations for a blocked_chain edge, executed in first-hit order."""
    entry = graph.objects[edge.src.object_id]
    path: DubinsPath = edge.payload
    forbidden = push_sweeps(path, entry.shape, edge.src.pose.attach_transform,
                            graph.params)
    current = {oid: footprint_at(o.shape, o.start)
               for oid, o in graph.objects.items()}
    current.update(graph.extra_obstacles)
    relocations = []
    for blocker in edge.blockers:
        if blocker not in graph.objects:
            return None  # immovable extra obstacle in the way
        bobj = graph.objects[blocker]
        others = [poly for oid, poly in current.items() if oid != blocker]
        reloc = plan_obstacle_relocation(
            blocker, bobj.start, bobj.shape, forbidden, others, graph.ws, graph.params)
        if reloc is None:
            return None
        relocations.append(reloc)
        current[blocker] = footprint_at(bobj.shape, reloc.new_pose)
    return tuple(relocations)


def _poly_canon(poly: Polygon2D) -> tuple:
    return tuple(sorted((round(x, 6), round(y, 6))
                        for x, y in poly.vertices.tolist()))


def _pair_key(graph: PTGraph, ps: _PairState) -> tuple:
    # ids ride along with the geometry: blocked_chain edges name their
    # blockers, so identical layouts built from different objects must
    # not share an entry
    obs = tuple(sorted((oid, _poly_canon(poly))
                       for oid, poly in graph._obstacles[ps.object_id]))
    return (ps.object_id, ps.sv.face_index, ps.sv.pose.robot_pose.key(6),
            ps.gv.sort_key(), graph.prerelo_mode, obs)


def _resolve_pair(graph: PTGraph, ps: _PairState) -> None:
    """Compute the pair's final edge (direct beats prerelocated beats blocked)."""
    ps.key = _pair_key(graph, ps)
    hit = graph._pair_cache.get(ps.key, _UNSET)
    if hit is not _UNSET:
        ps.edge, ps.relocs = hit
        ps.stage = _DEAD if ps.edge is None else _RESOLVED
        return
    entry = graph.objects[ps.object_id]
    edge = edge_between(entry, ps.sv, ps.gv, graph._obstacles[ps.object_id],
                        graph.ws, graph.params, graph.prerelo_mode)
    ps.edge = edge
    ps.stage = _DEAD if edge is None else _RESOLVED
    if edge is not None and edge.kind != "blocked_chain":
        ps.relocs = ()
    graph._pair_cache[ps.key] = (edge, ps.relocs)


def _pair_candidate(ps: _PairState) -> RearrangementCandidate:
    edge = ps.edge
    relocs = ps.relocs if edge.kind == "blocked_chain" else ()
    length = edge.weight + sum(r.distance for r in relocs)
    return RearrangementCandidate(ps.object_id, (edge.src, edge.dst), length,
                                  relocs, edge)


def _stub_entry(ps: _PairState, value: float, seq: int) -> tuple:
    return (value, 0, ps.object_id, ps.gv.face_index, 3,
            ps.sv.face_index, ps.gv.sort_key(), seq, ps, None)


def _cand_entry(cand: RearrangementCandidate, seq: int) -> tuple:
    e = cand.edge
    return (cand.push_length, 1, cand.object_id, e.dst.face_index,
            _KIND_RANK[e.kind], e.src.face_index, e.dst.sort_key(), seq, None, cand)


def candidate_stream(graph: PTGraph, object_ids=None):
    """Yield RearrangementCandidates for the given objects, cheapest first.

    A pair is resolved only when its cost lower bound surfaces at the front
    of the queue, so a consumer that stops early never pays for the
    expensive tail. At equal cost, unresolved pairs are forced before any
    candidate is emitted, which makes the order identical to resolving
    everything and sorting by (push_length, object_id, goal face, transfer
    kind, start face, goal vertex).
    """
    if object_ids is None:
        object_ids = sorted(graph.objects)
    heap = []
    seq = 0
    for oid in object_ids:
        if oid not in graph.objects:
            raise KeyError(oid)
        for ps in graph.pair_states(oid):
            if ps.stage == _DEAD:
                continue
            if ps.stage == _PENDING:
                heap.append(_stub_entry(ps, ps.lb, seq))
            elif ps.relocs is None:
                continue  # blocked chain with a blocker that cannot be cleared
            elif ps.relocs is _UNSET:
                heap.append(_stub_entry(ps, ps.edge.weight, seq))
            else:
                heap.append(_cand_entry(_pair_candidate(ps), seq))
            seq += 1
    heapq.heapify(heap)
    while heap:
        entry = heapq.heappop(heap)
        ps, cand = entry[8], entry[9]
        if cand is not None:
            yield cand
            continue
        if ps.stage == _PENDING:
            _resolve_pair(graph, ps)
            if ps.edge is None:
                continue
            if ps.edge.kind == "blocked_chain":
                # requeue at the now known transfer cost; relocation pushes
                # can only add to it
                heapq.heappush(heap, _stub_entry(ps, ps.edge.weight, seq))
            else:
                heapq.heappush(heap, _cand_entry(_pair_candidate(ps), seq))
            seq += 1
            continue
        if ps.relocs is _UNSET:
            ps.relocs = _expand_blockers(graph, ps.edge)
            graph._pair_cache[ps.key] = (ps.edge, ps.relocs)
        if ps.relocs is not None:
            heapq.heappush(heap, _cand_entry(_pair_candidate(ps), seq))
            seq += 1


def search_rearrangement(graph: PTGraph, object_id: str) -> list[RearrangementCandidate]:
    """All ways to bring one object home, cheapest total pushing first.

    One candidate per vertex pair that admits an edge; blocked_chain edges
    are expanded into concrete relocations and dropped when any blocker
    cannot be cleared. push_length charges the transfer legs plus every
    relocation push.
    """
    if object_id not in graph.objects:
        raise KeyError(object_id)
    candidates = list(candidate_stream(graph, [object_id]))
    candidates.sort(key=lambda c: (c.push_length, _KIND_RANK[c.edge.kind],
                                   c.edge.src.face_index, c.edge.dst.sort_key()))
    return candidates
