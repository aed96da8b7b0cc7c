"""SE(2) poses, convex polygon footprints, and exact collision tests.

Conventions used throughout the package:

* headings are normalized to (-pi, pi]
* polygons are convex with counterclockwise vertex order
* object-object overlap treats closed regions (shared boundary counts as a
  collision), while workspace containment is also closed (a footprint touching
  the wall from inside is still contained)
* robot-vs-object sweep tests tolerate exact tangency: the pusher travels in
  bumper contact with the object face, so those tests only report penetration
  deeper than CONTACT_EPS
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi

# Penetration tolerance for robot-contact sweeps (see module docstring).
CONTACT_EPS = 1e-9


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    t = math.fmod(theta, TWO_PI)
    if t <= -math.pi:
        t += TWO_PI
    elif t > math.pi:
        t -= TWO_PI
    return t


class Pose2D:
    """Planar rigid-body pose (x, y, theta), theta kept in (-pi, pi]."""

    __slots__ = ("x", "y", "theta")

    def __init__(self, x: float, y: float, theta: float = 0.0):
        self.x = float(x)
        self.y = float(y)
        self.theta = wrap_angle(float(theta))

    def __repr__(self) -> str:
        return f"Pose2D({self.x:.6f}, {self.y:.6f}, {self.theta:.6f})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pose2D):
            return NotImplemented
        return self.x == other.x and self.y == other.y and self.theta == other.theta

    def __hash__(self) -> int:
        return hash((self.x, self.y, self.theta))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.theta)

    def key(self, ndigits: int = 9) -> tuple[float, float, float]:
        """Rounded tuple usable as a dict key across float noise."""
        return (round(self.x, ndigits), round(self.y, ndigits), round(self.theta, ndigits))

    def transform_point(self, px: float, py: float) -> tuple[float, float]:
        c = math.cos(self.theta)
        s = math.sin(self.theta)
        return (self.x + c * px - s * py, self.y + s * px + c * py)


def compose(a: Pose2D, b: Pose2D) -> Pose2D:
    """Rigid-body composition a*b (apply b in a's frame)."""
    c = math.cos(a.theta)
    s = math.sin(a.theta)
    return Pose2D(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.theta + b.theta,
    )


def inverse(p: Pose2D) -> Pose2D:
    """Pose q with compose(p, q) = identity."""
    c = math.cos(p.theta)
    s = math.sin(p.theta)
    return Pose2D(-(c * p.x + s * p.y), -(-s * p.x + c * p.y), -p.theta)


def relative_pose(a: Pose2D, b: Pose2D) -> Pose2D:
    """b expressed in a's frame: compose(a, result) = b."""
    return compose(inverse(a), b)


class Polygon2D:
    """Convex polygon with CCW vertex order.

    Vertex array, unit edge normals, centroid and bounding radius are
    precomputed once; instances are treated as immutable.
    """

    __slots__ = ("vertices", "normals", "centroid", "bound_radius", "_area")

    def __init__(self, vertices, validate: bool = True):
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
            raise ValueError("polygon needs at least 3 planar vertices")
        area2 = _signed_area2(verts)
        if validate:
            if area2 <= 0.0:
                raise ValueError("polygon vertices must be counterclockwise with positive area")
            if not _is_convex_ccw(verts):
                raise ValueError("polygon must be convex")
        edges = np.roll(verts, -1, axis=0) - verts
        # outward normals of a CCW polygon: rotate each edge by -90 degrees
        normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
        lengths = np.linalg.norm(normals, axis=1)
        if validate and np.any(lengths < 1e-12):
            raise ValueError("polygon has a degenerate edge")
        normals /= lengths[:, None]
        verts.setflags(write=False)
        normals.setflags(write=False)
        self.vertices = verts
        self.normals = normals
        self.centroid = verts.mean(axis=0)
        self.bound_radius = float(np.max(np.linalg.norm(verts - self.centroid, axis=1)))
        self._area = 0.5 * area2

    @property
    def area(self) -> float:
        return self._area

    def __repr__(self) -> str:
        return f"Polygon2D({self.vertices.tolist()})"


def _signed_area2(verts: np.ndarray) -> float:
    x = verts[:, 0]
    y = verts[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _is_convex_ccw(verts: np.ndarray) -> bool:
    edges = np.roll(verts, -1, axis=0) - verts
    cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
    return bool(np.all(cross > -1e-12))


def footprint_at(shape: Polygon2D, pose: Pose2D) -> Polygon2D:
    """Transform a local-frame shape into the world frame; CCW is preserved."""
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    rot = np.array([[c, -s], [s, c]])
    verts = shape.vertices @ rot.T
    verts[:, 0] += pose.x
    verts[:, 1] += pose.y
    return Polygon2D(verts, validate=False)


def separation_gap(a: Polygon2D, b: Polygon2D) -> float:
    """Largest signed separation over all edge-normal axes of both polygons.

    Positive: disjoint by that distance. Zero: touching. Negative: the
    polygons overlap on every axis by at least |gap|. Axes are unit normals,
    so the value is metric.
    """
    gap = -math.inf
    for first, second in ((a, b), (b, a)):
        proj_self = first.vertices @ first.normals.T
        proj_other = second.vertices @ first.normals.T
        gaps = np.maximum(
            proj_other.min(axis=0) - proj_self.max(axis=0),
            proj_self.min(axis=0) - proj_other.max(axis=0),
        )
        g = float(gaps.max())
        if g > gap:
            gap = g
    return gap


def polygons_intersect(a: Polygon2D, b: Polygon2D) -> bool:
    """Closed-region overlap test: touching boundaries count as intersecting."""
    dx = a.centroid[0] - b.centroid[0]
    dy = a.centroid[1] - b.centroid[1]
    if dx * dx + dy * dy > (a.bound_radius + b.bound_radius) ** 2:
        return False
    return separation_gap(a, b) <= 0.0


def polygons_penetrate(a: Polygon2D, b: Polygon2D, eps: float = CONTACT_EPS) -> bool:
    """Overlap deeper than eps; exact tangency is allowed (robot-contact tests)."""
    dx = a.centroid[0] - b.centroid[0]
    dy = a.centroid[1] - b.centroid[1]
    if dx * dx + dy * dy > (a.bound_radius + b.bound_radius) ** 2:
        return False
    return separation_gap(a, b) < -eps


class Workspace:
    """Axis-aligned rectangular workspace with the planning grid resolution."""

    __slots__ = ("xmin", "ymin", "xmax", "ymax", "grid_resolution")

    def __init__(self, xmin: float, ymin: float, xmax: float, ymax: float,
                 grid_resolution: float = 0.1):
        if xmax <= xmin or ymax <= ymin:
            raise ValueError("workspace must have positive width and height")
        if grid_resolution <= 0.0:
            raise ValueError("grid_resolution must be positive")
        self.xmin = float(xmin)
        self.ymin = float(ymin)
        self.xmax = float(xmax)
        self.ymax = float(ymax)
        self.grid_resolution = float(grid_resolution)

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    def contains_point(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def __repr__(self) -> str:
        return (f"Workspace({self.xmin}, {self.ymin}, {self.xmax}, {self.ymax}, "
                f"grid_resolution={self.grid_resolution})")


def inside_workspace(poly: Polygon2D, ws: Workspace) -> bool:
    """True iff every vertex lies within the closed workspace rectangle."""
    verts = poly.vertices
    return bool(
        verts[:, 0].min() >= ws.xmin
        and verts[:, 0].max() <= ws.xmax
        and verts[:, 1].min() >= ws.ymin
        and verts[:, 1].max() <= ws.ymax
    )


class SweptPolygon:
    """Vectorized sweep tests for one local-frame polygon over many poses.

    Precomputes world vertices and per-pose rotated normals for a pose batch
    so that workspace containment and obstacle penetration reduce to a few
    einsum calls instead of a Python loop over samples.
    """

    __slots__ = ("local", "poses", "world_verts", "world_normals",
                 "self_proj_min", "self_proj_max", "centers", "bound_radius")

    def __init__(self, local: Polygon2D, poses: np.ndarray):
        poses = np.asarray(poses, dtype=float)
        if poses.ndim == 1:
            poses = poses[None, :]
        self.local = local
        self.poses = poses
        c = np.cos(poses[:, 2])
        s = np.sin(poses[:, 2])
        # rotation matrices (N, 2, 2)
        rot = np.empty((poses.shape[0], 2, 2))
        rot[:, 0, 0] = c
        rot[:, 0, 1] = -s
        rot[:, 1, 0] = s
        rot[:, 1, 1] = c
        self.world_verts = np.einsum("nij,kj->nki", rot, local.vertices)
        self.world_verts += poses[:, None, :2]
        self.world_normals = np.einsum("nij,aj->nai", rot, local.normals)
        proj = local.vertices @ local.normals.T  # (K, A), rotation invariant
        self.self_proj_min = proj.min(axis=0)
        self.self_proj_max = proj.max(axis=0)
        centroid_local = local.centroid
        self.centers = np.einsum("nij,j->ni", rot, centroid_local) + poses[:, :2]
        self.bound_radius = local.bound_radius

    def __len__(self) -> int:
        return self.poses.shape[0]

    def outside_workspace(self, ws: Workspace) -> np.ndarray:
        """Boolean mask of poses whose footprint leaves the workspace."""
        v = self.world_verts
        return (
            (v[:, :, 0].min(axis=1) < ws.xmin)
            | (v[:, :, 0].max(axis=1) > ws.xmax)
            | (v[:, :, 1].min(axis=1) < ws.ymin)
            | (v[:, :, 1].max(axis=1) > ws.ymax)
        )

    def min_gap(self, obstacle: Polygon2D) -> np.ndarray:
        """Per-pose separation gap against one static world-frame polygon."""
        n = len(self)
        gaps = np.full(n, np.inf)
        d = self.centers - obstacle.centroid
        near = np.einsum("ni,ni->n", d, d) <= (self.bound_radius + obstacle.bound_radius) ** 2
        if not near.any():
            return gaps
        idx = np.nonzero(near)[0]
        wv = self.world_verts[idx]          # (M, K, 2)
        wn = self.world_normals[idx]        # (M, A, 2)
        # obstacle axes: project moving vertices onto static normals
        proj_mov = np.einsum("mkd,ad->mak", wv, obstacle.normals)
        proj_obs = obstacle.vertices @ obstacle.normals.T  # (Ko, A)
        obs_min = proj_obs.min(axis=0)
        obs_max = proj_obs.max(axis=0)
        gap_static = np.maximum(
            proj_mov.min(axis=2) - obs_max,
            obs_min - proj_mov.max(axis=2),
        ).max(axis=1)
        # moving axes: world offset shifts the cached self-projection
        offs = np.einsum("mad,md->ma", wn, self.poses[idx, :2])
        proj_obs_on_mov = np.einsum("kd,mad->mak", obstacle.vertices, wn)
        gap_moving = np.maximum(
            proj_obs_on_mov.min(axis=2) - (self.self_proj_max + offs),
            (self.self_proj_min + offs) - proj_obs_on_mov.max(axis=2),
        ).max(axis=1)
        gaps[idx] = np.maximum(gap_static, gap_moving)
        return gaps

    def hits(self, obstacle: Polygon2D, eps: float = CONTACT_EPS) -> np.ndarray:
        """Per-pose mask: penetrates the obstacle deeper than eps."""
        return self.min_gap(obstacle) < -eps

    def hits_any(self, obstacle: Polygon2D, eps: float = CONTACT_EPS) -> bool:
        return bool(self.hits(obstacle, eps).any())

    def first_hit(self, obstacle: Polygon2D, eps: float = CONTACT_EPS) -> int:
        """Index of the first penetrating pose, or -1 when clear."""
        mask = self.hits(obstacle, eps)
        idx = np.nonzero(mask)[0]
        return int(idx[0]) if idx.size else -1
