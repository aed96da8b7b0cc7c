"""Stable-pushing contact model.

A car-like robot pushes one convex object at a time through a flat front
bumper. Contact happens at a face midpoint with the robot heading along the
inward face normal; while pushing, robot and object form one rigid body, so
the object pose is always compose(robot_pose, attach_transform) with a
transform that depends only on (shape, face, bumper_offset). Quasistatic
stability is enforced through the minimum pushing turn radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geom import Polygon2D, Pose2D, compose, inverse, wrap_angle


def rectangle(xmin: float, ymin: float, xmax: float, ymax: float) -> Polygon2D:
    return Polygon2D([(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)])


def square_shape(side: float = 0.15) -> Polygon2D:
    h = side / 2.0
    return rectangle(-h, -h, h, h)


def default_body_footprint(bumper_offset: float) -> Polygon2D:
    """Robot body in its own frame; the bumper face sits at x = bumper_offset."""
    return rectangle(-0.15, -0.115, bumper_offset, 0.115)


@dataclass(frozen=True)
class RobotParams:
    """Kinematic and geometric parameters of the pusher.

    rho_push and rho_transit are independent limits (pushing is constrained
    by quasistatic stability, free transit by steering alone).
    """

    rho_push: float = 1.43
    rho_transit: float = 1.09
    bumper_offset: float = 0.2
    rho_push_min: float = 0.815
    body_footprint: Polygon2D = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.rho_push <= 0.0 or self.rho_transit <= 0.0:
            raise ValueError("turn radii must be positive")
        if self.rho_push < self.rho_push_min:
            raise ValueError(
                f"rho_push={self.rho_push} below quasistatic minimum {self.rho_push_min}")
        if self.bumper_offset <= 0.0:
            raise ValueError("bumper_offset must be positive")
        if self.body_footprint is None:
            object.__setattr__(self, "body_footprint",
                               default_body_footprint(self.bumper_offset))


@dataclass(frozen=True)
class PushingPose:
    """Robot placement for pushing one face of one object."""

    object_id: str
    face_index: int
    robot_pose: Pose2D
    attach_transform: Pose2D


def face_midpoint_and_normal(shape: Polygon2D, face_index: int):
    """Local-frame midpoint and outward unit normal of face i (edge i -> i+1)."""
    verts = shape.vertices
    k = verts.shape[0]
    a = verts[face_index]
    b = verts[(face_index + 1) % k]
    nx, ny = shape.normals[face_index]
    return ((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0), (float(nx), float(ny))


def attach_transform(shape: Polygon2D, face_index: int, bumper_offset: float) -> Pose2D:
    """Object pose in the robot frame for pushing the given face."""
    return inverse(_local_robot_pose(shape, face_index, bumper_offset))


def _local_robot_pose(shape: Polygon2D, face_index: int, bumper_offset: float) -> Pose2D:
    (mx, my), (nx, ny) = face_midpoint_and_normal(shape, face_index)
    return Pose2D(mx + bumper_offset * nx, my + bumper_offset * ny,
                  math.atan2(-ny, -nx))


def pushing_poses(object_pose: Pose2D, shape: Polygon2D,
                  params: RobotParams) -> list[PushingPose]:
    """One pushing pose per face, ordered by face index.

    object_id is filled with an empty string; callers that track objects
    re-wrap with the real id.
    """
    out = []
    for k in range(shape.vertices.shape[0]):
        r0 = _local_robot_pose(shape, k, params.bumper_offset)
        out.append(PushingPose(
            object_id="",
            face_index=k,
            robot_pose=compose(object_pose, r0),
            attach_transform=inverse(r0),
        ))
    return out


def robot_pose_for_face(object_pose: Pose2D, shape: Polygon2D, face_index: int,
                        params: RobotParams) -> Pose2D:
    return compose(object_pose, _local_robot_pose(shape, face_index, params.bumper_offset))


def object_pose_along_push(robot_pose: Pose2D, attach: Pose2D) -> Pose2D:
    """Object pose while rigidly attached to the robot."""
    return compose(robot_pose, attach)


def symmetry_variants(pose: Pose2D, symmetry: int) -> list[Pose2D]:
    """Orientation-equivalent goal poses under an n-fold rotational symmetry."""
    if symmetry < 1:
        raise ValueError("symmetry order must be >= 1")
    return [Pose2D(pose.x, pose.y, pose.theta + 2.0 * math.pi * k / symmetry)
            for k in range(symmetry)]


def same_pose_mod_symmetry(p: Pose2D, q: Pose2D, symmetry: int,
                           pos_tol: float = 1e-6, ang_tol: float = 1e-6) -> bool:
    """Equality up to the object's rotational symmetry group."""
    if math.hypot(p.x - q.x, p.y - q.y) > pos_tol:
        return False
    sector = 2.0 * math.pi / symmetry
    diff = wrap_angle(p.theta - q.theta)
    residue = diff - sector * round(diff / sector)
    return abs(residue) <= ang_tol
