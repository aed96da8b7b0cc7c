"""Shortest bounded-curvature (Dubins) paths between planar poses.

Closed-form solutions for all six words. Each candidate word is solved in the
normalized frame (start at origin, goal on the x axis, unit radius); the
shortest admissible word wins, ties broken by the fixed order
LSL < RSR < LSR < RSL < RLR < LRL. The selected path's endpoint is
reconstructed and checked against the query as a guard against numerical
breakdown near word boundaries.
"""

from __future__ import annotations

import math

import numpy as np

from .geom import (
    CONTACT_EPS,
    Polygon2D,
    Pose2D,
    SweptPolygon,
    Workspace,
    wrap_angle,
)

TWO_PI = 2.0 * math.pi

# Fixed tie-break order; first four are CSC, last two CCC.
WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")
CSC_WORDS = WORDS[:4]
CCC_WORDS = WORDS[4:]

_ENDPOINT_TOL = 1e-6


class DubinsPath:
    """One Dubins word instantiated from a start pose.

    seg_lengths are the three arc/line lengths in meters (arcs already scaled
    by the radius); zero-length segments are allowed.
    """

    __slots__ = ("word", "seg_lengths", "radius", "start")

    def __init__(self, word: str, seg_lengths, radius: float, start: Pose2D):
        self.word = word
        self.seg_lengths = (float(seg_lengths[0]), float(seg_lengths[1]), float(seg_lengths[2]))
        self.radius = float(radius)
        self.start = start

    @property
    def length(self) -> float:
        a, b, c = self.seg_lengths
        return a + b + c

    def __repr__(self) -> str:
        return (f"DubinsPath({self.word}, segs=({self.seg_lengths[0]:.4f}, "
                f"{self.seg_lengths[1]:.4f}, {self.seg_lengths[2]:.4f}), rho={self.radius})")

    def endpoint(self) -> Pose2D:
        pose = self.start
        for letter, seg in zip(self.word, self.seg_lengths):
            pose = advance(pose, letter, seg, self.radius)
        return pose

    def sample(self, step: float) -> list[Pose2D]:
        arr = self.sample_array(step)
        return [Pose2D(x, y, t) for x, y, t in arr]

    def sample_array(self, step: float) -> np.ndarray:
        """Poses (N, 3) at arc-length spacing <= step, endpoints included."""
        if step <= 0.0:
            raise ValueError("step must be positive")
        total = self.length
        if total <= 0.0:
            return np.array([[self.start.x, self.start.y, self.start.theta]])
        n = max(1, math.ceil(total / step - 1e-12))
        svals = np.linspace(0.0, total, n + 1)
        out = np.empty((n + 1, 3))
        pose = self.start
        s0 = 0.0
        filled = 0
        for letter, seg in zip(self.word, self.seg_lengths):
            if seg > 0.0:
                mask = (svals >= s0 - 1e-12) & (svals <= s0 + seg + 1e-12)
                idx = np.nonzero(mask)[0]
                idx = idx[idx >= filled]
                if idx.size:
                    local = np.clip(svals[idx] - s0, 0.0, seg)
                    out[idx] = _advance_many(pose, letter, local, self.radius)
                    filled = idx[-1] + 1
                pose = advance(pose, letter, seg, self.radius)
                s0 += seg
        if filled < n + 1:
            out[filled:] = (pose.x, pose.y, pose.theta)
        out[:, 2] = _wrap_array(out[:, 2])
        return out

    def to_dict(self) -> dict:
        return {
            "word": self.word,
            "seg_lengths": list(self.seg_lengths),
            "radius": self.radius,
            "start": [self.start.x, self.start.y, self.start.theta],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DubinsPath":
        return cls(d["word"], d["seg_lengths"], d["radius"], Pose2D(*d["start"]))


def advance(pose: Pose2D, letter: str, length: float, radius: float) -> Pose2D:
    """Exact endpoint after driving one segment from pose."""
    if length <= 0.0:
        return pose
    x, y, th = pose.x, pose.y, pose.theta
    if letter == "S":
        return Pose2D(x + length * math.cos(th), y + length * math.sin(th), th)
    phi = length / radius
    if letter == "L":
        th2 = th + phi
        return Pose2D(x + radius * (math.sin(th2) - math.sin(th)),
                      y - radius * (math.cos(th2) - math.cos(th)), th2)
    th2 = th - phi
    return Pose2D(x - radius * (math.sin(th2) - math.sin(th)),
                  y + radius * (math.cos(th2) - math.cos(th)), th2)


def _advance_many(pose: Pose2D, letter: str, s: np.ndarray, radius: float) -> np.ndarray:
    out = np.empty((s.size, 3))
    th = pose.theta
    if letter == "S":
        out[:, 0] = pose.x + s * math.cos(th)
        out[:, 1] = pose.y + s * math.sin(th)
        out[:, 2] = th
        return out
    if letter == "L":
        th2 = th + s / radius
        out[:, 0] = pose.x + radius * (np.sin(th2) - math.sin(th))
        out[:, 1] = pose.y - radius * (np.cos(th2) - math.cos(th))
    else:
        th2 = th - s / radius
        out[:, 0] = pose.x - radius * (np.sin(th2) - math.sin(th))
        out[:, 1] = pose.y + radius * (np.cos(th2) - math.cos(th))
    out[:, 2] = th2
    return out


def _wrap_array(angles: np.ndarray) -> np.ndarray:
    wrapped = np.remainder(angles + math.pi, TWO_PI) - math.pi
    wrapped[wrapped <= -math.pi] += TWO_PI
    return wrapped


def _mod2pi(theta: float) -> float:
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    return t


def solve_word(word: str, alpha: float, beta: float, d: float):
    """Normalized-frame segment lengths (t, p, q) for one word, or None.

    alpha/beta are start/goal headings relative to the base line, d the
    center distance divided by the radius. Arc lengths are in radians,
    the straight length in radius units.
    """
    sa = math.sin(alpha)
    ca = math.cos(alpha)
    sb = math.sin(beta)
    cb = math.cos(beta)
    cab = math.cos(alpha - beta)

    if word == "LSL":
        p_sq = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb)
        if p_sq < -1e-12:
            return None
        tmp = math.atan2(cb - ca, d + sa - sb)
        return (_mod2pi(tmp - alpha), math.sqrt(max(p_sq, 0.0)), _mod2pi(beta - tmp))
    if word == "RSR":
        p_sq = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa)
        if p_sq < -1e-12:
            return None
        tmp = math.atan2(ca - cb, d - sa + sb)
        return (_mod2pi(alpha - tmp), math.sqrt(max(p_sq, 0.0)), _mod2pi(tmp - beta))
    if word == "LSR":
        p_sq = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb)
        if p_sq < -1e-12:
            return None
        p = math.sqrt(max(p_sq, 0.0))
        tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
        return (_mod2pi(tmp - alpha), p, _mod2pi(tmp - beta))
    if word == "RSL":
        p_sq = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb)
        if p_sq < -1e-12:
            return None
        p = math.sqrt(max(p_sq, 0.0))
        tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
        return (_mod2pi(alpha - tmp), p, _mod2pi(beta - tmp))
    if word == "RLR":
        tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0
        if abs(tmp) > 1.0:
            return None
        p = _mod2pi(TWO_PI - math.acos(tmp))
        phi = math.atan2(ca - cb, d - sa + sb)
        t = _mod2pi(alpha - phi + p / 2.0)
        return (t, p, _mod2pi(alpha - beta - t + p))
    if word == "LRL":
        tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0
        if abs(tmp) > 1.0:
            return None
        p = _mod2pi(TWO_PI - math.acos(tmp))
        phi = math.atan2(cb - ca, d + sa - sb)
        t = _mod2pi(phi - alpha + p / 2.0)
        return (t, p, _mod2pi(beta - alpha - t + p))
    raise ValueError(f"unknown word {word!r}")


def _normalized_query(start: Pose2D, goal: Pose2D, radius: float):
    dx = goal.x - start.x
    dy = goal.y - start.y
    dist = math.hypot(dx, dy)
    psi = math.atan2(dy, dx) if dist > 0.0 else 0.0
    return _mod2pi(start.theta - psi), _mod2pi(goal.theta - psi), dist / radius


def all_words(start: Pose2D, goal: Pose2D, radius: float) -> list[DubinsPath]:
    """Every admissible word's path for the query, unordered."""
    alpha, beta, d = _normalized_query(start, goal, radius)
    out = []
    for word in WORDS:
        sol = solve_word(word, alpha, beta, d)
        if sol is not None:
            segs = (sol[0] * radius, sol[1] * radius, sol[2] * radius)
            out.append(DubinsPath(word, segs, radius, start))
    return out


def shortest_dubins(start: Pose2D, goal: Pose2D, radius: float) -> DubinsPath:
    """Minimum-length Dubins path from start to goal at the given radius."""
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    dx = goal.x - start.x
    dy = goal.y - start.y
    if dx == 0.0 and dy == 0.0 and wrap_angle(goal.theta - start.theta) == 0.0:
        return DubinsPath("LSL", (0.0, 0.0, 0.0), radius, start)
    alpha, beta, d = _normalized_query(start, goal, radius)
    ranked = []
    for i, word in enumerate(WORDS):
        sol = solve_word(word, alpha, beta, d)
        if sol is not None:
            ranked.append((sol[0] + sol[1] + sol[2], i, sol))
    ranked.sort()
    for _, i, sol in ranked:
        word = WORDS[i]
        segs = (sol[0] * radius, sol[1] * radius, sol[2] * radius)
        path = DubinsPath(word, segs, radius, start)
        end = path.endpoint()
        if (abs(end.x - goal.x) <= _ENDPOINT_TOL
                and abs(end.y - goal.y) <= _ENDPOINT_TOL
                and abs(wrap_angle(end.theta - goal.theta)) <= _ENDPOINT_TOL):
            return path
    raise ValueError(f"no admissible Dubins word for {start} -> {goal} at rho={radius}")


def shortest_lengths(starts: np.ndarray, goal_x: float, goal_y: float,
                     goal_theta: float, radius: float) -> np.ndarray:
    """Shortest-word lengths for a batch of start poses (N, 3) to one goal.

    Vectorized mirror of the six closed forms, length only: no endpoint
    reconstruction guard, so use it for search heuristics, not for paths.
    """
    dx = goal_x - starts[:, 0]
    dy = goal_y - starts[:, 1]
    dist = np.hypot(dx, dy)
    psi = np.arctan2(dy, dx)
    alpha = np.remainder(starts[:, 2] - psi, TWO_PI)
    beta = np.remainder(goal_theta - psi, TWO_PI)
    d = dist / radius
    sa = np.sin(alpha)
    ca = np.cos(alpha)
    sb = np.sin(beta)
    cb = np.cos(beta)
    cab = np.cos(alpha - beta)
    m2pi = lambda a: np.remainder(a, TWO_PI)
    best = np.full(d.shape, np.inf)

    p_sq = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb)
    tmp = np.arctan2(cb - ca, d + sa - sb)
    lsl = m2pi(tmp - alpha) + np.sqrt(np.maximum(p_sq, 0.0)) + m2pi(beta - tmp)
    np.minimum(best, np.where(p_sq >= -1e-12, lsl, np.inf), out=best)

    p_sq = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa)
    tmp = np.arctan2(ca - cb, d - sa + sb)
    rsr = m2pi(alpha - tmp) + np.sqrt(np.maximum(p_sq, 0.0)) + m2pi(tmp - beta)
    np.minimum(best, np.where(p_sq >= -1e-12, rsr, np.inf), out=best)

    p_sq = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb)
    p = np.sqrt(np.maximum(p_sq, 0.0))
    tmp = np.arctan2(-ca - cb, d + sa + sb) - np.arctan2(-2.0, p)
    lsr = m2pi(tmp - alpha) + p + m2pi(tmp - beta)
    np.minimum(best, np.where(p_sq >= -1e-12, lsr, np.inf), out=best)

    p_sq = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb)
    p = np.sqrt(np.maximum(p_sq, 0.0))
    tmp = np.arctan2(ca + cb, d - sa - sb) - np.arctan2(2.0, p)
    rsl = m2pi(alpha - tmp) + p + m2pi(beta - tmp)
    np.minimum(best, np.where(p_sq >= -1e-12, rsl, np.inf), out=best)

    tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0
    ok = np.abs(tmp) <= 1.0
    p = m2pi(TWO_PI - np.arccos(np.clip(tmp, -1.0, 1.0)))
    phi = np.arctan2(ca - cb, d - sa + sb)
    t = m2pi(alpha - phi + 0.5 * p)
    rlr = t + p + m2pi(alpha - beta - t + p)
    np.minimum(best, np.where(ok, rlr, np.inf), out=best)

    tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0
    ok = np.abs(tmp) <= 1.0
    p = m2pi(TWO_PI - np.arccos(np.clip(tmp, -1.0, 1.0)))
    phi = np.arctan2(cb - ca, d + sa - sb)
    t = m2pi(phi - alpha + 0.5 * p)
    lrl = t + p + m2pi(beta - alpha - t + p)
    np.minimum(best, np.where(ok, lrl, np.inf), out=best)
    return best * radius


def shortest_words_batch(starts: np.ndarray, goals: np.ndarray,
                         radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Shortest word and segment lengths for N start/goal pairs.

    Returns (codes, segs): codes (N,) indexes WORDS, segs (N, 3) holds
    the segment lengths in meters. Same closed forms as shortest_dubins
    but without the endpoint reconstruction guard, so confirm the winner
    with the scalar solver when the exact path object matters.
    """
    starts = np.asarray(starts, dtype=float)
    goals = np.asarray(goals, dtype=float)
    dx = goals[:, 0] - starts[:, 0]
    dy = goals[:, 1] - starts[:, 1]
    dist = np.hypot(dx, dy)
    psi = np.where(dist > 0.0, np.arctan2(dy, dx), 0.0)
    alpha = np.remainder(starts[:, 2] - psi, TWO_PI)
    beta = np.remainder(goals[:, 2] - psi, TWO_PI)
    d = dist / radius
    sa, ca = np.sin(alpha), np.cos(alpha)
    sb, cb = np.sin(beta), np.cos(beta)
    cab = np.cos(alpha - beta)
    m2pi = lambda a: np.remainder(a, TWO_PI)
    n = d.shape[0]
    segs = np.empty((6, n, 3))
    valid = np.empty((6, n), dtype=bool)

    p_sq = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb)
    tmp = np.arctan2(cb - ca, d + sa - sb)
    segs[0, :, 0] = m2pi(tmp - alpha)
    segs[0, :, 1] = np.sqrt(np.maximum(p_sq, 0.0))
    segs[0, :, 2] = m2pi(beta - tmp)
    valid[0] = p_sq >= -1e-12

    p_sq = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa)
    tmp = np.arctan2(ca - cb, d - sa + sb)
    segs[1, :, 0] = m2pi(alpha - tmp)
    segs[1, :, 1] = np.sqrt(np.maximum(p_sq, 0.0))
    segs[1, :, 2] = m2pi(tmp - beta)
    valid[1] = p_sq >= -1e-12

    p_sq = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb)
    p = np.sqrt(np.maximum(p_sq, 0.0))
    tmp = np.arctan2(-ca - cb, d + sa + sb) - np.arctan2(-2.0, p)
    segs[2, :, 0] = m2pi(tmp - alpha)
    segs[2, :, 1] = p
    segs[2, :, 2] = m2pi(tmp - beta)
    valid[2] = p_sq >= -1e-12

    p_sq = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb)
    p = np.sqrt(np.maximum(p_sq, 0.0))
    tmp = np.arctan2(ca + cb, d - sa - sb) - np.arctan2(2.0, p)
    segs[3, :, 0] = m2pi(alpha - tmp)
    segs[3, :, 1] = p
    segs[3, :, 2] = m2pi(beta - tmp)
    valid[3] = p_sq >= -1e-12

    tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0
    valid[4] = np.abs(tmp) <= 1.0
    p = m2pi(TWO_PI - np.arccos(np.clip(tmp, -1.0, 1.0)))
    phi = np.arctan2(ca - cb, d - sa + sb)
    t = m2pi(alpha - phi + 0.5 * p)
    segs[4, :, 0] = t
    segs[4, :, 1] = p
    segs[4, :, 2] = m2pi(alpha - beta - t + p)

    tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0
    valid[5] = np.abs(tmp) <= 1.0
    p = m2pi(TWO_PI - np.arccos(np.clip(tmp, -1.0, 1.0)))
    phi = np.arctan2(cb - ca, d + sa - sb)
    t = m2pi(phi - alpha + 0.5 * p)
    segs[5, :, 0] = t
    segs[5, :, 1] = p
    segs[5, :, 2] = m2pi(beta - alpha - t + p)

    lengths = np.where(valid, segs.sum(axis=2), np.inf)
    codes = lengths.argmin(axis=0)
    out = segs[codes, np.arange(n)] * radius
    # exact coincidence has an all-zero LSL that the closed forms miss
    trivial = (dist == 0.0) & (np.remainder(beta - alpha, TWO_PI) == 0.0)
    if trivial.any():
        codes = np.where(trivial, 0, codes)
        out[trivial] = 0.0
    return codes, out


# segment letters per word, encoded 0=S, 1=L, 2=R
_WORD_LETTERS = np.array(
    [[{"S": 0, "L": 1, "R": 2}[ch] for ch in w] for w in WORDS], dtype=np.int8)


def _advance_array(poses: np.ndarray, letters: np.ndarray, s: np.ndarray,
                   radius: float) -> np.ndarray:
    """Per-row advance: pose i moves s[i] along its own segment letter."""
    out = np.empty_like(poses)
    th = poses[:, 2]
    straight = letters == 0
    left = letters == 1
    right = letters == 2
    th2 = np.where(left, th + s / radius, np.where(right, th - s / radius, th))
    out[:, 0] = np.where(
        straight, poses[:, 0] + s * np.cos(th),
        poses[:, 0] + np.where(left, radius * (np.sin(th2) - np.sin(th)),
                               -radius * (np.sin(th2) - np.sin(th))))
    out[:, 1] = np.where(
        straight, poses[:, 1] + s * np.sin(th),
        poses[:, 1] + np.where(left, -radius * (np.cos(th2) - np.cos(th)),
                               radius * (np.cos(th2) - np.cos(th))))
    out[:, 2] = th2
    return out


def sample_words_batch(starts: np.ndarray, codes: np.ndarray, segs: np.ndarray,
                       radius: float, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Pose samples for N paths, concatenated, plus per-path offsets.

    Path i occupies rows offsets[i]:offsets[i+1] and is sampled at equal
    arc-length spacing <= step with both endpoints included, matching
    DubinsPath.sample_array. starts (N, 3), codes and segs as produced by
    shortest_words_batch.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    starts = np.asarray(starts, dtype=float)
    total = segs.sum(axis=1)
    counts = np.maximum(1, np.ceil(total / step - 1e-12).astype(int)) + 1
    offsets = np.concatenate(([0], np.cumsum(counts)))
    m = offsets[-1]
    path_idx = np.repeat(np.arange(codes.shape[0]), counts)
    local_i = np.arange(m) - offsets[path_idx]
    svals = local_i * (total / (counts - 1))[path_idx]

    letters = _WORD_LETTERS[codes]  # (N, 3)
    # segment start poses, chained through the word
    p0 = starts
    p1 = _advance_array(p0, letters[:, 0], segs[:, 0], radius)
    p2 = _advance_array(p1, letters[:, 1], segs[:, 1], radius)
    ends = np.cumsum(segs, axis=1)
    # first segment whose closed end covers the sample, zero-length runs skip
    seg_j = ((svals > ends[path_idx, 0] + 1e-12).astype(np.int8)
             + (svals > ends[path_idx, 1] + 1e-12))
    seg_starts = np.stack((p0, p1, p2), axis=1)[path_idx, seg_j]
    seg_base = np.where(seg_j > 0, ends[path_idx, seg_j - 1], 0.0)
    seg_len = segs[path_idx, seg_j]
    local_s = np.clip(svals - seg_base, 0.0, seg_len)
    out = _advance_array(seg_starts, letters[path_idx, seg_j], local_s, radius)
    out[:, 2] = _wrap_array(out[:, 2])
    return out, offsets


def classify_regime(start: Pose2D, goal: Pose2D, radius: float) -> str:
    """'short_distance' when the positions are closer than 4*radius."""
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    d = math.hypot(goal.x - start.x, goal.y - start.y)
    return "short_distance" if d < 4.0 * radius else "long_distance"


def sample_path(path: DubinsPath, step: float) -> list[Pose2D]:
    return path.sample(step)


def path_collision_free(
    path: DubinsPath,
    pushed_footprint: Polygon2D | None,
    static_obstacles: list[Polygon2D],
    ws: Workspace,
    step: float,
    robot_footprint: Polygon2D | None = None,
    eps: float = CONTACT_EPS,
) -> bool:
    """Sampled feasibility of a path for the attached footprints.

    Footprints are given in the frame of the path poses (for a push that is
    the robot frame, with the object's shape pre-transformed by its attach
    pose). Each provided footprint must stay inside the workspace and must
    not penetrate any obstacle deeper than eps at any sample.
    """
    poses = path.sample_array(step)
    for local in (pushed_footprint, robot_footprint):
        if local is None:
            continue
        sweep = SweptPolygon(local, poses)
        if sweep.outside_workspace(ws).any():
            return False
        for obs in static_obstacles:
            if sweep.hits_any(obs, eps):
                return False
    return True
