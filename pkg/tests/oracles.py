"""Independent reference implementations used only by the test suite.

The Dubins oracle builds each word geometrically from circle centers and
tangent lines / tangent circles instead of the closed-form length algebra the
library uses, and validates every candidate by reconstructing its endpoint.
The polygon oracle is a brute-force separating-axis test over unnormalized
edge normals. Keeping these structurally different from the implementations
is the point; do not import from them in package code.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi
WORD_ORDER = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")


def _mod2pi(t: float) -> float:
    t = math.fmod(t, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    return t


def _wrap(t: float) -> float:
    t = math.fmod(t, TWO_PI)
    if t <= -math.pi:
        t += TWO_PI
    elif t > math.pi:
        t -= TWO_PI
    return t


def _advance(x, y, th, letter, seg, rho):
    if seg <= 0.0:
        return x, y, th
    if letter == "S":
        return x + seg * math.cos(th), y + seg * math.sin(th), th
    phi = seg / rho
    if letter == "L":
        t2 = th + phi
        return (x + rho * (math.sin(t2) - math.sin(th)),
                y - rho * (math.cos(t2) - math.cos(th)), t2)
    t2 = th - phi
    return (x - rho * (math.sin(t2) - math.sin(th)),
            y + rho * (math.cos(t2) - math.cos(th)), t2)


def _endpoint(word, segs, start, rho):
    x, y, th = start
    for letter, seg in zip(word, segs):
        x, y, th = _advance(x, y, th, letter, seg, rho)
    return x, y, th


def _reaches(word, segs, start, goal, rho, tol=1e-7):
    x, y, th = _endpoint(word, segs, start, rho)
    return (abs(x - goal[0]) <= tol and abs(y - goal[1]) <= tol
            and abs(_wrap(th - goal[2])) <= tol)


def _center(pose, rho, turn):
    x, y, th = pose
    if turn == "L":
        return (x - rho * math.sin(th), y + rho * math.cos(th))
    return (x + rho * math.sin(th), y - rho * math.cos(th))


def _csc_candidates(word, start, goal, rho):
    c1 = _center(start, rho, word[0])
    c2 = _center(goal, rho, word[2])
    dx = c2[0] - c1[0]
    dy = c2[1] - c1[1]
    d = math.hypot(dx, dy)
    th_s, th_g = start[2], goal[2]
    out = []
    if word in ("LSL", "RSR"):
        if d < 1e-12:
            # coincident circles: pure arc, no straight segment
            sweep = _mod2pi(th_g - th_s) if word == "LSL" else _mod2pi(th_s - th_g)
            out.append((rho * sweep, 0.0, 0.0))
            return out
        h = math.atan2(dy, dx)
        if word == "LSL":
            t, q = _mod2pi(h - th_s), _mod2pi(th_g - h)
        else:
            t, q = _mod2pi(th_s - h), _mod2pi(h - th_g)
        out.append((rho * t, d, rho * q))
        return out
    # inner tangents need the circles at least 2*rho apart
    if d < 2.0 * rho - 1e-12:
        return out
    ratio = min(1.0, 2.0 * rho / d) if d > 0.0 else 1.0
    psi = math.atan2(dy, dx)
    straight = math.sqrt(max(d * d - 4.0 * rho * rho, 0.0))
    if word == "LSR":
        h = psi + math.asin(ratio)
        t, q = _mod2pi(h - th_s), _mod2pi(h - th_g)
    else:  # RSL
        h = psi - math.asin(ratio)
        t, q = _mod2pi(th_s - h), _mod2pi(th_g - h)
    out.append((rho * t, straight, rho * q))
    return out


def _ccc_candidates(word, start, goal, rho):
    outer = word[0]
    c1 = _center(start, rho, outer)
    c3 = _center(goal, rho, outer)
    dx = c3[0] - c1[0]
    dy = c3[1] - c1[1]
    d = math.hypot(dx, dy)
    if d > 4.0 * rho + 1e-12 or d < 1e-12:
        return []
    mx, my = (c1[0] + c3[0]) / 2.0, (c1[1] + c3[1]) / 2.0
    hh = math.sqrt(max(4.0 * rho * rho - (d / 2.0) ** 2, 0.0))
    px, py = -dy / d, dx / d
    th_s, th_g = start[2], goal[2]
    out = []
    for sign in (1.0, -1.0):
        c2 = (mx + sign * hh * px, my + sign * hh * py)
        p12 = ((c1[0] + c2[0]) / 2.0, (c1[1] + c2[1]) / 2.0)
        p23 = ((c2[0] + c3[0]) / 2.0, (c2[1] + c3[1]) / 2.0)
        g12 = math.atan2(p12[1] - c1[1], p12[0] - c1[0])
        g23 = math.atan2(p23[1] - c3[1], p23[0] - c3[0])
        if outer == "L":
            h1 = g12 + math.pi / 2.0
            h2 = g23 + math.pi / 2.0
            t = _mod2pi(h1 - th_s)
            p = _mod2pi(h1 - h2)  # middle R arc
            q = _mod2pi(th_g - h2)
        else:
            h1 = g12 - math.pi / 2.0
            h2 = g23 - math.pi / 2.0
            t = _mod2pi(th_s - h1)
            p = _mod2pi(h2 - h1)  # middle L arc
            q = _mod2pi(h2 - th_g)
        out.append((rho * t, rho * p, rho * q))
    return out


def dubins_word_candidates(word, start, goal, rho):
    """All geometric candidates for one word that verifiably reach the goal."""
    if word in ("LSL", "RSR", "LSR", "RSL"):
        cands = _csc_candidates(word, start, goal, rho)
    else:
        cands = _ccc_candidates(word, start, goal, rho)
    return [c for c in cands if _reaches(word, c, start, goal, rho)]


def dubins_shortest_oracle(start, goal, rho):
    """(length, word) of the shortest admissible path, construction-based.

    start/goal are (x, y, theta) tuples. Includes the short-arc CCC branch,
    which is never globally optimal, so the minimum matches a solver that
    only considers the long-arc branch.
    """
    if (abs(start[0] - goal[0]) < 1e-15 and abs(start[1] - goal[1]) < 1e-15
            and abs(_wrap(start[2] - goal[2])) < 1e-15):
        return 0.0, "LSL"
    best = None
    for i, word in enumerate(WORD_ORDER):
        for cand in dubins_word_candidates(word, start, goal, rho):
            total = cand[0] + cand[1] + cand[2]
            key = (total, i)
            if best is None or key < best:
                best = key
    if best is None:
        raise AssertionError(f"oracle found no path for {start} -> {goal}")
    return best[0], WORD_ORDER[best[1]]


def polygons_intersect_bruteforce(verts_a, verts_b) -> bool:
    """Closed-region SAT over raw (unnormalized) edge normals of both polygons."""
    va = [tuple(map(float, v)) for v in verts_a]
    vb = [tuple(map(float, v)) for v in verts_b]
    for verts in (va, vb):
        n = len(verts)
        for i in range(n):
            ex = verts[(i + 1) % n][0] - verts[i][0]
            ey = verts[(i + 1) % n][1] - verts[i][1]
            ax, ay = ey, -ex
            pa = [ax * x + ay * y for x, y in va]
            pb = [ax * x + ay * y for x, y in vb]
            if max(pa) < min(pb) or max(pb) < min(pa):
                return False
    return True


def random_convex_polygon(rng: np.random.Generator, n_min=3, n_max=8,
                          scale=1.0, center=(0.0, 0.0)):
    """Random convex CCW polygon: points on a randomly oriented ellipse."""
    n = int(rng.integers(n_min, n_max + 1))
    angles = np.sort(rng.uniform(0.0, TWO_PI, size=n))
    while np.min(np.diff(angles, append=angles[0] + TWO_PI)) < 0.05:
        angles = np.sort(rng.uniform(0.0, TWO_PI, size=n))
    a = scale * rng.uniform(0.3, 1.0)
    b = scale * rng.uniform(0.3, 1.0)
    tilt = rng.uniform(0.0, math.pi)
    ct, st = math.cos(tilt), math.sin(tilt)
    xs = a * np.cos(angles)
    ys = b * np.sin(angles)
    return np.stack([center[0] + ct * xs - st * ys,
                     center[1] + st * xs + ct * ys], axis=1)
