"""Reeds-Shepp style distance estimate for a car that can reverse.

Used only as a search heuristic by the transit planner. Covers the CSC and
C|CC / CC|C word families (both gear directions via timeflip, mirrored turns
via reflection, reversed traversal via the backwards transform); the rarer
switch-heavy families are omitted, so the value can slightly overestimate
the true Reeds-Shepp optimum. Callers cap it with the forward Dubins length,
which restores a useful estimate whenever the forward-only path is shorter.
"""

from __future__ import annotations

import math

import numpy as np

_EPS = 1e-10


def _m(angle: float) -> float:
    a = math.fmod(angle, 2.0 * math.pi)
    if a < -math.pi:
        a += 2.0 * math.pi
    elif a >= math.pi:
        a -= 2.0 * math.pi
    return a


def _polar(x: float, y: float):
    return math.hypot(x, y), math.atan2(y, x)


def _lp_sp_lp(x: float, y: float, phi: float):
    u, t = _polar(x - math.sin(phi), y - 1.0 + math.cos(phi))
    if t >= -_EPS:
        v = _m(phi - t)
        if v >= -_EPS:
            return abs(t) + abs(u) + abs(v)
    return None


def _lp_sp_rp(x: float, y: float, phi: float):
    u1, t1 = _polar(x + math.sin(phi), y - 1.0 - math.cos(phi))
    if u1 * u1 >= 4.0:
        u = math.sqrt(u1 * u1 - 4.0)
        theta = math.atan2(2.0, u)
        t = _m(t1 + theta)
        v = _m(t - phi)
        if t >= -_EPS and v >= -_EPS:
            return abs(t) + abs(u) + abs(v)
    return None


def _lp_rm_l(x: float, y: float, phi: float):
    xi = x - math.sin(phi)
    eta = y - 1.0 + math.cos(phi)
    u1, theta = _polar(xi, eta)
    if u1 <= 4.0:
        u = -2.0 * math.asin(0.25 * u1)
        t = _m(theta + 0.5 * u + math.pi)
        v = _m(phi - t + u)
        if t >= -_EPS and u <= _EPS:
            return abs(t) + abs(u) + abs(v)
    return None


_BASE = (_lp_sp_lp, _lp_sp_rp, _lp_rm_l)


def _family_min(x: float, y: float, phi: float) -> float:
    best = math.inf
    # timeflip: (-x, y, -phi); reflect: (x, -y, -phi); both: (-x, -y, phi)
    queries = ((x, y, phi), (-x, y, -phi), (x, -y, -phi), (-x, -y, phi))
    for fn in _BASE:
        for qx, qy, qphi in queries:
            val = fn(qx, qy, qphi)
            if val is not None and val < best:
                best = val
    # backwards traversal of the C|CC family gives CC|C
    xb = x * math.cos(phi) + y * math.sin(phi)
    yb = x * math.sin(phi) - y * math.cos(phi)
    for qx, qy, qphi in ((xb, yb, phi), (-xb, yb, -phi),
                         (xb, -yb, -phi), (-xb, -yb, phi)):
        val = _lp_rm_l(qx, qy, qphi)
        if val is not None and val < best:
            best = val
    return best


def rs_length(dx: float, dy: float, start_theta: float, goal_theta: float,
              radius: float) -> float:
    """Approximate reverse-capable shortest length between two poses."""
    c = math.cos(start_theta)
    s = math.sin(start_theta)
    x = (c * dx + s * dy) / radius
    y = (-s * dx + c * dy) / radius
    phi = _m(goal_theta - start_theta)
    return _family_min(x, y, phi) * radius


def _m_arr(a: np.ndarray) -> np.ndarray:
    return np.remainder(a + math.pi, 2.0 * math.pi) - math.pi


def _lp_sp_lp_arr(x, y, phi):
    ax = x - np.sin(phi)
    ay = y - 1.0 + np.cos(phi)
    u = np.hypot(ax, ay)
    t = np.arctan2(ay, ax)
    v = _m_arr(phi - t)
    ok = (t >= -_EPS) & (v >= -_EPS)
    return np.where(ok, np.abs(t) + u + np.abs(v), np.inf)


def _lp_sp_rp_arr(x, y, phi):
    ax = x + np.sin(phi)
    ay = y - 1.0 - np.cos(phi)
    u1 = np.hypot(ax, ay)
    t1 = np.arctan2(ay, ax)
    ok = u1 * u1 >= 4.0
    u = np.sqrt(np.maximum(u1 * u1 - 4.0, 0.0))
    t = _m_arr(t1 + np.arctan2(2.0, u))
    v = _m_arr(t - phi)
    ok &= (t >= -_EPS) & (v >= -_EPS)
    return np.where(ok, np.abs(t) + u + np.abs(v), np.inf)


def _lp_rm_l_arr(x, y, phi):
    xi = x - np.sin(phi)
    eta = y - 1.0 + np.cos(phi)
    u1 = np.hypot(xi, eta)
    theta = np.arctan2(eta, xi)
    ok = u1 <= 4.0
    u = -2.0 * np.arcsin(np.clip(0.25 * u1, -1.0, 1.0))
    t = _m_arr(theta + 0.5 * u + math.pi)
    v = _m_arr(phi - t + u)
    ok &= (t >= -_EPS) & (u <= _EPS)
    return np.where(ok, np.abs(t) + np.abs(u) + np.abs(v), np.inf)


def rs_lengths(starts: np.ndarray, goal_x: float, goal_y: float,
               goal_theta: float, radius: float) -> np.ndarray:
    """rs_length for a batch of start poses (N, 3) to a single goal pose."""
    dx = goal_x - starts[:, 0]
    dy = goal_y - starts[:, 1]
    th = starts[:, 2]
    c = np.cos(th)
    s = np.sin(th)
    x = (c * dx + s * dy) / radius
    y = (-s * dx + c * dy) / radius
    phi = _m_arr(goal_theta - th)
    # stack the timeflip/reflect/both transforms so each family runs once
    xs = np.concatenate([x, -x, x, -x])
    ys = np.concatenate([y, y, -y, -y])
    ps = np.concatenate([phi, -phi, -phi, phi])
    best = _lp_sp_lp_arr(xs, ys, ps).reshape(4, -1).min(axis=0)
    np.minimum(best, _lp_sp_rp_arr(xs, ys, ps).reshape(4, -1).min(axis=0), out=best)
    cph = np.cos(phi)
    sph = np.sin(phi)
    xb = x * cph + y * sph
    yb = x * sph - y * cph
    xs = np.concatenate([xs, xb, -xb, xb, -xb])
    ys = np.concatenate([ys, yb, yb, -yb, -yb])
    ps = np.concatenate([ps, phi, -phi, -phi, phi])
    np.minimum(best, _lp_rm_l_arr(xs, ys, ps).reshape(8, -1).min(axis=0), out=best)
    return best * radius
