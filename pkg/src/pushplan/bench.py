"""Scenario documents, perturbation suites, and benchmark aggregation.

Scenarios are JSON with explicit units (meters, radians) and a schema
version, so fixtures diff cleanly and round-trip losslessly. Suites come
from two generators: uniform perturbation of a base scenario within fixed
bounds, and seeded rejection sampling of dense random instances. The
benchmark runner plans every (instance, method) pair, validates each plan
by independent replay before counting it a success, and aggregates per
method.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .geom import (
    Polygon2D,
    Pose2D,
    Workspace,
    footprint_at,
    inside_workspace,
    separation_gap,
    wrap_angle,
)
from .push_model import RobotParams, square_shape
from .sequencer import METHODS, plan, plan_violations

SCHEMA_VERSION = 1
UNITS = {"length": "m", "angle": "rad"}

# perturbation protocol bounds
POS_RANGE = 0.05
ANG_RANGE = 0.1

MAX_RESAMPLES = 1000


class ScenarioError(ValueError):
    """Malformed or invariant-violating scenario document."""


@dataclass(frozen=True)
class ScenarioObject:
    object_id: str
    shape: Polygon2D
    start: Pose2D
    goal: Pose2D
    symmetry: int = 1


@dataclass(frozen=True)
class Scenario:
    workspace: Workspace
    params: RobotParams
    robot_pose: Pose2D
    objects: tuple
    name: str = ""


def scenario_violations(sc: Scenario) -> list[str]:
    """Invariant violations: footprints out of bounds or not pairwise disjoint."""
    out = []
    for config in ("start", "goal"):
        fps = [(o.object_id, footprint_at(o.shape, getattr(o, config)))
               for o in sc.objects]
        for oid, fp in fps:
            if not inside_workspace(fp, sc.workspace):
                out.append(f"{config} footprint of {oid} leaves the workspace")
        for i, (oid_a, fa) in enumerate(fps):
            for oid_b, fb in fps[i + 1:]:
                if separation_gap(fa, fb) <= 0.0:
                    out.append(f"{config} footprints of {oid_a} and {oid_b} overlap")
    return out


def _check(cond: bool, msg: str):
    if not cond:
        raise ScenarioError(msg)


def _pose_from(v, what: str) -> Pose2D:
    _check(isinstance(v, (list, tuple)) and len(v) == 3, f"{what} must be [x, y, theta]")
    return Pose2D(float(v[0]), float(v[1]), float(v[2]))


def scenario_from_dict(doc: dict) -> Scenario:
    _check(isinstance(doc, dict), "scenario document must be a JSON object")
    _check(doc.get("schema_version") == SCHEMA_VERSION,
           f"unsupported schema_version {doc.get('schema_version')!r}")
    _check(doc.get("units") == UNITS, f"units must be {UNITS}")
    for key in ("workspace", "robot", "objects"):
        _check(key in doc, f"missing {key!r} section")

    w = doc["workspace"]
    try:
        ws = Workspace(w["xmin"], w["ymin"], w["xmax"], w["ymax"],
                       grid_resolution=w.get("grid_resolution", 0.1))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad workspace: {exc}") from exc

    r = doc["robot"]
    try:
        params = RobotParams(
            rho_push=float(r.get("rho_push", 1.43)),
            rho_transit=float(r.get("rho_transit", 1.09)),
            bumper_offset=float(r.get("bumper_offset", 0.2)),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad robot parameters: {exc}") from exc
    robot_pose = _pose_from(r.get("pose"), "robot pose")

    objects = []
    seen = set()
    _check(isinstance(doc["objects"], list) and doc["objects"],
           "objects must be a nonempty list")
    for i, o in enumerate(doc["objects"]):
        _check(isinstance(o, dict), f"object #{i} must be an object")
        oid = o.get("id")
        _check(isinstance(oid, str) and oid, f"object #{i} needs a nonempty string id")
        _check(oid not in seen, f"duplicate object id {oid!r}")
        seen.add(oid)
        try:
            shape = Polygon2D(o["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"bad shape for {oid}: {exc}") from exc
        sym = o.get("symmetry", 1)
        _check(isinstance(sym, int) and sym >= 1, f"symmetry of {oid} must be a positive int")
        objects.append(ScenarioObject(oid, shape,
                                      _pose_from(o.get("start"), f"start of {oid}"),
                                      _pose_from(o.get("goal"), f"goal of {oid}"),
                                      sym))
    sc = Scenario(ws, params, robot_pose, tuple(objects), name=doc.get("name", ""))
    problems = scenario_violations(sc)
    _check(not problems, "; ".join(problems))
    return sc


def scenario_to_dict(sc: Scenario) -> dict:
    ws = sc.workspace
    return {
        "schema_version": SCHEMA_VERSION,
        "units": dict(UNITS),
        "name": sc.name,
        "workspace": {"xmin": ws.xmin, "ymin": ws.ymin, "xmax": ws.xmax,
                      "ymax": ws.ymax, "grid_resolution": ws.grid_resolution},
        "robot": {"pose": list(sc.robot_pose.as_tuple()),
                  "rho_push": sc.params.rho_push,
                  "rho_transit": sc.params.rho_transit,
                  "bumper_offset": sc.params.bumper_offset},
        "objects": [{"id": o.object_id,
                     "shape": [[float(x), float(y)] for x, y in o.shape.vertices],
                     "start": list(o.start.as_tuple()),
                     "goal": list(o.goal.as_tuple()),
                     "symmetry": o.symmetry} for o in sc.objects],
    }


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(doc)


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def perturb(scenario: Scenario, count: int, seed: int,
            pos_range: float = POS_RANGE, ang_range: float = ANG_RANGE
            ) -> list[Scenario]:
    """Uniformly perturbed copies of a scenario, deterministic given seed.

    Every object start and goal moves independently within +-pos_range per
    axis and +-ang_range in heading; the robot pose stays fixed. Instances
    that break footprint disjointness or leave the workspace are resampled
    whole; MAX_RESAMPLES consecutive failures abort.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    out: list[Scenario] = []
    failures = 0

    def jitter(p: Pose2D) -> Pose2D:
        dx, dy = rng.uniform(-pos_range, pos_range, 2)
        dth = rng.uniform(-ang_range, ang_range)
        return Pose2D(p.x + dx, p.y + dy, wrap_angle(p.theta + dth))

    while len(out) < count:
        objs = tuple(replace(o, start=jitter(o.start), goal=jitter(o.goal))
                     for o in scenario.objects)
        cand = replace(scenario, objects=objs,
                       name=f"{scenario.name or 'scenario'}#p{len(out)}")
        if scenario_violations(cand):
            failures += 1
            if failures >= MAX_RESAMPLES:
                raise ScenarioError(
                    f"gave up after {MAX_RESAMPLES} consecutive resamples; "
                    "scenario too dense for the perturbation range")
            continue
        failures = 0
        out.append(cand)
    return out


def generate_scenario(m: int, seed: int, ws: Optional[Workspace] = None,
                      side: float = 0.15, clearance: float = 0.05,
                      symmetry: int = 4, margin: float = 0.7,
                      name: str = "") -> Scenario:
    """Random m-object instance by seeded rejection sampling.

    Square objects get uniform poses with at least `clearance` between any
    two footprints of the same configuration and `margin` from the walls;
    starts also keep clear of the robot's initial body footprint. Start and
    goal layouts are sampled independently, so transfers cross each other
    and instances are frequently nonmonotone.

    The default margin keeps every pushing pose approachable: a pose sits
    about 0.35 m behind the pushed face, and a pose wedged between an
    object and a wall has no admissible approach at the transit radius, so
    objects hugging walls make instances unsolvable regardless of method.
    """
    if m <= 0:
        raise ValueError("m must be positive")
    ws = ws if ws is not None else Workspace(0.0, 0.0, 4.0, 5.2)
    params = RobotParams()
    shape = square_shape(side)
    robot_pose = Pose2D(ws.xmin + 0.4, ws.ymin + 0.4, 0.0)
    body = footprint_at(params.body_footprint, robot_pose)
    rng = np.random.default_rng(seed)

    def sample_layout(keep_off: list[Polygon2D]) -> list[Pose2D]:
        poses: list[Pose2D] = []
        placed: list[Polygon2D] = []
        for _ in range(m):
            for _ in range(MAX_RESAMPLES):
                p = Pose2D(rng.uniform(ws.xmin + margin, ws.xmax - margin),
                           rng.uniform(ws.ymin + margin, ws.ymax - margin),
                           rng.uniform(-math.pi, math.pi))
                fp = footprint_at(shape, p)
                if not inside_workspace(fp, ws):
                    continue
                if any(separation_gap(fp, o) < clearance for o in placed + keep_off):
                    continue
                poses.append(p)
                placed.append(fp)
                break
            else:
                raise ScenarioError(
                    f"could not place {m} objects with clearance {clearance}")
        return poses

    starts = sample_layout([body])
    goals = sample_layout([])
    objects = tuple(ScenarioObject(f"o{i}", shape, starts[i], goals[i], symmetry)
                    for i in range(m))
    sc = Scenario(ws, params, robot_pose, objects,
                  name=name or f"random-m{m}-s{seed}")
    problems = scenario_violations(sc)
    if problems:
        raise ScenarioError("; ".join(problems))
    return sc


@dataclass(frozen=True)
class BenchRecord:
    scenario: str
    method: str
    success: bool
    planning_time: float
    pushing_length: Optional[float]
    total_length: Optional[float]
    failure_reason: Optional[str]  # timeout | no_solution | invalid_plan
    candidates_tried: int

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "method": self.method,
                "success": self.success, "planning_time": self.planning_time,
                "pushing_length": self.pushing_length,
                "total_length": self.total_length,
                "failure_reason": self.failure_reason,
                "candidates_tried": self.candidates_tried}

    @classmethod
    def from_dict(cls, d: dict) -> "BenchRecord":
        return cls(d["scenario"], d["method"], d["success"], d["planning_time"],
                   d["pushing_length"], d["total_length"], d["failure_reason"],
                   d["candidates_tried"])


@dataclass(frozen=True)
class BenchReport:
    records: tuple

    def methods(self) -> list[str]:
        seen = []
        for r in self.records:
            if r.method not in seen:
                seen.append(r.method)
        return seen

    def aggregates(self) -> dict:
        out = {}
        for method in self.methods():
            recs = [r for r in self.records if r.method == method]
            wins = [r for r in recs if r.success]
            push = [r.pushing_length for r in wins]
            total = [r.total_length for r in wins]
            out[method] = {
                "instances": len(recs),
                "successes": len(wins),
                "success_rate": len(wins) / len(recs) if recs else 0.0,
                "mean_pushing": float(np.mean(push)) if push else None,
                "median_pushing": float(np.median(push)) if push else None,
                "mean_total": float(np.mean(total)) if total else None,
                "mean_time": float(np.mean([r.planning_time for r in recs])),
            }
        return out

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION,
                "records": [r.to_dict() for r in self.records],
                "aggregates": self.aggregates()}

    @classmethod
    def from_dict(cls, d: dict) -> "BenchReport":
        return cls(tuple(BenchRecord.from_dict(r) for r in d["records"]))

    def summary(self) -> str:
        lines = [f"{'method':<10} {'solved':>9} {'rate':>6} {'push':>8} "
                 f"{'total':>8} {'time':>7}"]
        for method, agg in self.aggregates().items():
            push = f"{agg['mean_pushing']:.3f}" if agg["mean_pushing"] is not None else "-"
            total = f"{agg['mean_total']:.3f}" if agg["mean_total"] is not None else "-"
            lines.append(
                f"{method:<10} {agg['successes']:>4}/{agg['instances']:<4} "
                f"{agg['success_rate']:>6.2f} {push:>8} {total:>8} "
                f"{agg['mean_time']:>6.1f}s")
        return "\n".join(lines)


def run_benchmark(suite: list[Scenario], methods=METHODS,
                  time_limit: Optional[float] = 1200.0,
                  work_limit: Optional[int] = None,
                  progress=None) -> BenchReport:
    """Plan every (instance, method) pair and aggregate.

    A run counts as a success only if the emitted plan also passes the
    independent replay check; validation failures are recorded as
    invalid_plan, never raised. progress, when given, receives each
    BenchRecord as it is produced.
    """
    if not suite:
        raise ValueError("suite must be nonempty")
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}")
    records = []
    for sc in suite:
        for method in methods:
            t0 = time.monotonic()
            outcome = plan(sc, method=method, time_limit=time_limit,
                           work_limit=work_limit)
            elapsed = time.monotonic() - t0
            if outcome.ok:
                bad = plan_violations(outcome.plan, sc)
                if bad:
                    rec = BenchRecord(sc.name, method, False, elapsed, None, None,
                                      "invalid_plan", outcome.candidates_tried)
                else:
                    rec = BenchRecord(sc.name, method, True, elapsed,
                                      outcome.plan.pushing_length,
                                      outcome.plan.total_length,
                                      None, outcome.candidates_tried)
            else:
                rec = BenchRecord(sc.name, method, False, elapsed, None, None,
                                  outcome.status, outcome.candidates_tried)
            records.append(rec)
            if progress is not None:
                progress(rec)
    return BenchReport(tuple(records))
