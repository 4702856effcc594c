"""Scenario files and the generated desk-scale benchmark suite.

Scenario files are YAML with top-level keys ``name``, ``workspace``, ``robot``,
``start``, ``goal`` (optionally ``start_velocity``, ``goal_velocity``),
``planner`` and ``suite``. See ``docs/scenario_schema.md``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .environment import Box, Circle, SignedDistanceField, Workspace, build_sdf
from .errors import InvalidArgumentError, ScenarioError
from .kinematics import BodySphere, RobotModel, sphere_centers
from .solver import SolverConfig

PLANNER_DEFAULTS = {
    "eps": 0.2,
    "sigma_obs": 0.001,
    "N": 11,
    "n_ip": 4,
    "total_time": 1.0,
    "qc": 1.0,
    "mid_prior": True,
    "max_iterations": 100,
    "tolerance": 1e-6,
    "gn_max_inner": 20,
    "damping_init": 1e-4,
}
POSITIVE_KEYS = ("sigma_obs", "N", "total_time", "max_iterations", "tolerance",
                 "gn_max_inner", "damping_init")


@dataclass(frozen=True)
class SuiteSpec:
    count: int = 24
    seed: int = 0
    obstacles: tuple = (3, 6)


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    workspace: Workspace
    robot: RobotModel
    start: np.ndarray
    goal: np.ndarray
    start_velocity: Optional[np.ndarray] = None
    goal_velocity: Optional[np.ndarray] = None
    eps: float = 0.2
    sigma_obs: float = 0.001
    num_states: int = 11
    n_ip: int = 4
    total_time: float = 1.0
    qc: np.ndarray = field(default_factory=lambda: np.eye(2))
    mid_prior: bool = True
    cell_size: float = 0.01
    solver_options: dict = field(default_factory=dict)
    suite: Optional[SuiteSpec] = None

    @cached_property
    def sdf(self) -> SignedDistanceField:
        return build_sdf(self.workspace, self.cell_size)

    def solver_config(self, **overrides) -> SolverConfig:
        opts = dict(
            eps=self.eps,
            sigma_obs=self.sigma_obs,
            num_states=self.num_states,
            n_ip=self.n_ip,
            total_time=self.total_time,
        )
        opts.update(self.solver_options)
        opts.update(overrides)
        return SolverConfig(**opts)

    def clearance(self, q) -> float:
        centers = sphere_centers(self.robot, np.asarray(q, dtype=float))
        if not np.all(self.workspace.contains(centers)):
            return -math.inf
        return float(np.min(self.workspace.signed_distance(centers) - self.robot.radii))

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "workspace": {
                "bounds": [list(map(float, b)) for b in self.workspace.bounds],
                "cell_size": self.cell_size,
                "obstacles": [_obstacle_to_dict(o) for o in self.workspace.obstacles],
            },
            "robot": _robot_to_dict(self.robot),
            "start": [float(v) for v in self.start],
            "goal": [float(v) for v in self.goal],
        }
        if self.start_velocity is not None:
            out["start_velocity"] = [float(v) for v in self.start_velocity]
        if self.goal_velocity is not None:
            out["goal_velocity"] = [float(v) for v in self.goal_velocity]
        qc = self.qc
        planner = {
            "eps": self.eps,
            "sigma_obs": self.sigma_obs,
            "N": self.num_states,
            "n_ip": self.n_ip,
            "total_time": self.total_time,
            "qc": float(qc[0, 0]) if np.allclose(qc, qc[0, 0] * np.eye(len(qc))) else qc.tolist(),
            "mid_prior": self.mid_prior,
        }
        planner.update(self.solver_options)
        out["planner"] = planner
        if self.suite is not None:
            out["suite"] = {
                "count": self.suite.count,
                "seed": self.suite.seed,
                "obstacles": list(self.suite.obstacles),
            }
        return out

    def save(self, path):
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))


def _obstacle_to_dict(ob):
    if isinstance(ob, Circle):
        return {"type": "circle", "center": [float(c) for c in ob.center], "radius": float(ob.radius)}
    return {"type": "box", "min": [float(c) for c in ob.lo], "max": [float(c) for c in ob.hi]}


def _robot_to_dict(robot: RobotModel):
    if robot.kind == "point":
        return {"kind": "point", "radius": robot.body_spheres[0].radius, "base": list(robot.base_pose[:2])}
    return {
        "kind": "planar_arm",
        "link_lengths": list(robot.link_lengths),
        "base": list(robot.base_pose),
        "spheres": [{"link": s.link, "offset": s.offset, "radius": s.radius} for s in robot.body_spheres],
    }


# ----------------------------------------------------------------- parsing


def _vector(raw, name, length=None):
    try:
        v = np.asarray(raw, dtype=float).ravel()
    except (TypeError, ValueError):
        raise ScenarioError("expected a list of numbers", field=name) from None
    if length is not None and v.size != length:
        raise ScenarioError(f"expected {length} values, got {v.size}", field=name)
    if not np.all(np.isfinite(v)):
        raise ScenarioError("values must be finite", field=name)
    return v


def _require(mapping, key, where):
    if not isinstance(mapping, dict):
        raise ScenarioError("expected a mapping", field=where)
    if key not in mapping:
        raise ScenarioError("missing required key", field=f"{where}.{key}" if where else key)
    return mapping[key]


def _parse_obstacle(raw, where):
    kind = _require(raw, "type", where)
    try:
        if kind == "circle":
            return Circle(tuple(_vector(_require(raw, "center", where), f"{where}.center", 2)),
                          float(_require(raw, "radius", where)))
        if kind == "box":
            return Box(tuple(_vector(_require(raw, "min", where), f"{where}.min", 2)),
                       tuple(_vector(_require(raw, "max", where), f"{where}.max", 2)))
    except InvalidArgumentError as exc:
        raise ScenarioError(str(exc), field=where) from None
    raise ScenarioError(f"unknown obstacle type {kind!r}", field=f"{where}.type")


def _parse_robot(raw):
    kind = _require(raw, "kind", "robot")
    try:
        if kind == "point":
            base = _vector(raw.get("base", [0.0, 0.0]), "robot.base", 2)
            return RobotModel.point(float(_require(raw, "radius", "robot")), tuple(base))
        if kind == "planar_arm":
            lengths = _vector(_require(raw, "link_lengths", "robot"), "robot.link_lengths")
            base = _vector(raw.get("base", [0.0, 0.0, 0.0]), "robot.base", 3)
            spheres = []
            for k, s in enumerate(_require(raw, "spheres", "robot")):
                where = f"robot.spheres[{k}]"
                spheres.append(BodySphere(int(_require(s, "link", where)),
                                          float(_require(s, "offset", where)),
                                          float(_require(s, "radius", where))))
            return RobotModel("planar_arm", tuple(spheres), tuple(lengths), tuple(base))
    except InvalidArgumentError as exc:
        raise ScenarioError(str(exc), field="robot") from None
    raise ScenarioError(f"unknown robot kind {kind!r}", field="robot.kind")


def scenario_from_dict(data: dict, default_name: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("top level must be a mapping")
    unknown = set(data) - {"name", "workspace", "robot", "start", "goal", "start_velocity",
                           "goal_velocity", "planner", "suite"}
    if unknown:
        raise ScenarioError("unknown top-level key", field=sorted(unknown)[0])
    ws_raw = _require(data, "workspace", "")
    bounds_raw = _require(ws_raw, "bounds", "workspace")
    try:
        lo = _vector(bounds_raw[0], "workspace.bounds[0]", 2)
        hi = _vector(bounds_raw[1], "workspace.bounds[1]", 2)
    except (TypeError, IndexError, KeyError):
        raise ScenarioError("expected [[xmin, ymin], [xmax, ymax]]", field="workspace.bounds") from None
    obstacles = [_parse_obstacle(o, f"workspace.obstacles[{k}]")
                 for k, o in enumerate(ws_raw.get("obstacles") or [])]
    try:
        workspace = Workspace((tuple(lo), tuple(hi)), tuple(obstacles))
    except InvalidArgumentError as exc:
        raise ScenarioError(str(exc), field="workspace.bounds") from None
    cell_size = float(ws_raw.get("cell_size", 0.01))
    if not cell_size > 0:
        raise ScenarioError("must be positive", field="workspace.cell_size")

    robot = _parse_robot(_require(data, "robot", ""))
    d = robot.d_cfg
    start = _vector(_require(data, "start", ""), "start", d)
    goal = _vector(_require(data, "goal", ""), "goal", d)
    v0 = _vector(data["start_velocity"], "start_velocity", d) if "start_velocity" in data else None
    v1 = _vector(data["goal_velocity"], "goal_velocity", d) if "goal_velocity" in data else None

    planner = dict(PLANNER_DEFAULTS)
    raw_planner = data.get("planner") or {}
    if not isinstance(raw_planner, dict):
        raise ScenarioError("expected a mapping", field="planner")
    for key, value in raw_planner.items():
        if key not in PLANNER_DEFAULTS:
            raise ScenarioError("unknown planner option", field=f"planner.{key}")
        planner[key] = value
    for key in POSITIVE_KEYS:
        if not _is_number(planner[key]) or not planner[key] > 0:
            raise ScenarioError(f"must be positive, got {planner[key]!r}", field=f"planner.{key}")
    for key in ("eps", "n_ip"):
        if not _is_number(planner[key]) or planner[key] < 0:
            raise ScenarioError(f"must be non-negative, got {planner[key]!r}", field=f"planner.{key}")
    for key in ("N", "n_ip", "max_iterations", "gn_max_inner"):
        if float(planner[key]) != int(planner[key]):
            raise ScenarioError(f"must be an integer, got {planner[key]!r}", field=f"planner.{key}")
    if int(planner["N"]) < 2:
        raise ScenarioError("need at least 2 support states", field="planner.N")
    qc_raw = planner["qc"]
    qc = qc_raw * np.eye(d) if _is_number(qc_raw) else np.asarray(qc_raw, dtype=float)
    if qc.shape != (d, d) or not np.allclose(qc, qc.T) or np.min(np.linalg.eigvalsh(qc)) <= 0:
        raise ScenarioError("must be a positive scalar or a symmetric positive definite matrix",
                            field="planner.qc")

    suite = None
    if data.get("suite") is not None:
        s = data["suite"]
        try:
            suite = SuiteSpec(int(s.get("count", 24)), int(s.get("seed", 0)),
                              tuple(int(v) for v in s.get("obstacles", (3, 6))))
        except (AttributeError, TypeError, ValueError):
            raise ScenarioError("expected count, seed and obstacles range", field="suite") from None

    options = {k: planner[k] for k in ("max_iterations", "tolerance", "gn_max_inner", "damping_init")}
    options["max_iterations"] = int(options["max_iterations"])
    options["gn_max_inner"] = int(options["gn_max_inner"])
    scenario = Scenario(
        name=str(data.get("name", default_name)),
        workspace=workspace,
        robot=robot,
        start=start,
        goal=goal,
        start_velocity=v0,
        goal_velocity=v1,
        eps=float(planner["eps"]),
        sigma_obs=float(planner["sigma_obs"]),
        num_states=int(planner["N"]),
        n_ip=int(planner["n_ip"]),
        total_time=float(planner["total_time"]),
        qc=qc,
        mid_prior=bool(planner["mid_prior"]),
        cell_size=cell_size,
        solver_options=options,
        suite=suite,
    )
    for label, q in (("start", start), ("goal", goal)):
        if not scenario.clearance(q) > 0:
            raise ScenarioError("configuration is in collision or outside the workspace", field=label)
    return scenario


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError(f"{path}: {getattr(exc, 'problem', None) or exc}", line=line) from None
    return scenario_from_dict(data, default_name=path.stem)


# ------------------------------------------------------------ suite generation


def generate_suite(count: int = 24, seed: int = 0, obstacles=(3, 6), **planner) -> list:
    """Desk-scale cluttered scenarios for a 2D point robot.

    Each scenario puts the start inside a three-walled pocket, 1-5 cm from
    one of its walls, with the opening on the goal side.
    Random discs clutter the space between the pocket and the goal. The
    workspace bounds leave a margin around the obstacle area so the distance
    grid covers any detour.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        scenario = _random_scenario(rng, len(out), obstacles, planner)
        if scenario is not None:
            out.append(scenario)
    return out


SUITE_PLANNER = {"eps": 0.05, "sigma_obs": 0.001, "N": 11, "n_ip": 4, "total_time": 1.0}
SUITE_BOUNDS = ((-0.5, -0.5), (2.5, 2.5))


def _random_scenario(rng, index, obstacle_range, planner):
    radius = 0.03
    wall = 0.08
    width = rng.uniform(0.36, 0.5)
    height = rng.uniform(0.36, 0.5)
    cx, cy = rng.uniform(0.45, 0.6), rng.uniform(0.7, 1.3)
    x0, x1 = cx - width / 2, cx + width / 2
    y0, y1 = cy - height / 2, cy + height / 2
    opening = "right"
    walls = {
        "left": Box((x0 - wall, y0 - wall), (x0, y1 + wall)),
        "right": Box((x1, y0 - wall), (x1 + wall, y1 + wall)),
        "down": Box((x0 - wall, y0 - wall), (x1 + wall, y0)),
        "up": Box((x0 - wall, y1), (x1 + wall, y1 + wall)),
    }
    pocket = [b for side, b in walls.items() if side != opening]
    goal = np.array([rng.uniform(1.55, 1.8), rng.uniform(0.4, 1.6)])

    # start hugging one of the closed walls from inside
    target = rng.uniform(0.01 + radius, 0.05 + radius)
    closed = [s for s in ("left", "right", "down", "up") if s != opening]
    side = closed[rng.integers(len(closed))]
    along = rng.uniform(0.25, 0.75)
    if side == "left":
        start = np.array([x0 + target, y0 + along * height])
    elif side == "right":
        start = np.array([x1 - target, y0 + along * height])
    elif side == "down":
        start = np.array([x0 + along * width, y0 + target])
    else:
        start = np.array([x0 + along * width, y1 - target])

    discs = []
    n_obs = int(rng.integers(obstacle_range[0], obstacle_range[1] + 1))
    tries = 0
    while len(discs) < n_obs and tries < 200:
        tries += 1
        c = np.array([rng.uniform(x1 + 0.2, 1.85), rng.uniform(0.15, 1.85)])
        r = rng.uniform(0.04, 0.12)
        if np.linalg.norm(c - goal) < r + radius + 0.08:
            continue
        if any(np.linalg.norm(c - np.asarray(o.center)) < r + o.radius + 0.1 for o in discs):
            continue
        discs.append(Circle(tuple(c), r))

    opts = dict(SUITE_PLANNER)
    opts.update(planner)
    data = {
        "name": f"desk_{index:02d}",
        "workspace": {
            "bounds": [list(SUITE_BOUNDS[0]), list(SUITE_BOUNDS[1])],
            "cell_size": 0.01,
            "obstacles": [_obstacle_to_dict(o) for o in pocket + discs],
        },
        "robot": {"kind": "point", "radius": radius},
        "start": start.tolist(),
        "goal": goal.tolist(),
        "start_velocity": [0.0, 0.0],
        "goal_velocity": [0.0, 0.0],
        "planner": opts,
    }
    try:
        return scenario_from_dict(data)
    except ScenarioError:
        return None


def write_suite(scenarios, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for s in scenarios:
        p = out_dir / f"{s.name}.yaml"
        s.save(p)
        paths.append(p)
    return paths


def load_suite(path, seed=None, count=None) -> list:
    """A directory of scenario files, or one file (expanded if it carries a ``suite`` block)."""
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.yaml")) + sorted(path.glob("*.yml"))
        if not files:
            raise ScenarioError(f"no scenario files in {path}")
        return [load_scenario(f) for f in files]
    scenario = load_scenario(path)
    if scenario.suite is None and seed is None:
        return [scenario]
    spec = scenario.suite or SuiteSpec()
    return generate_suite(
        count if count is not None else spec.count,
        seed if seed is not None else spec.seed,
        spec.obstacles,
    )
