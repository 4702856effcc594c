"""Benchmark runner, result export and report formatting."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .gp_prior import Trajectory, upsample as upsample_trajectory
from .solver import PLANNERS, PlanResult, run_planner

TIMING_KEYS = ("wall_time", "avg_time", "max_time")


@dataclass
class Outcome:
    """One scenario x planner cell of a benchmark."""

    scenario: str
    planner: str
    converged: bool
    collision_free: bool
    iterations: int
    wall_time: float
    min_clearance: float
    trajectory_sha256: str = ""
    error: str = ""

    @property
    def success(self) -> bool:
        return self.converged and self.collision_free and not self.error


@dataclass
class PlannerRow:
    planner: str
    runs: int
    successes: int
    success_pct: float
    avg_time: float
    max_time: float


@dataclass
class BenchmarkReport:
    rows: List[PlannerRow]
    outcomes: List[Outcome] = field(default_factory=list)
    seed: Optional[int] = None

    def row(self, planner: str) -> PlannerRow:
        for r in self.rows:
            if r.planner == planner:
                return r
        raise KeyError(planner)

    def to_dict(self, timings: bool = True) -> dict:
        rows = [asdict(r) for r in self.rows]
        outcomes = []
        for o in self.outcomes:
            d = asdict(o)
            d["success"] = o.success
            d["min_clearance"] = _json_float(o.min_clearance)
            outcomes.append(d)
        if not timings:
            for d in rows + outcomes:
                for k in TIMING_KEYS:
                    d.pop(k, None)
        return {"seed": self.seed, "rows": rows, "outcomes": outcomes}

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True)

    def digest(self) -> str:
        """SHA-256 of the report with every timing field removed."""
        return hashlib.sha256(self.to_json(timings=False).encode()).hexdigest()

    def rows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["planner", "runs", "successes", "success_pct", "avg_time", "max_time"])
        for r in self.rows:
            w.writerow([r.planner, r.runs, r.successes, repr(r.success_pct), repr(r.avg_time), repr(r.max_time)])
        return buf.getvalue()

    def outcomes_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scenario", "planner", "success", "converged", "collision_free", "iterations",
                    "wall_time", "min_clearance", "error"])
        for o in self.outcomes:
            w.writerow([o.scenario, o.planner, o.success, o.converged, o.collision_free, o.iterations,
                        repr(o.wall_time), repr(o.min_clearance), o.error])
        return buf.getvalue()

    def table(self) -> str:
        """Plain-text table: success %, average and max plan time per planner."""
        lines = [f"{'planner':<16}{'success (%)':>12}{'avg time (s)':>14}{'max time (s)':>14}{'runs':>6}"]
        for r in self.rows:
            lines.append(
                f"{r.planner:<16}{r.success_pct:>12.1f}{r.avg_time:>14.4f}{r.max_time:>14.4f}{r.runs:>6}"
            )
        return "\n".join(lines)


def _json_float(v: float):
    # JSON has no infinities; an out-of-bounds clearance is reported as a string
    return v if np.isfinite(v) else repr(float(v))


def trajectory_sha256(traj: Trajectory) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(traj.times).tobytes())
    h.update(np.ascontiguousarray(traj.states).tobytes())
    return h.hexdigest()


def _run_cell(args):
    scenario, planner = args
    try:
        scenario.sdf
        result = run_planner(planner, scenario)
    except Exception as exc:  # recorded as a failed run, never fatal to the suite
        return Outcome(scenario.name, planner, False, False, 0, 0.0, -np.inf, "", f"{type(exc).__name__}: {exc}")
    return Outcome(
        scenario=scenario.name,
        planner=planner,
        converged=result.converged,
        collision_free=result.collision_free,
        iterations=result.iterations,
        wall_time=result.wall_time,
        min_clearance=result.min_clearance,
        trajectory_sha256=trajectory_sha256(result.trajectory),
    )


def run_benchmark(suite: Sequence, planners: Sequence[str] = PLANNERS, jobs: int = 1,
                  seed: Optional[int] = None) -> BenchmarkReport:
    """Run every planner on every scenario and aggregate success and timing per planner.

    A run succeeds when it converged and its trajectory is collision-free.
    Cells may run in ``jobs`` worker processes; results are collected in
    suite order so the report does not depend on scheduling.
    """
    suite = list(suite)
    planners = list(planners)
    if not suite:
        raise InvalidArgumentError("benchmark needs at least one scenario")
    if not planners:
        raise InvalidArgumentError("benchmark needs at least one planner")
    unknown = [p for p in planners if p not in PLANNERS]
    if unknown:
        raise InvalidArgumentError(f"unknown planner(s) {', '.join(unknown)}; choose from {', '.join(PLANNERS)}")
    if jobs < 1:
        raise InvalidArgumentError(f"jobs must be >= 1, got {jobs}")

    cells = [(s, p) for s in suite for p in planners]
    if jobs == 1:
        outcomes = [_run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_cell, cells))

    rows = []
    for p in planners:
        mine = [o for o in outcomes if o.planner == p]
        times = [o.wall_time for o in mine]
        wins = sum(o.success for o in mine)
        rows.append(PlannerRow(
            planner=p,
            runs=len(mine),
            successes=wins,
            success_pct=100.0 * wins / len(mine),
            avg_time=float(np.mean(times)),
            max_time=float(np.max(times)),
        ))
    return BenchmarkReport(rows, outcomes, seed)


def write_report(report: BenchmarkReport, out_dir) -> dict:
    """``report.txt``, ``report.json``, ``report.csv`` and ``outcomes.csv`` under ``out_dir``."""
    out_dir = Path(out_dir)
    paths = {
        "text": out_dir / "report.txt",
        "json": out_dir / "report.json",
        "csv": out_dir / "report.csv",
        "outcomes": out_dir / "outcomes.csv",
    }
    _write(paths["text"], report.table() + "\n")
    _write(paths["json"], report.to_json() + "\n")
    _write(paths["csv"], report.rows_csv())
    _write(paths["outcomes"], report.outcomes_csv())
    return paths


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


# ---------------------------------------------------------------- trajectories


def trajectory_rows(traj: Trajectory) -> str:
    d = traj.d_cfg
    header = ["index", "time"] + [f"pos_{k}" for k in range(d)] + [f"vel_{k}" for k in range(d)]
    lines = [",".join(header)]
    for i, (t, x) in enumerate(zip(traj.times, traj.states)):
        lines.append(",".join([str(i), repr(float(t))] + [repr(float(v)) for v in x]))
    return "\n".join(lines) + "\n"


def read_trajectory(path) -> Trajectory:
    """Inverse of the trajectory text written by ``export_result``."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["index", "time"]:
            raise InvalidArgumentError(f"{path}: not a trajectory file")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array([[float(v) for v in row[1:]] for row in rows])
    return Trajectory(data[:, 1:], data[:, 0])


def export_result(result: PlanResult, out_dir, stem: Optional[str] = None,
                  upsample: Optional[int] = None) -> dict:
    """Write trajectory text and a JSON summary for one plan.

    Files are ``<stem>_trajectory.csv`` and ``<stem>_summary.json``; with
    ``upsample=f`` also ``<stem>_trajectory_x<f>.csv`` holding ``N*f + 1``
    GP-interpolated rows. Floats are written with ``repr`` so reading them
    back is exact.
    """
    out_dir = Path(out_dir)
    stem = stem or result.planner
    paths = {"trajectory": out_dir / f"{stem}_trajectory.csv", "summary": out_dir / f"{stem}_summary.json"}
    _write(paths["trajectory"], trajectory_rows(result.trajectory))
    summary = result.summary()
    summary["min_clearance"] = _json_float(summary["min_clearance"])
    summary["check_points_per_interval"] = result.check_points_per_interval
    _write(paths["summary"], json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if upsample is not None:
        dense = upsample_trajectory(result.trajectory, int(upsample))
        paths["upsampled"] = out_dir / f"{stem}_trajectory_x{int(upsample)}.csv"
        _write(paths["upsampled"], trajectory_rows(dense))
    return paths

