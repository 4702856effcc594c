"""Static figures for plans and benchmark reports (written to files, Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle as CirclePatch, Rectangle  # noqa: E402

from .environment import Box, Circle  # noqa: E402
from .gp_prior import upsample  # noqa: E402
from .kinematics import joint_positions, sphere_centers  # noqa: E402


def _draw_workspace(ax, scenario, contours=True):
    (x0, y0), (x1, y1) = scenario.workspace.bounds
    if contours and scenario.workspace.obstacles:
        sdf = scenario.sdf
        ex = sdf.extent
        xs = np.linspace(ex[0], ex[2], sdf.cols)
        ys = np.linspace(ex[1], ex[3], sdf.rows)
        levels = np.linspace(0.0, max(0.3, 2 * scenario.eps), 7)
        ax.contour(xs, ys, sdf.values, levels=levels, colors="0.75", linewidths=0.5)
    for ob in scenario.workspace.obstacles:
        if isinstance(ob, Circle):
            ax.add_patch(CirclePatch(ob.center, ob.radius, color="0.35"))
        elif isinstance(ob, Box):
            w, h = ob.hi[0] - ob.lo[0], ob.hi[1] - ob.lo[1]
            ax.add_patch(Rectangle(ob.lo, w, h, color="0.35"))
    ax.set_xlim(x0, x1)
    ax.set_ylim(y0, y1)
    ax.set_aspect("equal")


def plot_plan(scenario, result, path, upsample_factor=5):
    """Obstacles, distance contours and the planned trajectory.

    Point robots show the path of the body centre with support states marked;
    arms show the link chain at each support state.
    """
    fig, ax = plt.subplots(figsize=(6, 6))
    _draw_workspace(ax, scenario)
    traj = result.trajectory
    if scenario.robot.kind == "point":
        dense = upsample(traj, upsample_factor)
        c = sphere_centers(scenario.robot, dense.positions)[:, 0]
        ax.plot(c[:, 0], c[:, 1], "-", color="tab:blue", lw=1.2)
        s = sphere_centers(scenario.robot, traj.positions)[:, 0]
        ax.plot(s[:, 0], s[:, 1], "o", color="tab:blue", ms=3)
        r = scenario.robot.radii[0]
        for p, colour in ((s[0], "tab:green"), (s[-1], "tab:red")):
            ax.add_patch(CirclePatch(p, r, fill=False, color=colour))
    else:
        cmap = plt.get_cmap("viridis")
        n = traj.num_states
        for i, q in enumerate(traj.positions):
            joints = joint_positions(scenario.robot, q)
            ax.plot(joints[:, 0], joints[:, 1], "-o", color=cmap(i / max(n - 1, 1)), lw=1.0, ms=2)
    status = "collision-free" if result.collision_free else "in collision"
    conv = "converged" if result.converged else "not converged"
    ax.set_title(f"{scenario.name}: {result.planner}, {conv}, {status}", fontsize=9)
    return _save(fig, path)


def plot_report(report, path):
    """Success rate and average/max plan time per planner."""
    names = [r.planner for r in report.rows]
    pos = np.arange(len(names))
    fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3.5))
    a.bar(pos, [r.success_pct for r in report.rows], color="tab:blue")
    a.set_ylim(0, 100)
    a.set_ylabel("success (%)")
    w = 0.38
    b.bar(pos - w / 2, [r.avg_time for r in report.rows], w, label="average")
    b.bar(pos + w / 2, [r.max_time for r in report.rows], w, label="max")
    b.set_ylabel("plan time (s)")
    b.legend(fontsize=8)
    for ax in (a, b):
        ax.set_xticks(pos)
        ax.set_xticklabels(names, rotation=20, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def _save(fig, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=110)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    finally:
        plt.close(fig)
    return path
