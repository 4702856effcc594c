"""Trajectory planners on the GP factor graph.

``ms2mp_plan`` runs min-sum message passing over the compound-node chain with
a local Gauss-Newton solve at every node. ``ms2mp_no_comp_plan`` passes one
message per raw factor instead, and ``batch_plan`` is the whole-graph damped
Gauss-Newton baseline.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
from scipy.linalg import solveh_banded

from .environment import Box, Circle
from .errors import InvalidArgumentError
from .factors import (
    CompoundGraph,
    assemble_graph,
    compound_transform,
)
from .gp_prior import GPPriorModel, Trajectory, interpolation_matrices
from .kinematics import sphere_centers
from .messages import (
    Belief,
    QuadraticMessage,
    belief_update,
    MAX_DAMPING,
    factor_to_variable_message,
    gauss_newton_local,
    linearized_potential,
    variable_to_factor_message,
)

PLANNERS = ("ms2mp", "ms2mp_no_comp", "batch", "batch_no_intp")


@dataclass(frozen=True)
class SolverConfig:
    """Planner settings. ``num_states`` counts support states (``N + 1``).

    ``schedule="converge"`` stops once the largest state change of a pass is
    within ``tolerance``; ``schedule="fixed"`` runs exactly ``num_states`` passes.
    """

    max_iterations: int = 100
    tolerance: float = 1e-6
    gn_max_inner: int = 20
    damping_init: float = 1e-4
    eps: float = 0.2
    sigma_obs: float = 0.001
    n_ip: int = 4
    num_states: int = 11
    total_time: float = 1.0
    schedule: str = "converge"
    check_density: int = 10

    def __post_init__(self):
        for name in ("max_iterations", "tolerance", "gn_max_inner", "damping_init",
                     "sigma_obs", "num_states", "total_time", "check_density"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive, got {getattr(self, name)}")
        if self.eps < 0:
            raise InvalidArgumentError(f"eps must be non-negative, got {self.eps}")
        if self.n_ip < 0:
            raise InvalidArgumentError(f"n_ip must be non-negative, got {self.n_ip}")
        if self.num_states < 2:
            raise InvalidArgumentError("num_states must be at least 2")
        if self.schedule not in ("converge", "fixed"):
            raise InvalidArgumentError(f"unknown schedule {self.schedule!r}")

    @property
    def n_intervals(self) -> int:
        return self.num_states - 1


@dataclass
class PlanResult:
    planner: str
    trajectory: Trajectory
    converged: bool
    iterations: int
    wall_time: float
    collision_free: bool
    min_clearance: float
    objective_history: List[float]
    diagnostics: Optional[dict] = None
    check_points_per_interval: int = 1

    @property
    def success(self) -> bool:
        return self.converged and self.collision_free

    def summary(self) -> dict:
        out = {
            "planner": self.planner,
            "converged": self.converged,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
            "collision_free": self.collision_free,
            "min_clearance": self.min_clearance,
            "objective_history": list(self.objective_history),
        }
        if self.diagnostics is not None:
            out["diagnostics"] = self.diagnostics
        return out


@dataclass
class SweepMessages:
    """Messages of one forward/backward sweep.

    ``from_left[i]`` is the edge ``i-1`` message into state ``i`` and
    ``from_right[i]`` the edge ``i`` message into state ``i`` (``None`` at the
    chain ends). ``to_right[i]`` / ``to_left[i]`` are the state-to-edge
    messages they were built from.
    """

    from_left: List[Optional[QuadraticMessage]]
    from_right: List[Optional[QuadraticMessage]]
    to_right: List[Optional[QuadraticMessage]]
    to_left: List[Optional[QuadraticMessage]]
    local: Optional[List[QuadraticMessage]] = None

    def incoming(self, i) -> Dict[str, QuadraticMessage]:
        out = {}
        if self.from_left[i] is not None:
            out["left"] = self.from_left[i]
        if self.from_right[i] is not None:
            out["right"] = self.from_right[i]
        return out


# ---------------------------------------------------------------- problem setup


def prior_model(scenario, cfg: SolverConfig) -> GPPriorModel:
    start = np.asarray(scenario.start, dtype=float)
    goal = np.asarray(scenario.goal, dtype=float)
    line_velocity = (goal - start) / cfg.total_time
    v0 = line_velocity if scenario.start_velocity is None else np.asarray(scenario.start_velocity, float)
    v1 = line_velocity if scenario.goal_velocity is None else np.asarray(scenario.goal_velocity, float)
    return GPPriorModel.create(
        scenario.qc,
        np.concatenate([start, v0]),
        np.concatenate([goal, v1]),
        mid_prior=scenario.mid_prior,
    )


def singular_points(workspace) -> np.ndarray:
    """Centers of circles and boxes, where the distance gradient is undefined."""
    pts = [ob.center for ob in workspace.obstacles if isinstance(ob, (Circle, Box))]
    return np.array(pts, dtype=float).reshape(-1, 2)


def tie_break(traj: Trajectory, scenario, threshold=1e-12, size=1e-9) -> Trajectory:
    """Nudge the interior of a straight-line start off an SDF gradient singularity."""
    pts = singular_points(scenario.workspace)
    if not len(pts) or traj.num_states < 3:
        return traj
    d = traj.d_cfg
    if scenario.robot.kind == "point":
        a = traj.positions[0] + scenario.robot.base_pose[:2]
        b = traj.positions[-1] + scenario.robot.base_pose[:2]
        seg = b - a
        denom = float(seg @ seg)
        s = np.clip(((pts - a) @ seg) / denom, 0.0, 1.0) if denom > 0 else np.zeros(len(pts))
        gap = np.linalg.norm(a + s[:, None] * seg - pts, axis=1)
        direction = np.array([-seg[1], seg[0]]) / np.sqrt(denom) if denom > 0 else np.array([0.0, 1.0])
    else:
        centers = sphere_centers(scenario.robot, traj.positions).reshape(-1, 2)
        gap = np.min(np.linalg.norm(centers[:, None, :] - pts[None], axis=-1), axis=0)
        direction = np.ones(d) / np.sqrt(d)
    if np.min(gap) > threshold:
        return traj
    states = traj.states.copy()
    states[1:-1, :d] += size * direction
    return traj.with_states(states)


def _setup(scenario, cfg: SolverConfig, n_ip: int):
    prior = prior_model(scenario, cfg)
    init = tie_break(prior.mean_trajectory(cfg.n_intervals, cfg.total_time), scenario)
    graph = assemble_graph(prior, init, scenario.robot, scenario.sdf, n_ip, cfg.eps, cfg.sigma_obs)
    return prior, init, graph


def dense_clearance(traj: Trajectory, scenario, points_per_interval: int) -> float:
    """Smallest exact sphere clearance along the GP-interpolated trajectory.

    Uses the analytic primitive distances, not the grid. Leaving the workspace
    bounds counts as ``-inf`` clearance.
    """
    d = traj.d_cfg
    samples = [traj.states[:1]]
    for i in range(traj.n_intervals):
        dt = traj.times[i + 1] - traj.times[i]
        for k in range(1, points_per_interval + 1):
            if k == points_per_interval:
                samples.append(traj.states[i + 1 : i + 2])
                continue
            lam, psi = interpolation_matrices(dt, dt * k / points_per_interval, d)
            samples.append((lam @ traj.states[i] + psi @ traj.states[i + 1])[None])
    q = np.vstack(samples)[:, :d]
    centers = sphere_centers(scenario.robot, q)
    if not np.all(scenario.workspace.contains(centers)):
        return -np.inf
    clearance = scenario.workspace.signed_distance(centers) - scenario.robot.radii
    return float(np.min(clearance))


def _finish(name, scenario, cfg, traj, converged, iterations, wall, history, diagnostics=None):
    per = cfg.check_density * (cfg.n_ip + 1)
    clearance = dense_clearance(traj, scenario, per)
    return PlanResult(
        planner=name,
        trajectory=traj,
        converged=converged,
        iterations=iterations,
        wall_time=wall,
        collision_free=bool(clearance > 0),
        min_clearance=clearance,
        objective_history=history,
        diagnostics=diagnostics,
        check_points_per_interval=per,
    )


def _relax(lam: float, raised: bool, floor: float) -> float:
    """Damping for the next pass: held after an escalation, else cut tenfold (to 0 below ``floor``)."""
    if raised:
        return lam
    return lam / 10.0 if lam / 10.0 >= floor else 0.0


def _passes(cfg: SolverConfig) -> int:
    return cfg.num_states if cfg.schedule == "fixed" else cfg.max_iterations


# ------------------------------------------------------------------- MS2MP


def proximal_messages(x: np.ndarray, damping: float) -> List[Optional[QuadraticMessage]]:
    """``0.5 * damping * |v - x_i|^2`` at every state, or ``None`` when undamped."""
    if damping <= 0:
        return [None] * len(x)
    dim = x.shape[1]
    eye = damping * np.eye(dim)
    return [QuadraticMessage(eye, damping * xi, 0.5 * damping * float(xi @ xi)) for xi in x]


def _with(extra: Optional[QuadraticMessage], incoming: Dict[str, QuadraticMessage]):
    if extra is not None:
        incoming = dict(incoming, damping=extra)
    return incoming


def sweep_messages(cg: CompoundGraph, x: np.ndarray, damping: float = 0.0) -> SweepMessages:
    """Forward then backward pass of messages along the chain, linearized at ``x``.

    A positive ``damping`` adds a proximal term around ``x`` to every
    self-potential.
    """
    n = cg.num_states
    prox = proximal_messages(x, damping)
    unary, edges = cg.linearize(x)
    local = [QuadraticMessage(*u) for u in unary]
    from_left: List[Optional[QuadraticMessage]] = [None] * n
    from_right: List[Optional[QuadraticMessage]] = [None] * n
    to_right: List[Optional[QuadraticMessage]] = [None] * n
    to_left: List[Optional[QuadraticMessage]] = [None] * n
    for i in range(n - 1):
        incoming = {"left": from_left[i]} if from_left[i] is not None else {}
        to_right[i] = variable_to_factor_message(
            cg.self_potentials[i], _with(prox[i], incoming), x[i], linearized=local[i]
        )
        from_left[i + 1] = factor_to_variable_message(
            cg.edge_potentials[i], to_right[i], (x[i], x[i + 1]), target=1, node=i + 1,
            edge_quadratic=edges[i],
        )
    for i in range(n - 1, 0, -1):
        incoming = {"right": from_right[i]} if from_right[i] is not None else {}
        to_left[i] = variable_to_factor_message(
            cg.self_potentials[i], _with(prox[i], incoming), x[i], linearized=local[i]
        )
        from_right[i - 1] = factor_to_variable_message(
            cg.edge_potentials[i - 1], to_left[i], (x[i - 1], x[i]), target=0, node=i - 1,
            edge_quadratic=edges[i - 1],
        )
    return SweepMessages(from_left, from_right, to_right, to_left, local)


def ms2mp_iteration(cg: CompoundGraph, x: np.ndarray, cfg: SolverConfig, damping: float = 0.0):
    """One sweep of messages followed by a belief update at every state."""
    msgs = sweep_messages(cg, x, damping)
    prox = proximal_messages(x, damping)
    new = x.copy()
    beliefs = []
    for i in range(cg.num_states):
        belief, new[i] = belief_update(
            cg.self_potentials[i],
            list(_with(prox[i], msgs.incoming(i)).values()),
            x[i],
            cfg.gn_max_inner,
            cfg.damping_init,
            node=i,
            linearized=msgs.local[i],
        )
        beliefs.append(belief)
    return new, msgs, beliefs


def ms2mp_plan(scenario, config: Optional[SolverConfig] = None) -> PlanResult:
    """Compound-node min-sum message passing.

    Each outer iteration is a forward/backward sweep plus a belief update at
    every state. A pass that raises the objective is retried with a larger
    proximal damping, exactly as the batch solver damps its steps.
    """
    cfg = config or scenario.solver_config()
    scenario.sdf  # built once per scenario, outside the timed region
    t0 = time.perf_counter()
    _, init, graph = _setup(scenario, cfg, cfg.n_ip)
    cg = compound_transform(graph)
    x = np.array(init.states)
    value = cg.objective(x)
    history = [value]
    converged = False
    iterations = 0
    lam = 0.0
    msgs = beliefs = None
    for _ in range(_passes(cfg)):
        raised = False
        while True:
            new, msgs, beliefs = ms2mp_iteration(cg, x, cfg, lam)
            change = float(np.max(np.abs(new - x)))
            new_value = cg.objective(new)
            if new_value <= value or change <= cfg.tolerance:
                break
            lam = max(10.0 * lam, cfg.damping_init)
            raised = True
            if lam > MAX_DAMPING:
                new, new_value, change = x, value, 0.0
                break
        x, value = new, new_value
        history.append(value)
        lam = _relax(lam, raised, cfg.damping_init)
        if change <= cfg.tolerance:
            converged = True
            if cfg.schedule == "converge":
                break
        else:
            converged = False
            iterations += 1
    wall = time.perf_counter() - t0
    traj = init.with_states(x)
    diag = None
    if msgs is not None:
        flags, g_check = local_optimality_check(cg, msgs, beliefs, traj)
        diag = {"min_consistent": flags, "g_check": g_check}
    return _finish("ms2mp", scenario, cfg, traj, converged, iterations, wall, history, diag)


def local_optimality_check(cg: CompoundGraph, messages: SweepMessages, beliefs: List[Belief],
                           trajectory: Trajectory, rtol: float = 1e-6):
    """Min-consistency of every state against each adjacent edge.

    For state ``i`` and neighbour ``j`` the edge objective
    ``psi(x_i, x_j) + m_{j->psi}(x_j)`` is re-minimized over ``x_j`` with
    ``x_i`` held at the returned state; adding ``x_i``'s own outgoing message
    must reproduce the belief value. Returns ``(flags, g_check)`` where
    ``g_check`` lists the states that fail.
    """
    x = trajectory.states
    flags = []
    for i in range(cg.num_states):
        b_val = cg.phi(i, x[i])
        incoming = messages.incoming(i)
        for m in incoming.values():
            b_val += m(x[i])
        ok = True
        if i + 1 < cg.num_states:
            xi = x[i]
            solve = gauss_newton_local(
                cg.edge_potentials[i], x[i + 1], [messages.to_left[i + 1]],
                max_inner=50, bind=lambda v, xi=xi: (xi, v), free_slot=1,
            )
            own = cg.phi(i, x[i]) + (incoming["left"](x[i]) if "left" in incoming else 0.0)
            ok &= abs(solve.value + own - b_val) <= rtol * (1.0 + abs(b_val))
        if i > 0:
            xi = x[i]
            solve = gauss_newton_local(
                cg.edge_potentials[i - 1], x[i - 1], [messages.to_right[i - 1]],
                max_inner=50, bind=lambda v, xi=xi: (v, xi), free_slot=0,
            )
            own = cg.phi(i, x[i]) + (incoming["right"](x[i]) if "right" in incoming else 0.0)
            ok &= abs(solve.value + own - b_val) <= rtol * (1.0 + abs(b_val))
        flags.append(bool(ok))
    g_check = [i for i, f in enumerate(flags) if not f]
    return flags, g_check


# ------------------------------------------------------------ MS2MP no-comp


def _normalized(m: QuadraticMessage) -> QuadraticMessage:
    # parallel factors feed each other's constants, which would otherwise compound every pass
    return QuadraticMessage(m.information_matrix, m.information_vector, 0.0)


def ms2mp_no_comp_plan(scenario, config: Optional[SolverConfig] = None) -> PlanResult:
    """Message passing with one node per raw factor.

    Every binary factor keeps its own pair of messages, a state-to-factor
    message excludes only that factor, and each factor is re-linearized at the
    latest state estimates whenever it sends. States are refreshed right after
    their incoming messages change. Passes are damped like ``ms2mp_plan``.
    """
    cfg = config or scenario.solver_config()
    scenario.sdf
    t0 = time.perf_counter()
    _, init, graph = _setup(scenario, cfg, cfg.n_ip)
    cg = compound_transform(graph)
    n = cg.num_states
    dim = init.states.shape[1]
    zero = QuadraticMessage.zero(dim)

    def incoming(msg, i, skip=None):
        out = []
        if i > 0:
            out += [msg.get((id(f), i), zero) for f in cg.edge_potentials[i - 1] if f is not skip]
        if i < n - 1:
            out += [msg.get((id(f), i), zero) for f in cg.edge_potentials[i] if f is not skip]
        return out

    def one_pass(x, msg, prox):
        x = x.copy()
        msg = dict(msg)

        def to_factor(i, f):
            out = linearized_potential(cg.self_potentials[i], x[i])
            if prox[i] is not None:
                out = out + prox[i]
            for m in incoming(msg, i, skip=f):
                out = out + m
            return out

        def refresh(i):
            extra = [prox[i]] if prox[i] is not None else []
            solve = gauss_newton_local(
                cg.self_potentials[i], x[i], incoming(msg, i) + extra,
                cfg.gn_max_inner, cfg.damping_init, node=i,
            )
            x[i] = solve.x

        for i in range(n - 1):
            for f in cg.edge_potentials[i]:
                msg[(id(f), i + 1)] = _normalized(factor_to_variable_message(
                    [f], to_factor(i, f), (x[i], x[i + 1]), target=1, node=i + 1
                ))
            refresh(i + 1)
        for i in range(n - 1, 0, -1):
            for f in cg.edge_potentials[i - 1]:
                msg[(id(f), i - 1)] = _normalized(factor_to_variable_message(
                    [f], to_factor(i, f), (x[i - 1], x[i]), target=0, node=i - 1
                ))
            refresh(i - 1)
        return x, msg

    x = np.array(init.states)
    msg: Dict[tuple, QuadraticMessage] = {}
    value = cg.objective(x)
    history = [value]
    converged = False
    iterations = 0
    lam = 0.0
    for _ in range(_passes(cfg)):
        raised = False
        while True:
            new, new_msg = one_pass(x, msg, proximal_messages(x, lam))
            change = float(np.max(np.abs(new - x)))
            new_value = cg.objective(new)
            if new_value <= value or change <= cfg.tolerance:
                break
            lam = max(10.0 * lam, cfg.damping_init)
            raised = True
            if lam > MAX_DAMPING:
                new, new_msg, new_value, change = x, msg, value, 0.0
                break
        x, msg, value = new, new_msg, new_value
        history.append(value)
        lam = _relax(lam, raised, cfg.damping_init)
        if change <= cfg.tolerance:
            converged = True
            if cfg.schedule == "converge":
                break
        else:
            converged = False
            iterations += 1
    wall = time.perf_counter() - t0
    return _finish("ms2mp_no_comp", scenario, cfg, init.with_states(x), converged, iterations, wall, history)


# ------------------------------------------------------------------- batch


def _normal_equations(cg: CompoundGraph, x: np.ndarray):
    """Block-tridiagonal ``J^T W J`` (diagonal and super-diagonal blocks) and gradient."""
    n, dim = x.shape
    unary, edges = cg.linearize(x)
    diag = np.array([a for a, _, _ in unary])
    rhs = np.array([b for _, b, _ in unary])
    upper = np.zeros((max(n - 1, 0), dim, dim))
    for i, (a, b, _) in enumerate(edges):
        diag[i] += a[:dim, :dim]
        diag[i + 1] += a[dim:, dim:]
        upper[i] = a[:dim, dim:]
        rhs[i] += b[:dim]
        rhs[i + 1] += b[dim:]
    grad = np.einsum("nij,nj->ni", diag, x) - rhs
    grad[:-1] += np.einsum("nij,nj->ni", upper, x[1:])
    grad[1:] += np.einsum("nji,nj->ni", upper, x[:-1])
    return diag, upper, grad


def _banded(diag, upper, lam):
    """Upper banded storage of the block-tridiagonal matrix plus ``lam * I``."""
    n, dim, _ = diag.shape
    size = n * dim
    width = 2 * dim - 1
    ab = np.zeros((width + 1, size))
    for i in range(n):
        block = diag[i] + lam * np.eye(dim)
        for r in range(dim):
            for c in range(r, dim):
                ab[width + r - c, i * dim + c] = block[r, c]
        if i < n - 1:
            for r in range(dim):
                for c in range(dim):
                    ab[width + r - (dim + c), (i + 1) * dim + c] = upper[i][r, c]
    return ab


def solve_block_tridiagonal(diag, upper, rhs, lam=0.0):
    ab = _banded(diag, upper, lam)
    return solveh_banded(ab, rhs.ravel()).reshape(rhs.shape)


def batch_plan(scenario, config: Optional[SolverConfig] = None) -> PlanResult:
    """Damped Gauss-Newton over all support states at once."""
    cfg = config or scenario.solver_config()
    return _batch(scenario, cfg, cfg.n_ip, "batch")


def batch_no_intp_plan(scenario, config: Optional[SolverConfig] = None) -> PlanResult:
    """Batch baseline without interpolated obstacle factors.

    The dense collision check still uses the configured ``n_ip`` resolution.
    """
    cfg = config or scenario.solver_config()
    return _batch(scenario, cfg, 0, "batch_no_intp")


def _batch(scenario, cfg: SolverConfig, n_ip: int, name: str) -> PlanResult:
    scenario.sdf
    t0 = time.perf_counter()
    _, init, graph = _setup(scenario, cfg, n_ip)
    cg = compound_transform(graph)
    x = np.array(init.states)
    value = cg.objective(x)
    history = [value]
    lam = 0.0
    converged = False
    iterations = 0
    for _ in range(_passes(cfg)):
        diag, upper, grad = _normal_equations(cg, x)
        step = None
        raised = False
        while True:
            try:
                step = -solve_block_tridiagonal(diag, upper, grad, lam)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and float(np.max(np.abs(step))) <= cfg.tolerance:
                break
            if step is not None:
                trial_value = cg.objective(x + step)
                if trial_value <= value:
                    break
            lam = max(10.0 * lam, cfg.damping_init)
            raised = True
            if lam > MAX_DAMPING:
                step = None
                break
        if step is None:
            # no descent step at any damping: stationary to working precision
            converged = True
            history.append(value)
            if cfg.schedule == "converge":
                break
            continue
        change = float(np.max(np.abs(step)))
        x = x + step
        value = cg.objective(x)
        history.append(value)
        lam = _relax(lam, raised, cfg.damping_init)
        if change <= cfg.tolerance:
            converged = True
            if cfg.schedule == "converge":
                break
        else:
            converged = False
            iterations += 1
    wall = time.perf_counter() - t0
    return _finish(name, scenario, cfg, init.with_states(x), converged, iterations, wall, history)


def run_planner(name: str, scenario, config: Optional[SolverConfig] = None) -> PlanResult:
    planners = {
        "ms2mp": ms2mp_plan,
        "ms2mp_no_comp": ms2mp_no_comp_plan,
        "batch": batch_plan,
        "batch_no_intp": batch_no_intp_plan,
    }
    if name not in planners:
        raise InvalidArgumentError(f"unknown planner {name!r}; choose from {', '.join(PLANNERS)}")
    return planners[name](scenario, config)
