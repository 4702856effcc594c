import numpy as np
import pytest

from minsum_planner.errors import InvalidArgumentError
from minsum_planner.scenario import scenario_from_dict
from minsum_planner.solver import (
    PLANNERS,
    SolverConfig,
    dense_clearance,
    run_planner,
    solve_block_tridiagonal,
)
from builders import arm_dict, point_scenario
from oracles import circle_distance, dense_gp_map, hermite_state

CIRCLE = {"type": "circle", "center": [0.5, 0.03], "radius": 0.2}


def line_states(start, goal, n):
    vel = np.subtract(goal, start)
    return np.array([np.concatenate([start, vel]), np.concatenate([goal, vel])])


def dense_circle_clearance(traj, center, radius, robot_radius, per=200):
    worst = np.inf
    d = traj.d_cfg
    for i in range(traj.n_intervals):
        a, b = traj.states[i], traj.states[i + 1]
        dt = traj.times[i + 1] - traj.times[i]
        for tau in np.linspace(0.0, dt, per + 1):
            p = hermite_state(a[:d], a[d:], b[:d], b[d:], dt, tau)[:d]
            worst = min(worst, circle_distance(p, center, radius) - robot_radius)
    return worst


@pytest.fixture(scope="module")
def detour():
    return point_scenario([CIRCLE], eps=0.1)


@pytest.fixture(scope="module")
def detour_results(detour):
    return {name: run_planner(name, detour) for name in PLANNERS}


# ------------------------------------------------------------ obstacle-free behaviour


@pytest.mark.parametrize("name", PLANNERS)
def test_empty_workspace_returns_prior_map(name):
    sc = point_scenario(goal=(1.0, 0.5))
    res = run_planner(name, sc)
    ref = dense_gp_map(*line_states((0.0, 0.0), (1.0, 0.5), 11), 10, 1.0, np.eye(2))
    assert res.success
    assert np.max(np.abs(res.trajectory.states - ref)) <= 1e-8


def test_planners_agree_without_obstacles():
    sc = point_scenario(goal=(0.8, -0.4))
    states = [run_planner(name, sc).trajectory.states for name in PLANNERS]
    for other in states[1:]:
        assert np.max(np.abs(other - states[0])) <= 1e-8


def test_batch_one_step_on_quadratic():
    # off-line endpoint velocities make the prior mean non-optimal, so one full step is needed
    data = {
        "workspace": {"bounds": [[-1, -1], [2, 1]], "obstacles": []},
        "robot": {"kind": "point", "radius": 0.05},
        "start": [0.0, 0.0], "goal": [1.0, 0.5],
        "start_velocity": [0.0, 1.0], "goal_velocity": [1.0, 0.0],
        "planner": {"mid_prior": False},
    }
    res = run_planner("batch", scenario_from_dict(data))
    assert res.converged and res.iterations == 1
    assert res.objective_history[-1] < res.objective_history[0]


def test_arm_without_obstacles_converges():
    sc = scenario_from_dict(arm_dict())
    res = run_planner("ms2mp", sc)
    assert res.success
    assert res.trajectory.d_cfg == 2


# ------------------------------------------------------------ obstacles


@pytest.mark.parametrize("name", ["ms2mp", "ms2mp_no_comp", "batch"])
def test_detour_is_collision_free(detour_results, name):
    res = detour_results[name]
    assert res.converged
    worst = dense_circle_clearance(res.trajectory, CIRCLE["center"], CIRCLE["radius"], 0.05)
    assert worst > 0
    assert res.collision_free
    # the planner's own check agrees with the analytic oracle to sampling accuracy
    assert res.min_clearance == pytest.approx(worst, abs=1e-3)


@pytest.mark.parametrize("name", PLANNERS)
def test_anchors_hold(detour_results, name):
    states = detour_results[name].trajectory.states
    assert np.max(np.abs(states[0] - [0.0, 0.0, 1.0, 0.0])) <= 1e-4
    assert np.max(np.abs(states[-1] - [1.0, 0.0, 1.0, 0.0])) <= 1e-4


@pytest.mark.parametrize("name", PLANNERS)
def test_objective_never_increases(detour_results, name):
    hist = np.array(detour_results[name].objective_history)
    assert np.all(np.diff(hist) <= 1e-12 * np.maximum(1.0, hist[:-1]))


@pytest.mark.parametrize("name", PLANNERS)
def test_reflected_scenario_gives_reflected_plan(name):
    # a moderate obstacle weight keeps the optimum away from the grid's gradient kinks
    def plan(cy):
        sc = point_scenario([{"type": "circle", "center": [0.5, cy], "radius": 0.2}], eps=0.1, sigma_obs=0.01)
        return run_planner(name, sc).trajectory.states.copy()

    up, down = plan(0.1), plan(-0.1)
    down[:, [1, 3]] *= -1
    assert np.max(np.abs(up - down)) <= 1e-6


def test_centered_obstacle_tie_break(detour):
    # straight line through the circle centre: the planner must still pick a side
    sc = point_scenario([{"type": "circle", "center": [0.5, 0.0], "radius": 0.2}], eps=0.1)
    res = run_planner("ms2mp", sc)
    assert res.success
    assert abs(res.trajectory.positions[5, 1]) > 0.2


def test_planning_is_deterministic(detour):
    a = run_planner("ms2mp", detour)
    b = run_planner("ms2mp", detour)
    assert np.array_equal(a.trajectory.states, b.trajectory.states)
    assert a.objective_history == b.objective_history


def test_fixed_schedule_runs_n_passes(detour):
    cfg = detour.solver_config(schedule="fixed")
    res = run_planner("ms2mp", detour, cfg)
    assert len(res.objective_history) == cfg.num_states + 1


# ------------------------------------------------------------ diagnostics


def test_two_state_chain_diagnostics():
    sc = point_scenario(goal=(0.5, 0.2), N=2)
    res = run_planner("ms2mp", sc)
    assert res.trajectory.num_states == 2
    assert res.diagnostics["min_consistent"] == [True, True]
    assert res.diagnostics["g_check"] == []


def test_diagnostics_consistent_on_detour(detour_results):
    diag = detour_results["ms2mp"].diagnostics
    assert len(diag["min_consistent"]) == 11
    assert diag["g_check"] == [i for i, ok in enumerate(diag["min_consistent"]) if not ok]


def test_summary_fields(detour_results):
    s = detour_results["ms2mp"].summary()
    for key in ("planner", "converged", "iterations", "wall_time", "collision_free", "min_clearance"):
        assert key in s


# ------------------------------------------------------------ helpers and validation


def test_dense_clearance_out_of_bounds():
    sc = point_scenario(goal=(1.0, 0.0))
    traj = run_planner("batch", sc).trajectory
    states = traj.states.copy()
    states[5, 1] = 5.0
    assert dense_clearance(traj.with_states(states), sc, 5) == -np.inf


def test_block_tridiagonal_matches_dense(rng):
    n, k = 5, 3
    full = np.zeros((n * k, n * k))
    diag = np.zeros((n, k, k))
    upper = np.zeros((n - 1, k, k))
    for i in range(n):
        a = rng.normal(size=(k, k))
        diag[i] = a @ a.T + 4 * np.eye(k)
        full[i * k:(i + 1) * k, i * k:(i + 1) * k] = diag[i]
    for i in range(n - 1):
        upper[i] = 0.3 * rng.normal(size=(k, k))
        full[i * k:(i + 1) * k, (i + 1) * k:(i + 2) * k] = upper[i]
        full[(i + 1) * k:(i + 2) * k, i * k:(i + 1) * k] = upper[i].T
    rhs = rng.normal(size=(n, k))
    out = solve_block_tridiagonal(diag, upper, rhs, lam=0.5)
    ref = np.linalg.solve(full + 0.5 * np.eye(n * k), rhs.ravel()).reshape(n, k)
    assert np.allclose(out, ref, atol=1e-12)


def test_unknown_planner():
    with pytest.raises(InvalidArgumentError):
        run_planner("rrt", point_scenario())


@pytest.mark.parametrize("bad", [dict(num_states=1), dict(eps=-0.1), dict(n_ip=-1),
                                 dict(schedule="sometimes"), dict(tolerance=0.0)])
def test_config_validation(bad):
    with pytest.raises(InvalidArgumentError):
        SolverConfig(**bad)
