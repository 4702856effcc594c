"""GP motion planning by min-sum message passing on a compound-node factor chain."""
from .bench import BenchmarkReport, export_result, read_trajectory, run_benchmark, write_report
from .environment import Box, Circle, SignedDistanceField, Workspace, build_sdf, hinge_cost, query_sdf
from .errors import (
    GraphStructureError,
    InvalidArgumentError,
    NumericalError,
    OutOfBoundsError,
    ScenarioError,
)
from .factors import assemble_graph, compound_transform
from .gp_prior import GPPriorModel, Trajectory, interpolate_state, prior_mean_trajectory, upsample
from .kinematics import BodySphere, RobotModel, forward_kinematics
from .scenario import Scenario, generate_suite, load_scenario, load_suite, write_suite
from .solver import (
    PLANNERS,
    PlanResult,
    SolverConfig,
    batch_no_intp_plan,
    batch_plan,
    local_optimality_check,
    ms2mp_no_comp_plan,
    ms2mp_plan,
    run_planner,
)

__all__ = [
    "BenchmarkReport", "export_result", "read_trajectory", "run_benchmark", "write_report",
    "Box", "Circle", "SignedDistanceField", "Workspace", "build_sdf", "hinge_cost", "query_sdf",
    "GraphStructureError", "InvalidArgumentError", "NumericalError", "OutOfBoundsError", "ScenarioError",
    "assemble_graph", "compound_transform",
    "GPPriorModel", "Trajectory", "interpolate_state", "prior_mean_trajectory", "upsample",
    "BodySphere", "RobotModel", "forward_kinematics",
    "Scenario", "generate_suite", "load_scenario", "load_suite", "write_suite",
    "PLANNERS", "PlanResult", "SolverConfig", "batch_no_intp_plan", "batch_plan",
    "local_optimality_check", "ms2mp_no_comp_plan", "ms2mp_plan", "run_planner",
]

__version__ = "0.1.0"
