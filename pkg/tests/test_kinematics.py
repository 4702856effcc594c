import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minsum_planner.errors import InvalidArgumentError
from minsum_planner.kinematics import (
    BodySphere,
    RobotModel,
    forward_kinematics,
    joint_positions,
    sphere_centers,
    sphere_jacobians,
)
from oracles import central_jacobian, planar_arm_spheres, rel_err

SPHERES = [(0, 0.3, 0.05), (0, 1.0, 0.05), (1, 0.5, 0.05), (1, 1.0, 0.05), (2, 0.4, 0.04)]


def three_link(base=(0.2, -0.1, 0.4)):
    return RobotModel("planar_arm", tuple(BodySphere(*s) for s in SPHERES), (1.0, 1.0, 0.6), base)


def two_link_end():
    return RobotModel("planar_arm", (BodySphere(1, 1.0, 0.1),), (1.0, 1.0))


def test_point_robot_translation():
    (center, jac), = forward_kinematics(RobotModel.point(0.1), [0.3, 0.4])
    assert np.allclose(center, [0.3, 0.4])
    assert np.array_equal(jac, np.eye(2))


def test_point_robot_base_offset():
    (center, _), = forward_kinematics(RobotModel.point(0.1, base=(1.0, -1.0)), [0.3, 0.4])
    assert np.allclose(center, [1.3, -0.6])


def test_two_link_extended():
    (center, _), = forward_kinematics(two_link_end(), [0.0, 0.0])
    assert np.allclose(center, [2.0, 0.0])


def test_two_link_bent():
    model = two_link_end()
    (center, jac), = forward_kinematics(model, [np.pi / 2, -np.pi / 2])
    assert np.allclose(center, [1.0, 1.0], atol=1e-15)
    fd = central_jacobian(lambda q: forward_kinematics(model, q)[0][0], np.array([np.pi / 2, -np.pi / 2]))
    assert np.max(np.abs(jac - fd)) <= 1e-6


def test_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        forward_kinematics(two_link_end(), [0.0, 0.0, 0.0])
    with pytest.raises(InvalidArgumentError):
        sphere_jacobians(two_link_end(), [[0.0]])


def test_model_validation():
    with pytest.raises(InvalidArgumentError):
        RobotModel("planar_arm", (BodySphere(0, 1.5, 0.1),), (1.0,))
    with pytest.raises(InvalidArgumentError):
        RobotModel("planar_arm", (BodySphere(2, 0.5, 0.1),), (1.0,))
    with pytest.raises(InvalidArgumentError):
        RobotModel("planar_arm", (BodySphere(0, 0.5, 0.1),), (0.0,))
    with pytest.raises(InvalidArgumentError):
        RobotModel("point", (BodySphere(0, 0.1, 0.1),))
    with pytest.raises(InvalidArgumentError):
        RobotModel.point(-0.1)
    with pytest.raises(InvalidArgumentError):
        RobotModel("hexapod", (BodySphere(0, 0.0, 0.1),))


def test_sphere_order_is_link_then_offset():
    model = RobotModel("planar_arm", (BodySphere(1, 0.2, 0.1), BodySphere(0, 0.9, 0.1), BodySphere(0, 0.1, 0.1)),
                       (1.0, 1.0))
    assert [(s.link, s.offset) for s in model.body_spheres] == [(0, 0.1), (0, 0.9), (1, 0.2)]


def test_fk_matches_trig_oracle(rng):
    model = three_link()
    for q in rng.uniform(-np.pi, np.pi, size=(50, 3)):
        centers = np.array([c for c, _ in forward_kinematics(model, q)])
        ref = planar_arm_spheres(model.link_lengths, model.base_pose,
                                 [(s.link, s.offset, s.radius) for s in model.body_spheres], q)
        assert np.allclose(centers, ref, atol=1e-14)


@pytest.mark.parametrize("model", [RobotModel.point(0.1, base=(0.5, 0.5)), three_link(), two_link_end()])
def test_fk_jacobians_fd(model, rng):
    worst = 0.0
    for q in rng.uniform(-np.pi, np.pi, size=(100, model.d_cfg)):
        for s, (_, jac) in enumerate(forward_kinematics(model, q)):
            fd = central_jacobian(lambda v: forward_kinematics(model, v)[s][0], q)
            worst = max(worst, rel_err(jac, fd))
    assert worst <= 1e-5


def test_fk_invariant_to_full_turns(rng):
    model = three_link()
    for q in rng.uniform(-np.pi, np.pi, size=(20, 3)):
        k = rng.integers(0, 3)
        shifted = q.copy()
        shifted[k] += 2 * np.pi
        assert np.allclose(sphere_centers(model, q), sphere_centers(model, shifted), atol=1e-12)


@pytest.mark.parametrize("model", [RobotModel.point(0.1, base=(0.5, 0.5)), three_link()])
def test_batched_paths_match_per_config(model, rng):
    qs = rng.uniform(-np.pi, np.pi, size=(30, model.d_cfg))
    centers, jac = sphere_jacobians(model, qs)
    assert np.allclose(sphere_centers(model, qs), centers, atol=1e-14)
    for k, q in enumerate(qs):
        for s, (c, j) in enumerate(forward_kinematics(model, q)):
            assert np.allclose(centers[k, s], c, atol=1e-14)
            assert np.allclose(jac[k, s], j, atol=1e-14)


def test_joint_positions():
    model = two_link_end()
    assert np.allclose(joint_positions(model, [np.pi / 2, -np.pi / 2]), [[0, 0], [0, 1], [1, 1]], atol=1e-15)
    assert np.allclose(joint_positions(RobotModel.point(0.1), [0.2, 0.3]), [[0.2, 0.3]])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_jacobian_vanishes_after_sphere_link(q):
    model = three_link()
    for s, (_, jac) in zip(model.body_spheres, forward_kinematics(model, np.array(q))):
        assert not jac[:, s.link + 1:].any()
