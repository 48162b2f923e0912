import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from vdcsim import dynamics as dyn
from vdcsim._yaml import ConfigError
from vdcsim.robot import (
    actuator_regressor, default_robot_text, load_robot, planar_two_link, rigid_body_regressor, robot_from_dict,
)
from vdcsim._yaml import load_text
from vdcsim.spatial import SpatialForce

seeds = st.integers(0, 2**31 - 1)


def random_state(n, seed, scale=1.5):
    r = np.random.default_rng(seed)
    return r.uniform(-scale, scale, n), r.uniform(-2, 2, n), r.uniform(-3, 3, n)


def test_axis_selectors(robot):
    # joints 1-4 and 6 about z, joint 5 about x, joint 7 about y
    assert list(robot.axis) == [2, 2, 2, 2, 0, 2, 1]
    for i in range(robot.n):
        k = robot.kappa(i)
        assert k.sum() == 1.0 and np.count_nonzero(k) == 1


def test_fk_matches_frozen_oracle(robot, frozen):
    for case in frozen["default_fk"]:
        p, quat = robot.end_effector_pose(case["q"])
        assert np.allclose(p, case["position"], atol=1e-12)
        assert np.allclose(quat, case["quat"], atol=1e-12)


def test_fk_home_pose(robot, frozen):
    p, quat = robot.end_effector_pose(np.zeros(7))
    assert np.allclose(p, [0.48, 0.0, -0.2598076211], atol=1e-9)
    assert np.allclose(quat, [1, 0, 0, 0], atol=1e-12)


def test_fk_against_live_oracle(robot, rng):
    text = default_robot_text()
    for _ in range(5):
        q = rng.uniform(-2, 2, 7)
        T = oracles.fk_from_yaml(text, q)
        assert np.allclose(robot.forward_kinematics(q).ee_position, T[:3, 3], atol=1e-12)


def test_single_joint_moves_only_distal_frames(robot, rng):
    q = rng.uniform(-1, 1, 7)
    a = robot.forward_kinematics(q)
    q2 = q.copy()
    q2[3] += 0.3
    b = robot.forward_kinematics(q2)
    assert np.array_equal(a.p_T[:3], b.p_T[:3]) and np.array_equal(a.R_T[:3], b.R_T[:3])
    assert np.array_equal(a.p_B[3], b.p_B[3])
    assert not np.allclose(a.R_T[3], b.R_T[3])


@given(seeds)
def test_jacobian_matches_finite_differences(robot, seed):
    q, _, _ = random_state(7, seed)
    J = robot.jacobian(q)
    h = 1e-6
    R0 = robot.forward_kinematics(q).ee_rotation
    for i in range(7):
        dq = np.zeros(7)
        dq[i] = h
        pp, pm = robot.forward_kinematics(q + dq), robot.forward_kinematics(q - dq)
        dp = (pp.ee_position - pm.ee_position) / (2 * h)
        dR = (pp.ee_rotation - pm.ee_rotation) / (2 * h)
        W = dR @ R0.T
        w = np.array([W[2, 1], W[0, 2], W[1, 0]])
        assert np.allclose(J[:3, i], dp, atol=1e-6)
        assert np.allclose(J[3:, i], w, atol=1e-6)


def test_jacobian_columns_are_axis_actions(robot, rng):
    q = rng.uniform(-1, 1, 7)
    poses = robot.forward_kinematics(q)
    J = robot.jacobian(q, poses)
    for i in range(7):
        z = poses.R_B[i][:, robot.axis[i]]
        assert np.allclose(J[3:, i], z, atol=1e-15)
        assert np.allclose(J[:3, i], np.cross(z, poses.ee_position - poses.p_B[i]), atol=1e-15)
    assert np.array_equal(J @ np.zeros(7), np.zeros(6))


def test_velocity_recursion_simple_cases(robot, rng):
    q = rng.uniform(-1, 1, 7)
    V_B, V_T = robot.body_velocity_recursion(q, np.zeros(7))
    assert np.array_equal(V_B, np.zeros((7, 6)))
    qd = np.zeros(7)
    qd[0] = 1.0
    v1 = robot.body_velocity(q, qd, 0)
    assert v1.frame == "B1"
    assert np.array_equal(v1.vector, [0, 0, 0, 0, 0, 1.0])


@given(seeds)
def test_velocity_recursion_matches_jacobian(robot, seed):
    q, qd, _ = random_state(7, seed)
    _, V_T = robot.body_velocity_recursion(q, qd)
    R = robot.forward_kinematics(q).ee_rotation
    world = np.concatenate([R @ V_T[-1, :3], R @ V_T[-1, 3:]])
    assert np.allclose(world, robot.jacobian(q) @ qd, rtol=0, atol=1e-12)


@given(seeds)
def test_regressor_matches_newton_euler(seed):
    r = np.random.default_rng(seed)
    m = r.uniform(0.2, 3)
    com = r.uniform(-0.2, 0.2, 3)
    A = r.normal(size=(3, 3))
    I_c = A @ A.T * 0.01 + 1e-3 * np.eye(3)
    v, w, dv, dw, g = r.normal(size=(5, 3))
    from vdcsim.nal import params_from_physical

    phi = params_from_physical(m, com, I_c)
    V = np.concatenate([v, w])
    W = rigid_body_regressor(V, V, np.concatenate([dv, dw]), g)
    ref = oracles.newton_euler_wrench(m, com, I_c, v, w, dv, dw, g)
    assert np.allclose(W @ phi, ref, rtol=1e-9, atol=1e-12)


def test_regressor_trivial_and_static(rng):
    z = np.zeros(6)
    assert np.array_equal(rigid_body_regressor(z, z, z, np.zeros(3)), np.zeros((6, 10)))
    phi = np.array([2.0, 0.1, -0.2, 0.05, 0.1, 0.1, 0.1, 0, 0, 0])
    g = np.array([0, 0, -9.81])
    _, _, G = dyn.dynamics_terms(phi, np.zeros(3), g)
    assert np.allclose(rigid_body_regressor(z, z, z, g) @ phi, G, atol=1e-14)


@given(seeds)
def test_regressor_matches_dynamics_terms(seed):
    r = np.random.default_rng(seed)
    V, Vr, dVr = r.normal(size=(3, 6))
    g = r.normal(size=3)
    phi = r.normal(size=10)
    M, C, G = dyn.dynamics_terms(phi, V[3:], g)
    ref = M @ dVr + C @ Vr + G
    assert np.linalg.norm(rigid_body_regressor(V, Vr, dVr, g) @ phi - ref) <= 1e-9 * max(1.0, np.linalg.norm(ref))


def test_actuator_regressor(frozen):
    phi = np.zeros(10)
    phi[6] = 0.01
    assert np.array_equal(actuator_regressor(0.0, 2), np.zeros((1, 10)))
    assert (actuator_regressor(1.0, 2) @ phi)[0] == pytest.approx(frozen["actuator_product_qdd1_Im001"], abs=1e-15)
    assert (actuator_regressor(3.0, 2) @ phi)[0] == pytest.approx(3 * 0.01, abs=1e-15)


def test_body_mass_matrices_spd(robot):
    for p in robot.phi:
        M, _, _ = dyn.dynamics_terms(p, np.zeros(3), np.zeros(3))
        assert np.allclose(M, M.T) and np.linalg.eigvalsh(M)[0] > 0


@given(seeds)
def test_joint_inertia_spd(robot, seed):
    q, _, _ = random_state(7, seed, 3.0)
    M = robot.mass_matrix(q)
    assert np.allclose(M, M.T, atol=1e-12)
    assert np.linalg.eigvalsh(M)[0] > 0


def test_static_equilibrium(robot, rng):
    for _ in range(5):
        q = rng.uniform(-1.5, 1.5, 7)
        qdd = robot.forward_dynamics(q, np.zeros(7), robot.gravity_torques(q))
        assert np.max(np.abs(qdd)) < 1e-10


def test_forward_inverse_consistency(robot, rng):
    q, qd, qdd = rng.uniform(-1, 1, (3, 7))
    f = rng.normal(size=6)
    tau = robot.inverse_dynamics(q, qd, qdd, f)
    assert np.allclose(robot.forward_dynamics(q, qd, tau, f), qdd, atol=1e-9)
    # external wrench enters through J^T
    tau0 = robot.inverse_dynamics(q, qd, qdd)
    assert np.allclose(tau0 - tau, robot.jacobian(q).T @ f, atol=1e-10)


def test_tool_frame_force_equivalent_to_world(robot, rng):
    q, qd, tau = rng.uniform(-1, 1, (3, 7))
    f = rng.normal(size=6)
    R = robot.forward_kinematics(q).ee_rotation
    local = SpatialForce(R.T @ f[:3], R.T @ f[3:], "T7")
    assert np.allclose(robot.forward_dynamics(q, qd, tau, local), robot.forward_dynamics(q, qd, tau, f), atol=1e-12)
    with pytest.raises(ValueError):
        robot.forward_dynamics(q, qd, tau, SpatialForce(f[:3], f[3:], "B3"))


def test_power_balance(robot, rng):
    q, qd = rng.uniform(-1, 1, (2, 7))
    tau = rng.normal(size=7)
    f = rng.normal(size=6)
    qdd = robot.forward_dynamics(q, qd, tau, f)
    h = 1e-6
    E = lambda s: robot.kinetic_energy(q + s * qd + 0.5 * s * s * qdd, qd + s * qdd) + robot.potential_energy(q + s * qd)
    dE = (E(h) - E(-h)) / (2 * h)
    xdot = robot.jacobian(q) @ qd
    assert abs(qd @ tau + xdot @ f - dE) < 1e-6 * max(1.0, abs(dE))


def test_two_link_against_frozen_lagrangian(frozen):
    p = frozen["two_link_params"]
    arm = planar_two_link(p["l1"], p["l2"], p["m1"], p["m2"], (p["Im1"], p["Im2"]), (0.0, -p["g"], 0.0))
    for case in frozen["two_link"]:
        tau = arm.inverse_dynamics(case["q"], case["qd"], case["qdd"])
        assert np.allclose(tau, case["tau"], rtol=0, atol=1e-8)


def test_energy_conserved_without_gravity(robot):
    flat = robot.with_gravity((0.0, 0.0, 0.0))
    q = np.array([0.6, -0.6, 0.5, -1.0, 0.0, 0.0, 0.0])
    qd = 0.5 * np.array([1, -1, 1, -1, 1, -1, 1.0])
    E0 = flat.kinetic_energy(q, qd)
    for _ in range(100):  # 1 s of the 10 s check; the full horizon runs in the acceptance suite
        flat.step(q, qd, np.zeros(7), np.zeros(6), 1e-4, 100)
    assert abs(flat.kinetic_energy(q, qd) - E0) / E0 < 1e-3


ROBOT_TEMPLATE = """\
schema: vdcsim-robot/1
links:
  - axis: z
    offset: [0.1, 0, 0]
    mass: 1.0
    com: [0.05, 0, 0]
    inertia: [0.01, 0.01, 0.01, 0, 0, 0]
    rotor_inertia: 0.01
"""


def test_robot_file_round_trip(tmp_path):
    path = tmp_path / "r.yaml"
    path.write_text(ROBOT_TEMPLATE)
    r = load_robot(path)
    assert r.n == 1 and r.axis[0] == 2


@pytest.mark.parametrize(
    "edit, fragment",
    [
        (("    rotor_inertia: 0.01\n", "    rotor_inertia: 0.01\n    colour: red\n"), ":9: links[0].colour"),
        (("axis: z", "axis: w"), ":3: links[0].axis"),
        (("mass: 1.0", "mass: -1.0"), "mass must be positive"),
        (("inertia: [0.01, 0.01, 0.01, 0, 0, 0]", "inertia: [0.01, 0.01, 0.05, 0, 0, 0]"), "physically consistent"),
        (("offset: [0.1, 0, 0]", "offset: [0.1, 0]"), ":4: links[0].offset"),
    ],
)
def test_robot_file_errors_name_location(tmp_path, edit, fragment):
    path = tmp_path / "bad.yaml"
    path.write_text(ROBOT_TEMPLATE.replace(*edit))
    with pytest.raises(ConfigError) as err:
        load_robot(path)
    assert fragment in str(err.value)
    assert str(path) in str(err.value)


def test_robot_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_robot(tmp_path / "absent.yaml")


def test_default_robot_parses_via_dict():
    data, lines = load_text(default_robot_text())
    assert robot_from_dict(data, lines).n == 7
