import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from vdcsim.interaction import (
    Differentiator, HumanArmModel, HumanArmState, PassivityMonitor, VirtualWall, compose_external_force,
    contact_force, human_arm_force, passivity_energy_step, varying_mass_gate,
)

reals = st.floats(-100, 100, allow_nan=False)
IDENTITY_Q = np.array([1.0, 0, 0, 0])


def test_arm_equilibrium_gives_zero_force():
    m = HumanArmModel()
    s = HumanArmState.at([0.1, 0.2, 0.3], IDENTITY_Q)
    f, a = human_arm_force(m, s, [0.1, 0.2, 0.3], IDENTITY_Q, 1e-3)
    assert np.array_equal(f, np.zeros(6)) and np.array_equal(a, np.zeros(6))


@pytest.mark.parametrize("M, B, K", [(1.5, 15.0, 150.0), (1.0, 0.0, 100.0), (2.0, 60.0, 150.0)])
def test_arm_step_response_matches_analytic(M, B, K):
    model = HumanArmModel(M, B, K)
    state = HumanArmState.at(np.zeros(3), IDENTITY_Q)
    step = np.array([0.0, 0.0, 0.01])
    dt = 1e-3
    t = np.arange(1, 2001) * dt
    xs = []
    for _ in t:
        human_arm_force(model, state, step, IDENTITY_Q, dt)
        xs.append(state.position[2])
    ref = step[2] + oracles.mass_spring_damper_step(M, B, K, -step[2], t)
    assert np.max(np.abs(np.array(xs) - ref)) <= 0.01 * step[2]
    assert np.allclose(state.position[:2], 0.0)


def test_arm_force_is_reaction_of_hand_dynamics(rng):
    model = HumanArmModel(rng.uniform(0.5, 2, 6), rng.uniform(0, 20, 6), rng.uniform(0, 200, 6))
    state = HumanArmState.at(np.zeros(3), IDENTITY_Q)
    state.velocity = rng.normal(size=6)
    v0 = state.velocity.copy()
    f, a = human_arm_force(model, state, rng.normal(size=3) * 0.01, IDENTITY_Q, 1e-3)
    assert np.allclose(f, -(model.M_h * a + model.B_h * v0), atol=1e-12)
    # with no spring and no damper the only force is the inertial one
    free = HumanArmModel(model.M_h, 0.0, 0.0)
    f2, a2 = human_arm_force(free, state, np.ones(3), IDENTITY_Q, 1e-3)
    assert np.array_equal(f2, -free.M_h * a2)


def test_arm_validation():
    with pytest.raises(ValueError):
        HumanArmModel(M_h=0.0)
    with pytest.raises(ValueError):
        HumanArmModel(B_h=-1.0)
    with pytest.raises(ValueError):
        human_arm_force(HumanArmModel(), HumanArmState.at(np.zeros(3), IDENTITY_Q), np.zeros(3), IDENTITY_Q, 0.0)


def test_gate_branches():
    assert varying_mass_gate(1.0, 1.0, 0.14) == 0.14
    assert varying_mass_gate(1.0, -1.0, 0.14) == 0.0
    for v in (-1.0, 0.0, 2.0):
        assert varying_mass_gate(0.0, v, 0.14) == 0.14


def test_contact_force_examples(frozen):
    spring = VirtualWall(0.0, 1000.0)
    assert contact_force(spring, -1e-3, 1.0, 1.0) == 0.0
    assert contact_force(spring, 0.0, 1.0, 1.0) == 0.0
    assert contact_force(spring, 1e-3, 0.0, 0.0) == pytest.approx(frozen["spring_force_1mm_k1000"], abs=1e-15)
    damped = VirtualWall(0.0, 1000.0, "damping", damping=5.0)
    extra = contact_force(damped, 1e-3, 0.1, 0.0) - contact_force(spring, 1e-3, 0.1, 0.0)
    assert extra == pytest.approx(frozen["damping_force_b5_v01"], abs=1e-15)
    mass = VirtualWall(0.0, 1000.0, "mass", mass=0.14)
    assert contact_force(mass, 1e-3, 0.1, 2.0) == pytest.approx(1.0 + 0.28)
    assert contact_force(mass, 1e-3, -0.1, 2.0) == pytest.approx(1.0)


def test_wall_element_codes_and_validation():
    assert VirtualWall(0.0, 1.0, 1).element == "mass"
    assert VirtualWall(0.0, 1.0, 2).element == "damping"
    with pytest.raises(ValueError):
        VirtualWall(0.0, -1.0)
    with pytest.raises(ValueError):
        VirtualWall(0.0, 1.0, "spring")
    with pytest.raises(ValueError):
        VirtualWall(0.0, 1.0, normal=[0, 0, 2.0])


def test_wall_geometry():
    w = VirtualWall(0.2, 1000.0)
    assert w.penetration([0, 0, 0.19]) == pytest.approx(0.01)
    assert w.inward([0, 0, -0.5, 9, 9, 9]) == 0.5
    assert np.array_equal(w.contact_axis, [0, 0, -1, 0, 0, 0])


@given(st.floats(0, 0.01), reals, reals)
def test_spring_force_continuous_at_boundary(p, v, a):
    w = VirtualWall(0.0, 1000.0)
    assert abs(contact_force(w, p, v, a) - contact_force(w, 0.0, v, a)) <= 1000.0 * p + 1e-12


@given(reals, reals)
def test_dissipative_elements_absorb_power(v, a):
    m_e = varying_mass_gate(a, v, 0.14)
    assert m_e * a * v >= 0.0
    assert 5.0 * v * v >= 0.0


def test_compose_force(rng):
    f_h = rng.normal(size=6)
    assert np.array_equal(compose_external_force(f_h, 3.0, "pHRI"), -f_h)
    axis = np.array([0, 0, -1.0, 0, 0, 0])
    assert np.array_equal(compose_external_force(np.zeros(6), 3.0, "pHREI"), 3.0 * axis)
    assert np.allclose(compose_external_force(f_h, 3.0, "pHREI", axis), -f_h + 3.0 * axis)
    with pytest.raises(ValueError):
        compose_external_force(f_h, 0.0, "bogus")


def test_energy_rectangle_examples(frozen):
    mon = PassivityMonitor("rectangle")
    for _ in range(1000):
        mon.update(0.0, 0.0, 0.0, 1e-3)
    assert mon.E_c == 0.0
    E = 0.0
    for _ in range(1000):
        E = passivity_energy_step(E, 1.0, 0.1, 1e-3)
    assert E == pytest.approx(frozen["rectangle_energy_1N_01ms_1s"], abs=1e-12)


@pytest.mark.parametrize("rule", ["rectangle", "trapezoid", "zoh"])
def test_spring_cycle_returns_energy(rule):
    k, dt, T = 1000.0, 1e-3, 1.0
    wall = VirtualWall(0.0, k)
    mon = PassivityMonitor(rule)
    t = np.arange(0, T + dt / 2, dt)
    pen = 0.005 * np.sin(np.pi * t / T)
    vel = 0.005 * np.pi / T * np.cos(np.pi * t / T)
    for p, v in zip(pen, vel):
        mon.update(contact_force(wall, p, v, 0.0), p, v, dt)
    assert abs(mon.E_c) <= 1e-4


def test_monitor_flags_energy_generation():
    mon = PassivityMonitor("rectangle", eps=1e-6)
    mon.update(1.0, 0.0, -0.1, 1e-3)
    mon.update(1.0, 0.0, -0.1, 1e-3)
    assert mon.min_E_c == pytest.approx(-1e-4)
    assert not mon.passive
    with pytest.raises(ValueError):
        PassivityMonitor("simpson")


def test_differentiator():
    d = Differentiator(1e-3, cutoff=0.0)
    d(0.0)
    assert d(1e-3) == pytest.approx(1.0)
    filt = Differentiator(1e-3, cutoff=50.0)
    vals = [filt(2.0 * k * 1e-3) for k in range(2000)]
    assert vals[-1] == pytest.approx(2.0, rel=1e-6)
    assert abs(vals[1]) < 2.0
