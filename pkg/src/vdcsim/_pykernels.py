"""Pure-numpy implementations of the hot kernels.

Signatures match ``vdcsim._ckernels`` exactly: inputs are contiguous float64
arrays, results are written into caller-owned output arrays.  This module is
selected automatically when the compiled extension is unavailable.
"""

from __future__ import annotations

import numpy as np

from . import dynamics as dyn
from .nal import PhysicalConsistencyError, dual_s_from_s, nal_unmap, nal_update

NAME = "python"


def fk(axis, link_R, link_r, q, R_B, p_B, R_T, p_T):
    R_B[...], p_B[...], R_T[...], p_T[...] = dyn.kinematics(axis, link_R, link_r, q)


def _id(axis, link_R, link_r, phi, I_m, g_B, q, qd, qdd, tip_T, with_gravity):
    n = len(q)
    V_B, dV_B, _, _ = dyn.propagate(axis, link_R, link_r, q, qd, qd, qdd)
    F_star = np.empty((n, 6))
    for i in range(n):
        M, C, G = dyn.dynamics_terms(phi[i], V_B[i, 3:], g_B[i])
        F_star[i] = M @ dV_B[i] + C @ V_B[i] + (G if with_gravity else 0.0)
    F_B = dyn.backward_forces(axis, link_R, link_r, q, F_star, tip_T)
    tau = I_m * qdd + F_B[np.arange(n), 3 + np.asarray(axis, dtype=int)]
    return tau, F_star, F_B


def inverse_dynamics(axis, link_R, link_r, phi, I_m, gravity, q, qd, qdd, tip_T, tau, F_star, F_B):
    R_B, _, _, _ = dyn.kinematics(axis, link_R, link_r, q)
    g_B = dyn.gravity_in_bodies(R_B, gravity)
    tau[...], F_star[...], F_B[...] = _id(axis, link_R, link_r, phi, I_m, g_B, q, qd, qdd, tip_T, True)


def _tip_from_wrench(R_T7, wrench_world):
    # the robot exerts the opposite of the wrench acting on it
    return -np.concatenate([R_T7.T @ wrench_world[:3], R_T7.T @ wrench_world[3:]])


def forward_dynamics(axis, link_R, link_r, phi, I_m, gravity, q, qd, tau, wrench_world, qdd):
    n = len(q)
    R_B, _, R_T, _ = dyn.kinematics(axis, link_R, link_r, q)
    g_B = dyn.gravity_in_bodies(R_B, gravity)
    zero = np.zeros(n)
    H = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        H[:, j] = _id(axis, link_R, link_r, phi, I_m, g_B, q, zero, e, np.zeros(6), False)[0]
    tip = _tip_from_wrench(R_T[-1], np.asarray(wrench_world))
    bias = _id(axis, link_R, link_r, phi, I_m, g_B, q, qd, zero, tip, True)[0]
    try:
        c = np.linalg.cholesky(0.5 * (H + H.T))
    except np.linalg.LinAlgError:
        raise ArithmeticError("joint-space inertia is not positive definite") from None
    qdd[...] = np.linalg.solve(c.T, np.linalg.solve(c, tau - bias))


def plant_step(axis, link_R, link_r, phi, I_m, gravity, q, qd, tau, wrench_world, h, nsub, qdd0):
    """Semi-implicit Euler over ``nsub`` sub-steps of length ``h``, inputs held."""
    qdd = np.empty(len(q))
    for k in range(nsub):
        forward_dynamics(axis, link_R, link_r, phi, I_m, gravity, q, qd, tau, wrench_world, qdd)
        if k == 0:
            qdd0[...] = qdd
        qd += h * qdd
        q += h * qd


def vdc_core(axis, link_R, link_r, gravity, q, qd, qd_r, qdd_r, fd_world,
             KD, KI, kd, kI, dt, gamma, windup, adapt,
             int_eV, int_ea, Lb, La,
             tau, V, Vr, dVr, eV, Fr, Frs, tau_rs, ea):
    """Required-velocity and required-force recursions, torque law and NAL step.

    Integrals and estimates are read at their current values, then advanced
    by one period.  Returns the number of step halvings the PD guard needed,
    summed over all subsystems.
    """
    n = len(q)
    axis = np.asarray(axis, dtype=int)
    R_B, _, R_T, _ = dyn.kinematics(axis, link_R, link_r, q)
    g_B = dyn.gravity_in_bodies(R_B, gravity)
    V[...], _, _, _ = dyn.propagate(axis, link_R, link_r, q, qd, qd, np.zeros(n))
    Vr[...], dVr[...], _, _ = dyn.propagate(axis, link_R, link_r, q, qd, qd_r, qdd_r)
    eV[...] = Vr - V
    ea[...] = qd_r - qd

    s_body = np.empty((n, 10))
    for i in range(n):
        W = dyn.rigid_body_regressor(V[i], Vr[i], dVr[i], g_B[i])
        Frs[i] = W @ nal_unmap(Lb[i]) + KD[i] * eV[i] + KI[i] * int_eV[i]
        s_body[i] = W.T @ eV[i]
    R7 = R_T[-1]
    tip = np.concatenate([R7.T @ fd_world[:3], R7.T @ fd_world[3:]])
    Fr[...] = dyn.backward_forces(axis, link_R, link_r, q, Frs, tip)

    for i in range(n):
        Wa = dyn.actuator_regressor(qdd_r[i], axis[i])
        tau_rs[i] = (Wa @ nal_unmap(La[i]))[0] + kd[i] * ea[i] + kI[i] * int_ea[i]
        tau[i] = tau_rs[i] + Fr[i, 3 + axis[i]]

    int_eV[...] = np.clip(int_eV + dt * eV, -windup, windup)
    int_ea[...] = np.clip(int_ea + dt * ea, -windup, windup)

    halvings = 0
    if adapt:
        try:
            for i in range(n):
                Lb[i], k = nal_update(Lb[i], dual_s_from_s(s_body[i]), gamma, dt)
                halvings += k
                s_a = dyn.actuator_regressor(qdd_r[i], axis[i])[0] * ea[i]
                La[i], k = nal_update(La[i], dual_s_from_s(s_a), gamma, dt)
                halvings += k
        except PhysicalConsistencyError:
            return -1
    return halvings
