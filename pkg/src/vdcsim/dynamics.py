"""Rigid-body terms and chain recursions in body-fixed frames.

Each body ``i`` carries two frames: ``B_i`` at its joint and ``T_i`` at the
cut toward body ``i+1``.  Joint ``i`` rotates ``B_i`` relative to ``T_{i-1}``
about the coordinate axis ``axis[i]`` (0=x, 1=y, 2=z) with no offset, so the
joint selector is the unit 6-vector ``e_{3+axis[i]}``.  ``link_R[i]`` and
``link_r[i]`` give the fixed pose of ``T_i`` in ``B_i``.  ``T_0`` is the
ground frame.

Everything here is plain numpy and doubles as the reference the compiled
kernels are tested against.
"""

from __future__ import annotations

import numpy as np

from .spatial import axis_rotation, cross3, skew


def kappa(axis: int) -> np.ndarray:
    k = np.zeros(6)
    k[3 + axis] = 1.0
    return k


def inertia_times(y) -> np.ndarray:
    """3x6 matrix ``K`` with ``I @ y == K(y) @ vecI``."""
    y0, y1, y2 = y
    return np.array(
        [
            [y0, 0.0, 0.0, y1, 0.0, y2],
            [0.0, y1, 0.0, y0, y2, 0.0],
            [0.0, 0.0, y2, 0.0, y1, y0],
        ]
    )


def rigid_body_regressor(V, Vr, dVr, g_body) -> np.ndarray:
    """6x10 ``W`` such that ``W @ phi == M dVr + C(w) Vr + G``.

    ``C(w)`` is the skew-symmetric Coriolis matrix built from the actual
    angular velocity ``w = V[3:]``; gravity enters as ``-m g`` and
    ``-h x g``.
    """
    w = np.asarray(V[3:], dtype=float)
    vr, wr = np.asarray(Vr[:3]), np.asarray(Vr[3:])
    ar, alr = np.asarray(dVr[:3]), np.asarray(dVr[3:])
    b = ar + cross3(w, vr) - np.asarray(g_body)
    W = np.zeros((6, 10))
    W[:3, 0] = b
    W[:3, 1:4] = skew(alr) + np.outer(wr, w) - (w @ wr) * np.eye(3)
    W[3:, 1:4] = -skew(b)
    W[3:, 4:] = inertia_times(alr) + skew(wr) @ inertia_times(w)
    return W


def actuator_regressor(qdd_r: float, axis: int) -> np.ndarray:
    """1x10 row picking the rotor inertia about the joint axis."""
    W = np.zeros((1, 10))
    W[0, 4 + axis] = qdd_r
    return W


def dynamics_terms(phi, w, g_body):
    """Explicit ``M``, ``C(w)`` and ``G`` of one body for parameters ``phi``."""
    m, h = phi[0], np.asarray(phi[1:4])
    xx, yy, zz, xy, yz, xz = phi[4:]
    I = np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])
    M = np.zeros((6, 6))
    M[:3, :3] = m * np.eye(3)
    M[:3, 3:] = -skew(h)
    M[3:, :3] = skew(h)
    M[3:, 3:] = I
    W = skew(w)
    C = np.zeros((6, 6))
    C[:3, :3] = m * W
    C[:3, 3:] = -W @ skew(h)
    C[3:, :3] = skew(h) @ W
    C[3:, 3:] = -skew(I @ w)
    g_body = np.asarray(g_body)
    G = np.concatenate([-m * g_body, -cross3(h, g_body)])
    return M, C, G


def link_transform(R, r) -> np.ndarray:
    U = np.zeros((6, 6))
    U[:3, :3] = R
    U[3:, 3:] = R
    U[3:, :3] = skew(r) @ R
    return U


def kinematics(axis, link_R, link_r, q):
    """World rotations/positions of every ``B_i`` and ``T_i``."""
    n = len(q)
    R_B = np.empty((n, 3, 3))
    p_B = np.empty((n, 3))
    R_T = np.empty((n, 3, 3))
    p_T = np.empty((n, 3))
    R = np.eye(3)
    p = np.zeros(3)
    for i in range(n):
        R = R @ axis_rotation(int(axis[i]), q[i])
        R_B[i], p_B[i] = R, p
        p = p + R @ link_r[i]
        R = R @ link_R[i]
        R_T[i], p_T[i] = R, p
    return R_B, p_B, R_T, p_T


def geometric_jacobian(axis, R_B, p_B, p_ee) -> np.ndarray:
    """6xn world Jacobian of the end-effector point and angular velocity."""
    n = len(axis)
    z = R_B[np.arange(n), :, np.asarray(axis, dtype=int)]
    J = np.empty((6, n))
    r = p_ee - p_B
    J[0] = z[:, 1] * r[:, 2] - z[:, 2] * r[:, 1]
    J[1] = z[:, 2] * r[:, 0] - z[:, 0] * r[:, 2]
    J[2] = z[:, 0] * r[:, 1] - z[:, 1] * r[:, 0]
    J[3:] = z.T
    return J


def _rotT(R, x):
    return np.concatenate([R.T @ x[:3], R.T @ x[3:]])


def _link_vel(R, r, V):
    """``U^T V`` for the fixed link transform: velocity of ``T`` from that of ``B``."""
    v, w = V[:3], V[3:]
    return np.concatenate([R.T @ (v + cross3(w, r)), R.T @ w])


def propagate(axis, link_R, link_r, q, qd_frame, qd, qdd):
    """Base-to-tip recursion of velocities and their time derivatives.

    ``qd_frame`` are the actual joint rates that move the frames; ``qd`` and
    ``qdd`` are the rates being propagated (actual ones for the plant,
    required ones for the controller).  Returns ``V_B, dV_B, V_T, dV_T``.
    """
    n = len(q)
    V_B = np.empty((n, 6))
    dV_B = np.empty((n, 6))
    V_T = np.empty((n, 6))
    dV_T = np.empty((n, 6))
    Vp = np.zeros(6)
    dVp = np.zeros(6)
    for i in range(n):
        a = int(axis[i])
        R = axis_rotation(a, q[i])
        x = _rotT(R, Vp)
        k = kappa(a)
        V = k * qd[i] + x
        ax = np.zeros(3)
        ax[a] = 1.0
        rate = -qd_frame[i] * np.concatenate([cross3(ax, x[:3]), cross3(ax, x[3:])])
        dV = k * qdd[i] + _rotT(R, dVp) + rate
        V_B[i], dV_B[i] = V, dV
        Vp = _link_vel(link_R[i], link_r[i], V)
        dVp = _link_vel(link_R[i], link_r[i], dV)
        V_T[i], dV_T[i] = Vp, dVp
    return V_B, dV_B, V_T, dV_T


def body_velocities(axis, link_R, link_r, q, qd):
    V_B, _, V_T, _ = propagate(axis, link_R, link_r, q, qd, qd, np.zeros(len(q)))
    return V_B, V_T


def backward_forces(axis, link_R, link_r, q, F_star, tip_T):
    """Tip-to-base force recursion; returns the forces at every ``B_i``."""
    n = len(q)
    F_B = np.empty((n, 6))
    F_T = np.asarray(tip_T, dtype=float)
    for i in range(n - 1, -1, -1):
        F = F_star[i] + link_transform(link_R[i], link_r[i]) @ F_T
        F_B[i] = F
        R = axis_rotation(int(axis[i]), q[i])
        F_T = np.concatenate([R @ F[:3], R @ F[3:]])
    return F_B


def gravity_in_bodies(R_B, gravity) -> np.ndarray:
    return np.einsum("nji,j->ni", R_B, gravity)
