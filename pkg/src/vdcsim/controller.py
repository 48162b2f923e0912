"""Subsystem-based impedance controller.

One control tick runs, in order: task-space design variable, minimum-norm
joint mapping, base-to-tip required velocities, tip-to-base required forces
with the adaptive local laws, joint torques, then integral and estimate
updates.  The hot part (recursions, torques, adaptation) runs in the
selected kernel backend; the functions in this module are the readable
reference implementation used by the tests.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dyn
from .nal import AdaptationState, dual_s_from_s, nal_map, nal_unmap, nal_update, perturbed_estimate
from .spatial import quat_error_vec

log = logging.getLogger(__name__)

DLS_THRESHOLD = 1e-4
DLS_DAMPING = 1e-3


class ControllerFault(RuntimeError):
    """Non-finite input or a failed adaptation step; the run must stop."""


def _diag6(value, name) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(6, float(arr))
    if arr.shape == (6, 6):
        if np.any(arr - np.diag(np.diag(arr))):
            raise ValueError(f"{name} must be diagonal")
        arr = np.diag(arr)
    if arr.shape != (6,):
        raise ValueError(f"{name} must be a scalar, 6-vector or 6x6 diagonal matrix")
    if not np.all(arr > 0.0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} diagonal entries must be positive and finite")
    return np.diag(arr)


@dataclass(frozen=True)
class ImpedanceTarget:
    """Desired damping/stiffness and contact force (world frame, force the robot exerts)."""

    B_d: np.ndarray
    K_d: np.ndarray
    f_d: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        object.__setattr__(self, "B_d", _diag6(self.B_d, "B_d"))
        object.__setattr__(self, "K_d", _diag6(self.K_d, "K_d"))
        f_d = np.asarray(self.f_d, dtype=float).reshape(6)
        object.__setattr__(self, "f_d", f_d)

    @classmethod
    def standard(cls) -> "ImpedanceTarget":
        return cls(40.0 * np.eye(6), 100.0 * np.diag([2.0, 2.0, 1.0, 1.0, 1.0, 1.0]))

    @property
    def gamma_f(self) -> np.ndarray:
        return np.diag(1.0 / np.diag(self.B_d))

    @property
    def gamma_x(self) -> np.ndarray:
        return self.K_d @ self.gamma_f


def _per_body(value, n, name) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full((n, 6), float(arr))
    elif arr.shape == (6,):
        arr = np.tile(arr, (n, 1))
    if arr.shape != (n, 6) or not np.all(arr > 0.0):
        raise ValueError(f"{name} must be positive: scalar, 6-vector or ({n}, 6)")
    return np.ascontiguousarray(arr)


def _per_joint(value, n, name) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,) or not np.all(arr > 0.0):
        raise ValueError(f"{name} must be positive: scalar or length-{n} vector")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True)
class ControllerGains:
    """Local feedback gains (diagonals), adaptation gain and signal-processing options.

    ``qdd_filter`` is the cut-off (Hz) of the low-pass applied to the
    differentiated required joint velocity; ``0`` disables filtering.
    """

    K_D: np.ndarray
    K_I: np.ndarray
    k_d: np.ndarray
    k_I: np.ndarray
    gamma: float = 10.0
    adapt: bool = True
    windup: float = 50.0
    qdd_filter: float = 50.0
    dls_threshold: float = DLS_THRESHOLD
    dls_damping: float = DLS_DAMPING

    @classmethod
    def uniform(cls, n, K_D=0.5, K_I=7.0, k_d=0.05, k_I=7.0, **kw) -> "ControllerGains":
        return cls(
            _per_body(K_D, n, "K_D"), _per_body(K_I, n, "K_I"),
            _per_joint(k_d, n, "k_d"), _per_joint(k_I, n, "k_I"), **kw,
        )

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise ValueError("gamma must be positive")
        if not self.windup > 0.0:
            raise ValueError("windup bound must be positive")
        if self.qdd_filter < 0.0:
            raise ValueError("qdd_filter must be >= 0")

    @property
    def n(self) -> int:
        return len(self.k_d)


# -- reference building blocks -------------------------------------------------


def pose_error(p_d, quat_d, p, quat) -> np.ndarray:
    """``[p_d - p, e_o]`` with the quaternion orientation error (world frame)."""
    return np.concatenate([np.asarray(p_d, float) - np.asarray(p, float), quat_error_vec(quat_d, quat)])


def impedance_design_variable(target: ImpedanceTarget, e, xd_d, f, f_d=None) -> np.ndarray:
    """Required task velocity ``Xd_d + Gx e + Gf (f_d - f)``."""
    f_d = target.f_d if f_d is None else np.asarray(f_d, float)
    return np.asarray(xd_d, float) + target.gamma_x @ e + target.gamma_f @ (f_d - np.asarray(f, float))


def task_to_joint(J, xd_r, threshold: float = DLS_THRESHOLD, damping: float = DLS_DAMPING):
    """Minimum-norm ``qd_r`` with ``J qd_r = xd_r``; damped near singularities.

    Returns ``(qd_r, damped)``.
    """
    JJt = J @ J.T
    sig_min = math.sqrt(max(np.linalg.eigvalsh(JJt)[0], 0.0))
    damped = sig_min < threshold
    if damped:
        JJt = JJt + damping**2 * np.eye(JJt.shape[0])
    return J.T @ np.linalg.solve(JJt, xd_r), damped


def required_velocity_recursion(robot, q, qd, qd_r, qdd_r):
    """Required body velocities and their derivatives, ``(V_r, dV_r)`` per body."""
    V_r, dV_r, _, _ = dyn.propagate(robot.axis, robot.link_R, robot.link_r, q, qd, qd_r, qdd_r)
    return V_r, dV_r


def required_force_recursion(robot, q, V, V_r, dV_r, f_d_world, gains: ControllerGains, phi_body, int_eV):
    """``(F_r, F_r_star)`` at every ``B_i``; the tip boundary is the desired force."""
    poses = robot.forward_kinematics(q)
    g_B = dyn.gravity_in_bodies(poses.R_B, robot.gravity)
    e_V = V_r - V
    F_star = np.empty((robot.n, 6))
    for i in range(robot.n):
        W = dyn.rigid_body_regressor(V[i], V_r[i], dV_r[i], g_B[i])
        F_star[i] = W @ phi_body[i] + gains.K_D[i] * e_V[i] + gains.K_I[i] * int_eV[i]
    R7 = poses.ee_rotation
    f_d_world = np.asarray(f_d_world, float)
    tip = np.concatenate([R7.T @ f_d_world[:3], R7.T @ f_d_world[3:]])
    return dyn.backward_forces(robot.axis, robot.link_R, robot.link_r, q, F_star, tip), F_star


def joint_torque(robot, qdd_r, e_a, int_ea, F_r, gains: ControllerGains, phi_act):
    """``tau_i = W_ai phi_ai + k_d e_ai + k_I int e_ai + kappa_i^T F_r,i``."""
    tau = np.empty(robot.n)
    for i in range(robot.n):
        a = int(robot.axis[i])
        tau_star = (dyn.actuator_regressor(qdd_r[i], a) @ phi_act[i])[0] + gains.k_d[i] * e_a[i] + gains.k_I[i] * int_ea[i]
        tau[i] = tau_star + F_r[i, 3 + a]
    return tau


def adaptation_step(robot, q, qd, qd_r, qdd_r, adaptation: AdaptationState, dt: float):
    """Advance every estimate by one period of the natural adaptation law."""
    V_r, dV_r = required_velocity_recursion(robot, q, qd, qd_r, qdd_r)
    V, _ = robot.body_velocity_recursion(q, qd)
    g_B = dyn.gravity_in_bodies(robot.forward_kinematics(q).R_B, robot.gravity)
    Lb, La = adaptation.L_body.copy(), adaptation.L_act.copy()
    for i in range(robot.n):
        W = dyn.rigid_body_regressor(V[i], V_r[i], dV_r[i], g_B[i])
        Lb[i], _ = nal_update(Lb[i], dual_s_from_s(W.T @ (V_r[i] - V[i])), adaptation.gamma, dt)
        s_a = dyn.actuator_regressor(qdd_r[i], int(robot.axis[i]))[0] * (qd_r[i] - qd[i])
        La[i], _ = nal_update(La[i], dual_s_from_s(s_a), adaptation.gamma, dt)
    return AdaptationState(Lb, La, adaptation.gamma)


def true_adaptation(robot, gamma: float) -> AdaptationState:
    return AdaptationState(
        np.array([nal_map(p) for p in robot.phi]), np.array([nal_map(p) for p in robot.phi_rotor]), gamma
    )


def perturbed_adaptation(robot, gamma: float, fraction: float, rng) -> AdaptationState:
    """Initial estimates with each parameter scaled by ``1 + U(-fraction, fraction)``."""
    Lb = np.array([perturbed_estimate(p, fraction, rng) for p in robot.phi])
    La = np.array([perturbed_estimate(p, fraction, rng) for p in robot.phi_rotor])
    return AdaptationState(Lb, La, gamma)


# -- stateful controller -------------------------------------------------------


@dataclass
class ControllerState:
    int_eV: np.ndarray
    int_ea: np.ndarray
    qd_r_prev: np.ndarray | None = None
    qdd_r: np.ndarray | None = None
    ticks: int = 0
    damped_ticks: int = 0

    @classmethod
    def zeros(cls, n) -> "ControllerState":
        return cls(np.zeros((n, 6)), np.zeros(n))

    def copy(self) -> "ControllerState":
        return ControllerState(
            self.int_eV.copy(), self.int_ea.copy(),
            None if self.qd_r_prev is None else self.qd_r_prev.copy(),
            None if self.qdd_r is None else self.qdd_r.copy(),
            self.ticks, self.damped_ticks,
        )


@dataclass
class TickRecord:
    """Everything one tick computed, with integrals/estimates as they were used."""

    tau: np.ndarray
    qd_r: np.ndarray
    qdd_r: np.ndarray
    V: np.ndarray
    V_r: np.ndarray
    dV_r: np.ndarray
    e_V: np.ndarray
    e_a: np.ndarray
    F_r: np.ndarray
    F_r_star: np.ndarray
    tau_r_star: np.ndarray
    int_eV: np.ndarray
    int_ea: np.ndarray
    L_body: np.ndarray
    L_act: np.ndarray
    xd_r: np.ndarray | None = None
    e: np.ndarray | None = None
    halvings: int = 0
    damped: bool = False


class VDCController:
    """Stateful controller for one simulation; ticks must be called sequentially."""

    def __init__(self, robot, gains: ControllerGains, target: ImpedanceTarget,
                 adaptation: AdaptationState, dt: float = 1e-3, kernels=None):
        if gains.n != robot.n:
            raise ValueError("gain dimensions do not match the robot")
        if not dt > 0.0:
            raise ValueError("dt must be positive")
        self.robot = robot
        self.gains = gains
        self.target = target
        self.dt = float(dt)
        self.kernels = kernels if kernels is not None else robot.kernels
        self.adaptation = adaptation.copy()
        self.state = ControllerState.zeros(robot.n)
        fc = gains.qdd_filter
        self._alpha = 1.0 if fc == 0.0 else self.dt / (self.dt + 1.0 / (2.0 * math.pi * fc))
        self._warned = False

    def reset_derivative(self):
        """Forget the previous required velocity (used at phase switches)."""
        self.state.qd_r_prev = None
        self.state.qdd_r = None

    def _qdd_r(self, qd_r):
        st = self.state
        if st.qd_r_prev is None:
            raw = np.zeros_like(qd_r)
            filt = raw
        else:
            raw = (qd_r - st.qd_r_prev) / self.dt
            filt = st.qdd_r + self._alpha * (raw - st.qdd_r)
        st.qd_r_prev = qd_r.copy()
        st.qdd_r = filt
        return filt

    def _core(self, q, qd, qd_r, qdd_r, f_d_world) -> TickRecord:
        n = self.robot.n
        st, ad, g = self.state, self.adaptation, self.gains
        rec = TickRecord(
            tau=np.empty(n), qd_r=qd_r, qdd_r=qdd_r, V=np.empty((n, 6)), V_r=np.empty((n, 6)),
            dV_r=np.empty((n, 6)), e_V=np.empty((n, 6)), e_a=np.empty(n), F_r=np.empty((n, 6)),
            F_r_star=np.empty((n, 6)), tau_r_star=np.empty(n), int_eV=st.int_eV.copy(),
            int_ea=st.int_ea.copy(), L_body=ad.L_body.copy(), L_act=ad.L_act.copy(),
        )
        r = self.robot
        halvings = self.kernels.vdc_core(
            r.axis, r.link_R, r.link_r, r.gravity, q, qd, qd_r, qdd_r, f_d_world,
            g.K_D, g.K_I, g.k_d, g.k_I, self.dt, ad.gamma, g.windup, int(g.adapt),
            st.int_eV, st.int_ea, ad.L_body, ad.L_act,
            rec.tau, rec.V, rec.V_r, rec.dV_r, rec.e_V, rec.F_r, rec.F_r_star, rec.tau_r_star, rec.e_a,
        )
        if halvings < 0:
            raise ControllerFault("adaptation left the physically consistent set")
        rec.halvings = int(halvings)
        st.ticks += 1
        return rec

    @staticmethod
    def _finite(*arrays):
        for a in arrays:
            if not np.all(np.isfinite(a)):
                raise ControllerFault("non-finite controller input")

    def joint_tick(self, q, qd, qd_r) -> TickRecord:
        """Tick with a directly prescribed required joint velocity and no tip force."""
        q = np.ascontiguousarray(q, float)
        qd = np.ascontiguousarray(qd, float)
        qd_r = np.ascontiguousarray(qd_r, float)
        self._finite(q, qd, qd_r)
        return self._core(q, qd, qd_r, self._qdd_r(qd_r), np.zeros(6))

    def task_tick(self, q, qd, p_d, quat_d, xd_d, f, f_d=None, poses=None) -> TickRecord:
        """Impedance tick: ``f`` is the measured force the robot exerts (world frame)."""
        q = np.ascontiguousarray(q, float)
        qd = np.ascontiguousarray(qd, float)
        f = np.asarray(f, float)
        self._finite(q, qd, f, p_d, quat_d, xd_d)
        f_d = self.target.f_d if f_d is None else np.asarray(f_d, float)
        if poses is None:
            poses = self.robot.forward_kinematics(q)
        J = self.robot.jacobian(q, poses)
        e = pose_error(p_d, quat_d, poses.ee_position, poses.ee_quaternion)
        xd_r = impedance_design_variable(self.target, e, xd_d, f, f_d)
        qd_r, damped = task_to_joint(J, xd_r, self.gains.dls_threshold, self.gains.dls_damping)
        if damped:
            self.state.damped_ticks += 1
            if not self._warned:
                log.warning("Jacobian near singular; using damped least squares")
                self._warned = True
        rec = self._core(q, qd, qd_r, self._qdd_r(qd_r), np.ascontiguousarray(f_d))
        rec.xd_r, rec.e, rec.damped = xd_r, e, damped
        return rec
