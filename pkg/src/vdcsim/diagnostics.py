"""Power-flow bookkeeping and the accompanying (Lyapunov-like) function.

These checks use simulation privilege: the true inertial parameters and
the plant's actual accelerations are available, so every term of the
stability argument can be evaluated numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from .spatial import FrameMismatchError, SpatialForce, SpatialVelocity

TRANSIENT_TICKS = 10
LYAPUNOV_ABS_TOL = 1e-6
LYAPUNOV_REL_TOL = 1e-3


def vpf(V_r, V, F_r, F) -> float:
    """Virtual power flow ``(V_r - V)^T (F_r - F)``; frames must agree for typed inputs."""
    typed = [x for x in (V_r, V, F_r, F) if isinstance(x, (SpatialVelocity, SpatialForce))]
    if typed:
        frames = {x.frame for x in typed}
        if len(typed) != 4 or len(frames) != 1:
            raise FrameMismatchError(f"VPF operands live in different frames: {sorted(map(str, frames))}")
        V_r, V, F_r, F = (x.vector for x in (V_r, V, F_r, F))
    return float((np.asarray(V_r) - np.asarray(V)) @ (np.asarray(F_r) - np.asarray(F)))


def body_mass_matrices(robot) -> np.ndarray:
    return np.array([dyn.dynamics_terms(p, np.zeros(3), np.zeros(3))[0] for p in robot.phi])


def _bregman_batch(L_true, L_hat) -> np.ndarray:
    """Log-det divergences of stacked 4x4 pairs."""
    c_true = np.linalg.cholesky(L_true)
    c_hat = np.linalg.cholesky(L_hat)
    logdet = 2.0 * (
        np.log(np.diagonal(c_hat, axis1=1, axis2=2)).sum(1) - np.log(np.diagonal(c_true, axis1=1, axis2=2)).sum(1)
    )
    tr = np.trace(np.linalg.solve(L_hat, L_true), axis1=1, axis2=2)
    return logdet + tr - L_true.shape[-1]


@dataclass(frozen=True)
class NuTerms:
    integral_body: float
    integral_joint: float
    kinetic_body: float
    kinetic_joint: float
    bregman_body: float
    bregman_act: float
    gamma: float

    def total(self, variant: str = "both") -> float:
        """``variant="both"`` weights both divergences by gamma; ``"body"`` only the body one."""
        act = self.gamma * self.bregman_act if variant == "both" else self.bregman_act
        return (self.integral_body + self.integral_joint + self.kinetic_body + self.kinetic_joint
                + self.gamma * self.bregman_body + act)


def accompanying_terms(int_eV, int_ea, e_V, e_a, L_body, L_act, gains, M_B, I_m, L_true_body, L_true_act,
                       gamma) -> NuTerms:
    int_eV, e_V = np.asarray(int_eV), np.asarray(e_V)
    int_ea, e_a = np.asarray(int_ea), np.asarray(e_a)
    try:
        bb = _bregman_batch(np.asarray(L_true_body), np.asarray(L_body))
        ba = _bregman_batch(np.asarray(L_true_act), np.asarray(L_act))
    except np.linalg.LinAlgError:
        raise ValueError("accompanying function needs positive-definite estimates") from None
    return NuTerms(
        integral_body=0.5 * float(np.sum(int_eV * gains.K_I * int_eV)),
        integral_joint=0.5 * float(np.sum(gains.k_I * int_ea**2)),
        kinetic_body=0.5 * float(np.einsum("ni,nij,nj->", e_V, M_B, e_V)),
        kinetic_joint=0.5 * float(np.sum(I_m * e_a**2)),
        bregman_body=float(np.sum(bb)),
        bregman_act=float(np.sum(ba)),
        gamma=float(gamma),
    )


def accompanying_function(robot, gains, rec, true_adaptation, variant: str = "both") -> float:
    """Accompanying function for one tick record (estimates/integrals as used that tick)."""
    return accompanying_terms(
        rec.int_eV, rec.int_ea, rec.e_V, rec.e_a, rec.L_body, rec.L_act, gains, body_mass_matrices(robot),
        robot.rotor_inertia, true_adaptation.L_body, true_adaptation.L_act, true_adaptation.gamma,
    ).total(variant)


def dissipation_bound(e_V, e_a, gains, p_tip: float = 0.0) -> float:
    """``-sum(e_V^T K_D e_V + k_d e_a^2) - p_tip``."""
    return -float(np.sum(np.asarray(e_V) ** 2 * gains.K_D) + np.sum(gains.k_d * np.asarray(e_a) ** 2)) - p_tip


@dataclass(frozen=True)
class TelescopingResult:
    residual: float
    scale: float
    body_terms: np.ndarray  # e_V^T (F_r* - F*)
    joint_terms: np.ndarray  # e_a (tau_r* - tau*)
    p_tip: float
    vpf_T: np.ndarray

    @property
    def relative(self) -> float:
        return abs(self.residual) / self.scale if self.scale > 0.0 else 0.0


def cut_forces(robot, q, F_B, tip_T) -> np.ndarray:
    """Force each body transmits across its distal cut, in ``T_i``."""
    n = robot.n
    F_T = np.empty((n, 6))
    F_T[-1] = tip_T
    for i in range(n - 1):
        R = dyn.axis_rotation(int(robot.axis[i + 1]), q[i + 1])
        F_T[i] = np.concatenate([R @ F_B[i + 1, :3], R @ F_B[i + 1, 3:]])
    return F_T


def telescoping_check(robot, q, e_V, e_a, F_r_star, F_star, tau_r_star, tau_star, V_r_T, V_T, F_r_T, F_T):
    """Sum of body and joint power flows plus the tip flow; zero for consistent recursions.

    ``V_r_T``/``V_T``/``F_r_T``/``F_T`` are (n, 6) required/actual
    velocities and forces at every distal cut, the last row being the tip.
    """
    e_V = np.asarray(e_V)
    dF = np.asarray(F_r_star) - np.asarray(F_star)
    body = np.einsum("ni,ni->n", e_V, dF)
    joint = np.asarray(e_a) * (np.asarray(tau_r_star) - np.asarray(tau_star))
    eT = np.asarray(V_r_T) - np.asarray(V_T)
    vpf_T = np.einsum("ni,ni->n", eT, np.asarray(F_r_T) - np.asarray(F_T))
    p_tip = float(vpf_T[-1])
    residual = float(body.sum() + joint.sum() + p_tip)
    scale = float(
        np.sum(np.linalg.norm(e_V, axis=1) * (np.linalg.norm(F_r_star, axis=1) + np.linalg.norm(F_star, axis=1)))
        + np.sum(np.abs(e_a) * (np.abs(tau_r_star) + np.abs(tau_star)))
        + np.linalg.norm(eT[-1]) * (np.linalg.norm(F_r_T[-1]) + np.linalg.norm(F_T[-1]))
    )
    return TelescopingResult(residual, scale, body, joint, p_tip, vpf_T)


def tip_vpf_identity(xd_d, xdot, e, B_d, K_d):
    """Tip power flow when the force error is set by the target impedance relation.

    Returns ``(p_tip, xd_r, impedance_residual)``.  ``p_tip`` and the
    residual vanish identically; ``xd_r`` equals ``xdot``.
    """
    from .controller import ImpedanceTarget, impedance_design_variable

    target = ImpedanceTarget(B_d, K_d)
    xd_d, xdot, e = (np.asarray(x, float) for x in (xd_d, xdot, e))
    df = -target.B_d @ (xd_d - xdot) - target.K_d @ e  # f_d - f
    xd_r = impedance_design_variable(target, e, xd_d, -df, np.zeros(6))
    p_tip = float((xd_r - xdot) @ df)
    resid = -target.B_d @ (xd_d - xd_r) - target.K_d @ e - df
    return p_tip, xd_r, resid


# -- per-run tracking ------------------------------------------------------------


@dataclass(frozen=True)
class TickDiagnostics:
    nu: float
    nu_alt: float
    bound: float
    telescoping: float
    vpf_T: np.ndarray


def _rot_pair(R, x):
    return np.concatenate([R @ x[:3], R @ x[3:]])


class DiagnosticsTracker:
    """Evaluates the accompanying function and power-flow identities every tick."""

    def __init__(self, robot, gains, true_adaptation, dt: float):
        self.robot = robot
        self.dt = dt
        self.gains = gains
        self.true = true_adaptation
        self.M_B = body_mass_matrices(robot)
        self.nu, self.nu_alt, self.bound, self.tele, self.segment = [], [], [], [], []
        self._segment = 0

    def reset_boundary(self):
        """Start a new segment; differences are never taken across segments."""
        self._segment += 1

    def observe(self, q, qd, rec, qdd, f_world, f_d_world) -> TickDiagnostics:
        """``qdd`` is the plant acceleration produced by ``rec.tau`` at ``(q, qd)``."""
        r = self.robot
        terms = accompanying_terms(
            rec.int_eV, rec.int_ea, rec.e_V, rec.e_a, rec.L_body, rec.L_act, self.gains, self.M_B,
            r.rotor_inertia, self.true.L_body, self.true.L_act, self.true.gamma,
        )
        _, F_star, F_B = r.inverse_dynamics(q, qd, qdd, -np.asarray(f_world), full=True)
        tau_star = r.rotor_inertia * qdd
        poses = r.forward_kinematics(q)
        R7 = poses.ee_rotation
        n = r.n
        V_T = np.array([dyn._link_vel(r.link_R[i], r.link_r[i], rec.V[i]) for i in range(n)])
        V_r_T = np.array([dyn._link_vel(r.link_R[i], r.link_r[i], rec.V_r[i]) for i in range(n)])
        F_T = cut_forces(r, q, F_B, _rot_pair(R7.T, np.asarray(f_world)))
        F_r_T = cut_forces(r, q, rec.F_r, _rot_pair(R7.T, np.asarray(f_d_world)))
        tel = telescoping_check(r, q, rec.e_V, rec.e_a, rec.F_r_star, F_star, rec.tau_r_star, tau_star,
                                V_r_T, V_T, F_r_T, F_T)
        bound = dissipation_bound(rec.e_V, rec.e_a, self.gains, tel.p_tip)
        out = TickDiagnostics(terms.total("both"), terms.total("body"), bound, tel.relative, tel.vpf_T)
        self.nu.append(out.nu)
        self.nu_alt.append(out.nu_alt)
        self.bound.append(bound)
        self.tele.append(tel.relative)
        self.segment.append(self._segment)
        return out

    def summary(self) -> dict:
        if not self.nu:
            return {"ticks": 0}
        rep = lyapunov_decrease_check(np.array(self.nu), np.array(self.bound), self.dt, np.array(self.segment))
        alt = lyapunov_decrease_check(np.array(self.nu_alt), np.array(self.bound), self.dt, np.array(self.segment))
        return {
            "ticks": len(self.nu),
            "nu_min": float(np.min(self.nu)),
            "nu_initial": float(self.nu[0]),
            "nu_final": float(self.nu[-1]),
            "telescoping_max_relative": float(np.max(self.tele)),
            "lyapunov": rep.as_dict(),
            "lyapunov_gamma_body_only": alt.as_dict(),
        }


@dataclass(frozen=True)
class LyapunovReport:
    checked: int
    bound_violations: np.ndarray  # tick indices where dnu/dt exceeds the dissipation bound + tol
    increase_violations: np.ndarray  # tick indices where nu grows by more than tol
    worst_excess: float
    worst_increase: float

    @property
    def ok(self) -> bool:
        return self.bound_violations.size == 0

    @property
    def non_increasing(self) -> bool:
        return self.increase_violations.size == 0

    def as_dict(self) -> dict:
        return {
            "checked": int(self.checked),
            "bound_violations": int(self.bound_violations.size),
            "increase_violations": int(self.increase_violations.size),
            "first_bound_violation": int(self.bound_violations[0]) if self.bound_violations.size else None,
            "worst_excess": float(self.worst_excess),
            "worst_increase": float(self.worst_increase),
        }


def lyapunov_decrease_check(nu, bound, dt, segment=None, transient: int = TRANSIENT_TICKS,
                            abs_tol: float = LYAPUNOV_ABS_TOL, rel_tol: float = LYAPUNOV_REL_TOL) -> LyapunovReport:
    """Compare ``(nu[k+1] - nu[k]) / dt`` with the dissipation bound averaged over the step.

    Ticks within ``transient`` of the start of a segment are skipped.  Two
    verdicts are reported: excess over the bound, and plain increase of
    ``nu``; both use the tolerance ``max(abs_tol, rel_tol * |bound|)``.
    """
    nu = np.asarray(nu, float)
    bound = np.asarray(bound, float)
    segment = np.zeros(len(nu), int) if segment is None else np.asarray(segment)
    if len(nu) < 2:
        return LyapunovReport(0, np.zeros(0, int), np.zeros(0, int), 0.0, 0.0)
    rate = np.diff(nu) / dt
    b = 0.5 * (bound[:-1] + bound[1:])
    tol = np.maximum(abs_tol, rel_tol * np.abs(b))
    same = segment[1:] == segment[:-1]
    # ticks since the start of the segment
    starts = np.r_[0, np.flatnonzero(np.diff(segment)) + 1]
    age = np.arange(len(nu)) - starts[np.searchsorted(starts, np.arange(len(nu)), side="right") - 1]
    mask = same & (age[:-1] >= transient)
    idx = np.flatnonzero(mask)
    excess = rate[idx] - b[idx] - tol[idx]
    inc = rate[idx] - tol[idx]
    return LyapunovReport(
        checked=len(idx),
        bound_violations=idx[excess > 0.0],
        increase_violations=idx[inc > 0.0],
        worst_excess=float(np.max(rate[idx] - b[idx])) if len(idx) else 0.0,
        worst_increase=float(np.max(rate[idx])) if len(idx) else 0.0,
    )
