"""Fixed-step closed-loop simulation.

A run has two phases.  Calibration drives the joints from a seeded random
configuration to the start configuration with a joint-space required
velocity; the impedance phase then tracks a square in the world y-z plane
while the human arm and the virtual wall act on the end-effector.

Per tick: measure, evaluate the interaction, run the controller, then hold
torque and external wrench while the plant integrates ``substeps``
semi-implicit Euler steps.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .controller import (
    ControllerFault, ControllerGains, ImpedanceTarget, VDCController, perturbed_adaptation, true_adaptation,
)
from .interaction import (
    Differentiator, HumanArmModel, HumanArmState, PassivityMonitor, VirtualWall, compose_external_force,
    contact_force, human_arm_force,
)
from .robot import resolve_robot

RUNLOG_SCHEMA = "vdcsim-runlog/1"
BLOWUP_SPEED = 1e3


# -- trajectories ----------------------------------------------------------------


def quintic(p0, p1, t_f: float, t: float):
    """Rest-to-rest quintic blend; ``t`` outside ``[0, t_f]`` clamps to the ends."""
    if not t_f > 0.0:
        raise ValueError("t_f must be positive")
    p0 = np.asarray(p0, float)
    d = np.asarray(p1, float) - p0
    s = min(max(t / t_f, 0.0), 1.0)
    pos = p0 + d * (10 * s**3 - 15 * s**4 + 6 * s**5)
    if s <= 0.0 or s >= 1.0:
        return pos, np.zeros_like(d), np.zeros_like(d)
    vel = d * (30 * s**2 - 60 * s**3 + 30 * s**4) / t_f
    acc = d * (60 * s - 180 * s**2 + 120 * s**3) / t_f**2
    return pos, vel, acc


@dataclass(frozen=True)
class SquarePath:
    """Corners visited in order: start, +y, then -z, then -y, back up +z."""

    start: np.ndarray
    quat: np.ndarray
    side: float = 0.1
    t_f: float = 5.0

    def corners(self) -> np.ndarray:
        s = self.side
        c0 = np.asarray(self.start, float)
        steps = np.array([[0, 0, 0], [0, s, 0], [0, s, -s], [0, 0, -s], [0, 0, 0]], float)
        return c0 + steps

    @property
    def period(self) -> float:
        return 4.0 * self.t_f

    def __call__(self, t: float):
        """``(position, velocity, quaternion, angular velocity)`` at time ``t``."""
        c = self.corners()
        k = int(min(max(t, 0.0) // self.t_f, 3))
        pos, vel, _ = quintic(c[k], c[k + 1], self.t_f, t - k * self.t_f)
        return pos, np.concatenate([vel, np.zeros(3)]), self.quat


def square_path(path: SquarePath, t: float):
    pos, xd, quat = path(t)
    return pos, quat, xd


# -- scenario ----------------------------------------------------------------------


@dataclass(frozen=True)
class WallSpec:
    enabled: bool = True
    k_e: float = 1000.0
    element: str = "mass"
    m_d: float = 0.14
    b_e: float = 0.0
    offset: float = -0.05  # plane height relative to the start corner (m)
    accel_filter: float = 50.0
    energy_rule: str = "rectangle"
    eps: float = 1e-6


@dataclass(frozen=True)
class HumanSpec:
    enabled: bool = True
    M_h: tuple = (1.5, 1.5, 1.5, 0.01, 0.01, 0.01)
    B_h: tuple = (15.0, 15.0, 15.0, 0.1, 0.1, 0.1)
    K_h: tuple = (150.0, 150.0, 150.0, 1.0, 1.0, 1.0)


DEFAULT_START = (0.6, -0.6, 0.5, -1.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Scenario:
    robot: str = "default"
    mode: str = "pHREI"
    dt: float = 1e-3
    substeps: int = 10
    duration: float | None = None  # impedance phase; None = one full square
    seed: int = 0
    q_start: tuple = DEFAULT_START
    initial_spread: float = 0.2
    calib_gain: float = 2.0
    calib_tol: float = 1e-3
    calib_max_time: float = 15.0
    side: float = 0.1
    t_f: float = 5.0
    B_d: tuple = (40.0,) * 6
    K_d: tuple = (200.0, 200.0, 100.0, 100.0, 100.0, 100.0)
    f_d: tuple = (0.0,) * 6
    K_D: float = 0.5
    K_I: float = 7.0
    k_d: float = 0.05
    k_I: float = 7.0
    gamma: float = 10.0
    adapt: bool = True
    windup: float = 50.0
    qdd_filter: float = 50.0
    param_error: float = 0.3
    sensor_noise: float = 0.0
    wall: WallSpec = field(default_factory=WallSpec)
    human: HumanSpec = field(default_factory=HumanSpec)
    diagnostics: bool = True
    stop_on_nonpassive: bool = False

    def __post_init__(self):
        if isinstance(self.wall, dict):
            object.__setattr__(self, "wall", WallSpec(**self.wall))
        if isinstance(self.human, dict):
            object.__setattr__(self, "human", HumanSpec(**self.human))
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not self.t_f > 0.0:
            raise ValueError("t_f must be positive")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.mode not in ("pHRI", "pHREI"):
            raise ValueError("mode must be pHRI or pHREI")

    @property
    def impedance_time(self) -> float:
        return 4.0 * self.t_f if self.duration is None else self.duration

    def with_changes(self, **kw) -> "Scenario":
        wall = kw.pop("wall", None)
        human = kw.pop("human", None)
        out = replace(self, **kw)
        if isinstance(wall, dict):
            out = replace(out, wall=replace(self.wall, **wall))
        elif wall is not None:
            out = replace(out, wall=wall)
        if isinstance(human, dict):
            out = replace(out, human=replace(self.human, **human))
        elif human is not None:
            out = replace(out, human=human)
        return out

    def to_dict(self) -> dict:
        return asdict(self)


# -- run log -------------------------------------------------------------------------


def _cols(prefix, n, start=1):
    return [f"{prefix}{i}" for i in range(start, start + n)]


def runlog_columns(n: int) -> list[str]:
    return (
        ["t", "phase"] + _cols("q", n) + _cols("qd", n)
        + ["x", "y", "z", "qw", "qx", "qy", "qz"]
        + ["xd", "yd", "zd", "qwd", "qxd", "qyd", "qzd"]
        + ["ep_x", "ep_y", "ep_z", "eo_x", "eo_y", "eo_z"]
        + _cols("f", 6) + ["f_c", "penetration"] + _cols("fh", 6) + ["E_c"]
        + _cols("tau", n) + ["nu", "nu_alt", "nu_bound", "telescoping"]
        + _cols("vpf_T", n) + _cols("lmin_b", n) + _cols("lmin_a", n) + ["halvings"]
    )


@dataclass
class RunLog:
    columns: list
    data: np.ndarray
    summary: dict

    def col(self, name) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def cols(self, prefix, n) -> np.ndarray:
        return self.data[:, [self.columns.index(f"{prefix}{i}") for i in range(1, n + 1)]]

    def phase(self, k: int) -> np.ndarray:
        return self.data[self.col("phase") == k]

    def write_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write(f"# {RUNLOG_SCHEMA}\n")
            fh.write(",".join(self.columns) + "\n")
            if len(self.data):
                np.savetxt(fh, self.data, fmt="%.17g", delimiter=",")

    def write_summary(self, path):
        Path(path).write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n")


def read_runlog_csv(path):
    with open(path) as fh:
        schema = fh.readline().strip()
        header = fh.readline().strip().split(",")
    if schema != f"# {RUNLOG_SCHEMA}":
        raise ValueError(f"{path}: unexpected schema line {schema!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    return header, data


# -- engine ----------------------------------------------------------------------------


def build_controller(scn: Scenario, robot, rng):
    n = robot.n
    gains = ControllerGains.uniform(
        n, scn.K_D, scn.K_I, scn.k_d, scn.k_I, gamma=scn.gamma, adapt=scn.adapt,
        windup=scn.windup, qdd_filter=scn.qdd_filter,
    )
    target = ImpedanceTarget(np.diag(scn.B_d), np.diag(scn.K_d), np.array(scn.f_d, float))
    if scn.param_error > 0.0:
        adaptation = perturbed_adaptation(robot, scn.gamma, scn.param_error, rng)
    else:
        adaptation = true_adaptation(robot, scn.gamma)
    return VDCController(robot, gains, target, adaptation, scn.dt)


def run_scenario(scn: Scenario, robot=None) -> RunLog:
    """Execute one scenario; deterministic for a fixed ``seed``."""
    robot = robot if robot is not None else resolve_robot(scn.robot)
    n = robot.n
    rng = np.random.default_rng(scn.seed)
    q_start = np.asarray(scn.q_start, float)
    if q_start.shape != (n,):
        raise ValueError(f"q_start must have {n} entries")
    q = q_start + rng.uniform(-scn.initial_spread, scn.initial_spread, n)
    q = np.clip(q, robot.q_min, robot.q_max)
    qd = np.zeros(n)
    ctrl = build_controller(scn, robot, rng)
    noise_rng = np.random.default_rng([scn.seed, 1])
    true_ad = true_adaptation(robot, scn.gamma)
    dt, h, nsub = scn.dt, scn.dt / scn.substeps, scn.substeps
    columns = runlog_columns(n)
    rows = []
    status = "ok"
    nan7 = np.full(7, np.nan)
    diag_state = diag.DiagnosticsTracker(robot, ctrl.gains, true_ad, dt) if scn.diagnostics else None

    def record(t, phase, poses, pd, qtd, e, f, f_d, f_c, pen, f_h, E_c, rec, qdd):
        extra = [np.nan] * (4 + n)
        if diag_state is not None:
            d = diag_state.observe(q_before, qd_before, rec, qdd, f, f_d)
            extra = [d.nu, d.nu_alt, d.bound, d.telescoping, *d.vpf_T]
        lmin_b = np.linalg.eigvalsh(rec.L_body)[:, 0]
        lmin_a = np.linalg.eigvalsh(rec.L_act)[:, 0]
        rows.append(np.concatenate([
            [t, phase], q_before, qd_before, poses.ee_position, poses.ee_quaternion, pd, qtd, e,
            f, [f_c, pen], f_h, [E_c], rec.tau, extra, lmin_b, lmin_a, [rec.halvings],
        ]))

    # calibration
    t = 0.0
    calib_ticks = 0
    max_calib = int(round(scn.calib_max_time / dt))
    zero6 = np.zeros(6)
    calibrated = False
    try:
        while True:
            if np.max(np.abs(q - q_start)) < scn.calib_tol:
                calibrated = True
                break
            if calib_ticks >= max_calib:
                break
            q_before, qd_before = q.copy(), qd.copy()
            poses = robot.forward_kinematics(q)
            rec = ctrl.joint_tick(q, qd, scn.calib_gain * (q_start - q))
            try:
                qdd = robot.step(q, qd, rec.tau, zero6, h, nsub)
            except ArithmeticError:
                status = "blowup"
                break
            record(t, 1, poses, nan7[:3], nan7[:4], np.full(6, np.nan), zero6, zero6, 0.0, np.nan, zero6, 0.0, rec, qdd)
            calib_ticks += 1
            t += dt
            if not (np.all(np.isfinite(q)) and np.max(np.abs(qd)) < BLOWUP_SPEED):
                status = "blowup"
                break
    except ControllerFault as exc:
        status = f"fault: {exc}"

    # impedance phase
    poses = robot.forward_kinematics(q)
    path = SquarePath(poses.ee_position.copy(), poses.ee_quaternion, scn.side, scn.t_f)
    wall = None
    if scn.mode == "pHREI" and scn.wall.enabled:
        w = scn.wall
        wall = VirtualWall(path.start[2] + w.offset, w.k_e, w.element, w.m_d, w.b_e)
    human = HumanArmModel(scn.human.M_h, scn.human.B_h, scn.human.K_h) if scn.human.enabled else None
    hand = HumanArmState.at(poses.ee_position, poses.ee_quaternion)
    monitor = PassivityMonitor(scn.wall.energy_rule, scn.wall.eps)
    accel = Differentiator(dt, scn.wall.accel_filter)
    ctrl.reset_derivative()
    if diag_state is not None:
        diag_state.reset_boundary()
    ticks = int(round(scn.impedance_time / dt)) if status == "ok" else 0
    t0 = t
    for k in range(ticks):
        tau_rel = k * dt
        q_before, qd_before = q.copy(), qd.copy()
        poses = robot.forward_kinematics(q)
        J = robot.jacobian(q, poses)
        xdot = J @ qd
        f_c, pen = 0.0, np.nan
        axis_in = np.array([0.0, 0.0, -1.0, 0.0, 0.0, 0.0])
        if wall is not None:
            pen = wall.penetration(poses.ee_position)
            v_in = wall.inward(xdot)
            a_in = accel(v_in)
            f_c = contact_force(wall, pen, v_in, a_in)
            monitor.update(f_c, pen, v_in, dt)
            axis_in = wall.contact_axis
        f_h = zero6
        if human is not None:
            f_h, _ = human_arm_force(human, hand, poses.ee_position, poses.ee_quaternion, dt)
        f = compose_external_force(f_h, f_c, scn.mode, axis_in)
        f_meas = f + (noise_rng.normal(0.0, scn.sensor_noise, 6) if scn.sensor_noise > 0.0 else 0.0)
        pd, xd_d, qtd = path(tau_rel)
        try:
            rec = ctrl.task_tick(q, qd, pd, qtd, xd_d, f_meas, poses=poses)
        except ControllerFault as exc:
            status = f"fault: {exc}"
            break
        try:
            qdd = robot.step(q, qd, rec.tau, -f, h, nsub)
        except ArithmeticError:
            status = "blowup"
            break
        record(t, 2, poses, pd, qtd, rec.e, f, ctrl.target.f_d, f_c, pen, f_h, monitor.E_c, rec, qdd)
        t = t0 + (k + 1) * dt
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd)) and np.max(np.abs(qd)) < BLOWUP_SPEED):
            status = "blowup"
            break
        if scn.stop_on_nonpassive and not monitor.passive:
            status = "nonpassive"
            break
    if wall is not None and status == "ok" and ticks:
        # charge the final hold interval
        poses = robot.forward_kinematics(q)
        pen = wall.penetration(poses.ee_position)
        monitor.update(0.0, pen, wall.inward(robot.jacobian(q, poses) @ qd), dt)

    data = np.array(rows) if rows else np.empty((0, len(columns)))
    log = RunLog(columns, data, {})
    log.summary = summarize(log, scn, robot, status, calibrated, calib_ticks * dt, monitor, ctrl, diag_state)
    return log


def _rms(x) -> float:
    return float(np.sqrt(np.mean(np.square(x)))) if len(x) else 0.0


def summarize(log: RunLog, scn, robot, status, calibrated, calib_time, monitor, ctrl, diag_state) -> dict:
    ph = log.phase(2)
    c = log.columns.index
    ep = ph[:, [c("ep_x"), c("ep_y"), c("ep_z")]] if len(ph) else np.empty((0, 3))
    eo = ph[:, [c("eo_x"), c("eo_y"), c("eo_z")]] if len(ph) else np.empty((0, 3))
    tau = log.cols("tau", robot.n)
    eo_deg = np.degrees(np.linalg.norm(eo, axis=1)) if len(eo) else np.zeros(0)
    lmins = np.concatenate([log.cols("lmin_b", robot.n), log.cols("lmin_a", robot.n)], axis=1)
    out = {
        "schema": RUNLOG_SCHEMA,
        "status": status,
        "stable": status == "ok",
        "ticks": int(len(log.data)),
        "calibrated": bool(calibrated),
        "calibration_time": float(calib_time),
        "rms_ep_xy": _rms(np.linalg.norm(ep[:, :2], axis=1)) if len(ep) else 0.0,
        "rms_ep_z": _rms(ep[:, 2]) if len(ep) else 0.0,
        "max_ep_xy": float(np.max(np.linalg.norm(ep[:, :2], axis=1))) if len(ep) else 0.0,
        "max_ep": float(np.max(np.linalg.norm(ep, axis=1))) if len(ep) else 0.0,
        "rms_eo_deg": _rms(eo_deg),
        "max_eo_deg": float(np.max(eo_deg)) if len(eo_deg) else 0.0,
        "max_contact_force": float(np.max(ph[:, c("f_c")])) if len(ph) else 0.0,
        "rms_tau": _rms(tau.ravel()) if len(tau) else 0.0,
        "min_E_c": float(monitor.min_E_c),
        "final_E_c": float(monitor.E_c),
        "passive": bool(monitor.passive),
        "min_L_eig": float(np.min(lmins)) if lmins.size else None,
        "damped_ticks": int(ctrl.state.damped_ticks),
        "mode": scn.mode,
        "seed": scn.seed,
        "wall": asdict(scn.wall) if scn.mode == "pHREI" else None,
        "human": asdict(scn.human),
    }
    if diag_state is not None:
        out["diagnostics"] = diag_state.summary()
    return out


# -- batches ---------------------------------------------------------------------------


def _run_summary(scn: Scenario) -> dict:
    return run_scenario(scn).summary


def parallel_map(fn, items, workers: int = 1):
    """``[fn(x) for x in items]`` across processes, results in input order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_batch(scenarios, workers: int = 1) -> list[dict]:
    return parallel_map(_run_summary, scenarios, workers)
