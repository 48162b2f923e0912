"""Batch protocols: Z-width sweeps, tracking presets and the invariant verification suite."""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from . import dynamics as dyn
from . import nal
from .controller import (
    ControllerGains, ImpedanceTarget, VDCController, true_adaptation,
)
from .interaction import PassivityMonitor, VirtualWall, contact_force
from .robot import default_robot, planar_two_link
from .sim import Scenario, parallel_map, quintic, run_scenario

ZWIDTH_SCHEMA = "vdcsim-zwidth/1"


def _grid(start, stop, step):
    count = int(round((stop - start) / step)) + 1
    return tuple(round(start + k * step, 10) for k in range(count))


def zwidth_template() -> Scenario:
    """Contact scenario used for every Z-width grid point.

    Fast square path, no start-pose scatter, diagnostics off, and the run is
    cut short as soon as the contact energy goes negative.
    """
    return Scenario(t_f=2.0, initial_spread=0.0, diagnostics=False, stop_on_nonpassive=True)


@dataclass(frozen=True)
class ZWidthSpec:
    damping_grid: tuple = _grid(0.0, 60.0, 5.0)
    mass_grid: tuple = _grid(0.0, 1.68, 0.14)
    k_max: float = 20000.0
    resolution: float = 10.0
    template: Scenario = field(default_factory=zwidth_template)

    def __post_init__(self):
        for name in ("damping_grid", "mass_grid"):
            g = tuple(float(v) for v in getattr(self, name))
            if not g:
                raise ValueError(f"{name} must not be empty")
            if any(b <= a for a, b in zip(g, g[1:])) or g[0] < 0.0:
                raise ValueError(f"{name} must be ascending and non-negative")
            object.__setattr__(self, name, g)
        if not (self.resolution > 0.0 and self.k_max >= self.resolution):
            raise ValueError("need k_max >= resolution > 0")

    def points(self):
        return [("mass", v) for v in self.mass_grid] + [("damping", v) for v in self.damping_grid]

    def fingerprint(self) -> str:
        blob = json.dumps(
            {"d": self.damping_grid, "m": self.mass_grid, "k": self.k_max, "r": self.resolution,
             "t": self.template.to_dict()}, sort_keys=True, default=str,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ZWidthPoint:
    element: str
    value: float
    k_e_max: float
    min_E_c: float
    evaluations: int
    note: str = ""


@dataclass
class ZWidthCurve:
    element: str
    points: list

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points])

    @property
    def k_e_max(self) -> np.ndarray:
        return np.array([p.k_e_max for p in self.points])

    def monotone(self) -> bool:
        k = self.k_e_max
        return bool(np.all(np.diff(k) >= 0.0))

    def critical_value(self):
        """Smallest element value whose limit exceeds the zero-element baseline."""
        base = self.points[0].k_e_max
        for p in self.points:
            if p.k_e_max > base:
                return p.value
        return None


def contact_scenario(template: Scenario, element: str, value: float, k_e: float) -> Scenario:
    wall = {"k_e": float(k_e), "element": element}
    if element == "mass":
        wall["m_d"] = float(value)
    elif element == "damping":
        wall["b_e"] = float(value)
    return template.with_changes(mode="pHREI", wall=wall)


def _passive_run(template, element, value, k_e):
    s = run_scenario(contact_scenario(template, element, value, k_e)).summary
    return s["status"] == "ok" and s["passive"], s["min_E_c"], s["status"]


def max_passive_stiffness(element: str, value: float, template: Scenario | None = None,
                          k_max: float = 20000.0, resolution: float = 10.0) -> ZWidthPoint:
    """Largest stiffness on the ``resolution`` grid that stays passive and bounded.

    Assumes passivity is lost once and for all above the limit; the bracket
    ``[k*, k* + resolution]`` is verified by construction.
    """
    template = zwidth_template() if template is None else template
    steps = int(math.floor(k_max / resolution + 1e-9))
    ok, e0, status = _passive_run(template, element, value, 0.0)
    evals = 1
    if not ok:
        return ZWidthPoint(element, value, 0.0, e0, evals, f"not passive at k_e = 0 ({status})")
    best_E = e0
    ok, e_hi, _ = _passive_run(template, element, value, steps * resolution)
    evals += 1
    if ok:
        return ZWidthPoint(element, value, steps * resolution, e_hi, evals, "passive at k_max")
    lo, hi = 0, steps
    while hi - lo > 1:
        mid = (lo + hi) // 2
        ok, e_mid, _ = _passive_run(template, element, value, mid * resolution)
        evals += 1
        if ok:
            lo, best_E = mid, e_mid
        else:
            hi = mid
    return ZWidthPoint(element, value, lo * resolution, best_E, evals)


def _zwidth_point(args):
    spec, element, value = args
    return max_passive_stiffness(element, value, spec.template, spec.k_max, spec.resolution)


def _load_checkpoint(path, fingerprint):
    done = {}
    if path is None or not Path(path).exists():
        return done
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("spec") != fingerprint:
            continue
        done[(rec["element"], rec["value"])] = ZWidthPoint(**rec["point"])
    return done


def zwidth_sweep(spec: ZWidthSpec | None = None, workers: int = 1, checkpoint=None, progress=None):
    """Both Z-width curves, ``(mass_curve, damping_curve)``.

    Finished grid points are appended to ``checkpoint`` (JSON lines) as they
    complete so an interrupted sweep resumes where it stopped.
    """
    spec = ZWidthSpec() if spec is None else spec
    fp = spec.fingerprint()
    done = _load_checkpoint(checkpoint, fp)
    todo = [(e, v) for e, v in spec.points() if (e, v) not in done]
    # chunks of one worker-width keep checkpointing useful under parallelism
    chunk = max(1, workers)
    for start in range(0, len(todo), chunk):
        batch = todo[start:start + chunk]
        results = parallel_map(_zwidth_point, [(spec, e, v) for e, v in batch], workers)
        for (e, v), pt in zip(batch, results):
            done[(e, v)] = pt
            if checkpoint is not None:
                with open(checkpoint, "a") as fh:
                    fh.write(json.dumps({"spec": fp, "element": e, "value": v, "point": asdict(pt)}, sort_keys=True) + "\n")
            if progress is not None:
                progress(pt)
    mass = ZWidthCurve("mass", [done[("mass", v)] for v in spec.mass_grid])
    damping = ZWidthCurve("damping", [done[("damping", v)] for v in spec.damping_grid])
    return mass, damping


def write_zwidth(curves, spec: ZWidthSpec, out_dir) -> dict:
    """Curve CSVs plus a JSON summary; returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"schema": ZWIDTH_SCHEMA, "spec": spec.fingerprint(), "k_max": spec.k_max,
               "resolution": spec.resolution, "human": asdict(spec.template.human),
               "impedance": {"B_d": list(spec.template.B_d), "K_d": list(spec.template.K_d)}, "curves": {}}
    for c in curves:
        with open(out / f"zwidth_{c.element}.csv", "w") as fh:
            fh.write(f"# {ZWIDTH_SCHEMA}\n")
            fh.write("element_value,k_e_max,min_Ec\n")
            for p in c.points:
                fh.write(f"{p.value!r},{p.k_e_max!r},{p.min_E_c!r}\n")
        summary["curves"][c.element] = {
            "monotone": c.monotone(), "critical_value": c.critical_value(),
            "points": [asdict(p) for p in c.points],
        }
    (out / "zwidth_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# -- tracking ------------------------------------------------------------------------

PRESETS = {
    "slow": {"t_f": 5.0, "wall": {"k_e": 1000.0, "element": "mass", "m_d": 0.14}},
    "fast": {"t_f": 2.0, "wall": {"k_e": 1000.0, "element": "mass", "m_d": 0.14}},
    "stiff": {"t_f": 5.0, "wall": {"k_e": 1500.0, "element": "mass", "m_d": 0.14}},
}

TRACKING_METRICS = ("rms_ep_xy", "rms_ep_z", "rms_eo_deg", "max_contact_force", "rms_tau",
                    "max_ep_xy", "max_eo_deg", "min_E_c", "passive", "stable", "status")


def tracking_scenario(t_f=5.0, k_e=1000.0, m_d=0.14, base: Scenario | None = None, **changes) -> Scenario:
    base = Scenario() if base is None else base
    wall = {"k_e": float(k_e), "element": "mass", "m_d": float(m_d)}
    wall.update(changes.pop("wall", {}))
    return base.with_changes(t_f=float(t_f), wall=wall, **changes)


def tracking_experiment(t_f=5.0, k_e=1000.0, m_d=0.14, base: Scenario | None = None, **changes) -> dict:
    s = run_scenario(tracking_scenario(t_f, k_e, m_d, base, **changes)).summary
    return {k: s[k] for k in TRACKING_METRICS}


# -- Lyapunov regulation -------------------------------------------------------------


@dataclass
class RegulationResult:
    report: diag.LyapunovReport
    nu: np.ndarray
    bound: np.ndarray
    telescoping_max: float
    final_error: float
    stable: bool
    alt_report: diag.LyapunovReport | None = None  # gamma on the body divergence only


def regulation_lyapunov(scn: Scenario | None = None, duration: float = 5.0, gain_sign: float = 1.0,
                        robot=None) -> RegulationResult:
    """Free-motion joint regulation with the accompanying function tracked every tick.

    The controller starts away from ``q_start`` and drives ``qd_r = calib_gain (q_start - q)``.
    ``gain_sign = -1`` flips the body and joint feedback gains inside the
    controller only; the check keeps the nominal gains, so the injected fault
    must show up as violations.
    """
    from .controller import perturbed_adaptation

    scn = Scenario() if scn is None else scn
    robot = default_robot() if robot is None else robot
    rng = np.random.default_rng(scn.seed)
    n = robot.n
    q_t = np.asarray(scn.q_start, float)
    q = np.clip(q_t + rng.uniform(-scn.initial_spread, scn.initial_spread, n), robot.q_min, robot.q_max)
    qd = np.zeros(n)
    nominal = ControllerGains.uniform(n, scn.K_D, scn.K_I, scn.k_d, scn.k_I, gamma=scn.gamma, adapt=scn.adapt,
                                      windup=scn.windup, qdd_filter=scn.qdd_filter)
    used = replace(nominal, K_D=gain_sign * nominal.K_D, k_d=gain_sign * nominal.k_d)
    est = (perturbed_adaptation(robot, scn.gamma, scn.param_error, rng) if scn.param_error > 0
           else true_adaptation(robot, scn.gamma))
    ctrl = VDCController(robot, used, ImpedanceTarget.standard(), est, scn.dt)
    tracker = diag.DiagnosticsTracker(robot, nominal, true_adaptation(robot, scn.gamma), scn.dt)
    zero6 = np.zeros(6)
    h = scn.dt / scn.substeps
    stable = True
    for _ in range(int(round(duration / scn.dt))):
        q0, qd0 = q.copy(), qd.copy()
        rec = ctrl.joint_tick(q, qd, scn.calib_gain * (q_t - q))
        try:
            qdd = robot.step(q, qd, rec.tau, zero6, h, scn.substeps)
        except ArithmeticError:
            stable = False
            break
        tracker.observe(q0, qd0, rec, qdd, zero6, zero6)
        if not (np.all(np.isfinite(q)) and np.max(np.abs(qd)) < 1e3):
            stable = False
            break
    nu, bound = np.array(tracker.nu), np.array(tracker.bound)
    report = diag.lyapunov_decrease_check(nu, bound, scn.dt)
    alt = diag.lyapunov_decrease_check(np.array(tracker.nu_alt), bound, scn.dt)
    return RegulationResult(report, nu, bound, float(np.max(tracker.tele)) if tracker.tele else 0.0,
                            float(np.max(np.abs(q - q_t))), stable, alt)


# -- verification suite --------------------------------------------------------------


@dataclass
class PropertyResult:
    name: str
    tolerance: float
    count: int
    worst: float
    passed: bool
    counterexample: dict | None = None
    seconds: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.name:<28} n={self.count:<6} worst={self.worst:.3e} tol={self.tolerance:.1e}"


def _random_phi(rng):
    m = rng.uniform(0.2, 3.0)
    com = rng.uniform(-0.2, 0.2, 3)
    A = rng.normal(size=(3, 3))
    ev = rng.uniform(0.5, 2.0, 3) * 1e-3
    Q, _ = np.linalg.qr(A)
    # triangle inequality holds for any PD diagonal pushed through a rotation when eigenvalues are close
    ev = np.sort(ev)
    ev[2] = min(ev[2], ev[0] + ev[1] - 1e-6)
    I = Q @ np.diag(ev) @ Q.T
    return nal.params_from_physical(m, com, I)


def _random_pd(rng, n=4):
    A = rng.normal(size=(n, n))
    return A @ A.T + 0.1 * np.eye(n)


class _Worst:
    def __init__(self):
        self.value = 0.0
        self.example = None

    def see(self, err, **example):
        if not np.isfinite(err) or err > self.value:
            self.value = float(err) if np.isfinite(err) else math.inf
            self.example = {k: np.asarray(v).tolist() for k, v in example.items()}


def check_regressor_identity(rng, count=1000, regressor=None):
    regressor = dyn.rigid_body_regressor if regressor is None else regressor
    w = _Worst()
    for _ in range(count):
        phi = _random_phi(rng)
        V, Vr, dVr = rng.normal(size=(3, 6))
        g = rng.normal(size=3) * 9.81
        M, C, G = dyn.dynamics_terms(phi, V[3:], g)
        direct = M @ dVr + C @ Vr + G
        err = np.linalg.norm(regressor(V, Vr, dVr, g) @ phi - direct) / max(np.linalg.norm(direct), 1e-12)
        w.see(err, phi=phi, V=V, Vr=Vr, dVr=dVr, g=g)
    return w


def check_nal_roundtrip(rng, count=1000):
    w = _Worst()
    for _ in range(count):
        phi = _random_phi(rng)
        back = nal.nal_unmap(nal.nal_map(phi))
        w.see(np.max(np.abs(back - phi)) / np.max(np.abs(phi)), phi=phi)
    return w


def check_bregman_nonneg(rng, count=10000):
    w = _Worst()
    for _ in range(count):
        A, B = _random_pd(rng), _random_pd(rng)
        d = nal.bregman_divergence(A, B)
        w.see(max(-d, 0.0), A=A, B=B)
    return w


def check_bregman_closed_form(rng, count=1):
    w = _Worst()
    d = nal.bregman_divergence(np.eye(4), 2.0 * np.eye(4))
    w.see(abs(d - (4.0 * math.log(2.0) - 2.0)), value=d)
    return w


def check_bregman_rate(rng, count=200):
    w = _Worst()
    h = 1e-6
    for _ in range(count):
        A, B = _random_pd(rng), _random_pd(rng)
        Bdot = rng.normal(size=(4, 4))
        Bdot = 0.5 * (Bdot + Bdot.T)
        fd = (nal.bregman_divergence(A, B + h * Bdot) - nal.bregman_divergence(A, B - h * Bdot)) / (2 * h)
        an = nal.bregman_rate(A, B, Bdot)
        w.see(abs(fd - an) / max(1.0, abs(an)), A=A, B=B, Bdot=Bdot)
    return w


def _random_impedance(rng):
    B = np.diag(rng.uniform(5.0, 80.0, 6))
    K = np.diag(rng.uniform(10.0, 400.0, 6))
    xd_d, xdot, e = rng.normal(size=(3, 6))
    return xd_d, xdot, e, B, K


def check_impedance_recovery(rng, count=1000):
    w = _Worst()
    for _ in range(count):
        xd_d, xdot, e, B, K = _random_impedance(rng)
        _, xd_r, resid = diag.tip_vpf_identity(xd_d, xdot, e, B, K)
        scale = np.linalg.norm(B @ xd_d) + np.linalg.norm(K @ e) + np.linalg.norm(B @ xdot)
        err = max(np.linalg.norm(resid) / scale, np.linalg.norm(xd_r - xdot) / max(np.linalg.norm(xdot), 1.0))
        w.see(err, xd_d=xd_d, xdot=xdot, e=e)
    return w


def check_tip_vpf(rng, count=1000):
    w = _Worst()
    for _ in range(count):
        xd_d, xdot, e, B, K = _random_impedance(rng)
        p, _, _ = diag.tip_vpf_identity(xd_d, xdot, e, B, K)
        scale = np.linalg.norm(xdot) * (np.linalg.norm(B @ (xd_d - xdot)) + np.linalg.norm(K @ e))
        w.see(abs(p) / max(scale, 1e-300), xd_d=xd_d, xdot=xdot, e=e)
    return w


def _random_tick(robot, rng, adapt_error=0.3):
    """One controller tick from a random state, plus the plant response to it."""
    from .controller import perturbed_adaptation

    n = robot.n
    gains = ControllerGains.uniform(n)
    truth = true_adaptation(robot, 10.0)
    est = perturbed_adaptation(robot, 10.0, adapt_error, rng)
    ctrl = VDCController(robot, gains, ImpedanceTarget.standard(), est)
    q = rng.uniform(-1.2, 1.2, n)
    qd = rng.normal(size=n)
    ctrl.state.int_eV[:] = rng.normal(size=(n, 6))
    ctrl.state.int_ea[:] = rng.normal(size=n)
    ctrl.state.qd_r_prev = rng.normal(size=n)
    ctrl.state.qdd_r = rng.normal(size=n)
    f = rng.normal(size=6) * 5.0
    f_d = rng.normal(size=6)
    poses = robot.forward_kinematics(q)
    rec = ctrl.task_tick(q, qd, poses.ee_position + 0.01 * rng.normal(size=3), poses.ee_quaternion,
                         rng.normal(size=6) * 0.1, f, f_d=f_d)
    qdd = robot.forward_dynamics(q, qd, rec.tau, -f)
    return dict(q=q, qd=qd, rec=rec, qdd=qdd, f=f, f_d=f_d, gains=gains, truth=truth, dt=ctrl.dt)


def check_telescoping(rng, count=200, robot=None):
    robot = default_robot() if robot is None else robot
    w = _Worst()
    for _ in range(count):
        t = _random_tick(robot, rng)
        tracker = diag.DiagnosticsTracker(robot, t["gains"], t["truth"], t["dt"])
        d = tracker.observe(t["q"], t["qd"], t["rec"], t["qdd"], t["f"], t["f_d"])
        w.see(d.telescoping, q=t["q"], qd=t["qd"])
    return w


def check_nu_nonneg(rng, count=200, robot=None):
    robot = default_robot() if robot is None else robot
    w = _Worst()
    for _ in range(count):
        t = _random_tick(robot, rng)
        nu = diag.accompanying_function(robot, t["gains"], t["rec"], t["truth"])
        w.see(max(-nu, 0.0), q=t["q"], qd=t["qd"])
    return w


def two_link_lagrangian_torque(q, qd, qdd, l1=0.4, l2=0.3, m1=1.2, m2=0.8, rotor=(0.01, 0.01),
                               I_c=(1e-6, 1e-6), g=9.81):
    """Closed-form Euler-Lagrange torques of the planar two-link arm (gravity along -y)."""
    c2, s2 = math.cos(q[1]), math.sin(q[1])
    M11 = m1 * l1**2 + I_c[0] + m2 * (l1**2 + l2**2 + 2 * l1 * l2 * c2) + I_c[1] + rotor[0]
    M12 = m2 * (l2**2 + l1 * l2 * c2) + I_c[1]
    M22 = m2 * l2**2 + I_c[1] + rotor[1]
    hc = m2 * l1 * l2 * s2
    G1 = (m1 + m2) * l1 * g * math.cos(q[0]) + m2 * l2 * g * math.cos(q[0] + q[1])
    G2 = m2 * l2 * g * math.cos(q[0] + q[1])
    return np.array([
        M11 * qdd[0] + M12 * qdd[1] - hc * (2 * qd[0] * qd[1] + qd[1] ** 2) + G1,
        M12 * qdd[0] + M22 * qdd[1] + hc * qd[0] ** 2 + G2,
    ])


def check_two_link_lagrangian(rng, count=200):
    robot = planar_two_link()
    w = _Worst()
    for _ in range(count):
        q, qd, qdd = rng.uniform(-2, 2, (3, 2))
        tau = robot.inverse_dynamics(q, qd, qdd)
        ref = two_link_lagrangian_torque(q, qd, qdd)
        w.see(np.max(np.abs(tau - ref)) / max(1.0, np.max(np.abs(ref))), q=q, qd=qd, qdd=qdd)
    return w


def check_energy_conservation(rng, count=2, duration=10.0, h=1e-4):
    """Unforced, gravity-free motion keeps its kinetic energy."""
    cases = [
        (planar_two_link(gravity=(0.0, 0.0, 0.0)), [0.7, -0.4], [0.5, -1.0]),
        (default_robot().with_gravity((0.0, 0.0, 0.0)), [0.6, -0.6, 0.5, -1.0, 0.0, 0.0, 0.0],
         [0.5, -0.5, 0.5, 0.5, -0.5, 0.5, -0.5]),
    ]
    w = _Worst()
    for robot, q0, qd0 in cases[:count]:
        q, qd = np.array(q0, float), np.array(qd0, float)
        E0 = robot.kinetic_energy(q, qd)
        tau, f = np.zeros(robot.n), np.zeros(6)
        for _ in range(int(round(duration / h)) // 100):
            robot.step(q, qd, tau, f, h, 100)
            w.see(abs(robot.kinetic_energy(q, qd) - E0) / E0, robot=robot.name, q0=q0, qd0=qd0)
    return w


def check_spring_cycle(rng, count=1):
    """Pure spring pressed in and released by a prescribed sinusoid."""
    wall = VirtualWall(0.0, 1000.0)
    mon = PassivityMonitor()
    dt, T = 1e-3, 1.0
    z = lambda t: -0.01 * math.sin(math.pi * t / T)
    for k in range(int(T / dt) + 1):
        t = k * dt
        zdot = -0.01 * math.pi / T * math.cos(math.pi * t / T)
        pen = wall.penetration([0, 0, z(t)])
        mon.update(contact_force(wall, pen, -zdot, 0.0), pen, -zdot, dt)
    w = _Worst()
    w.see(abs(mon.E_c), E_c=mon.E_c)
    return w


def check_quintic_peak(rng, count=50):
    w = _Worst()
    for _ in range(count):
        t_f = rng.uniform(0.5, 10.0)
        _, v, _ = quintic(0.0, 1.0, t_f, t_f / 2)
        w.see(abs(float(v) - 15.0 / (8.0 * t_f)), t_f=t_f)
    return w


def check_backend_agreement(rng, count=50):
    from . import backend
    w = _Worst()
    if "c" not in backend.available():
        return w
    r_c = default_robot().with_kernels(backend.load("c"))
    r_py = default_robot().with_kernels(backend.load("python"))
    for _ in range(count):
        q, qd, tau = rng.uniform(-1.5, 1.5, (3, 7))
        f = rng.normal(size=6)
        a = r_c.forward_dynamics(q, qd, tau, f)
        b = r_py.forward_dynamics(q, qd, tau, f)
        w.see(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))), q=q, qd=qd, tau=tau)
    return w


PROPERTIES = (
    ("regressor_identity", check_regressor_identity, 1e-9, 1000),
    ("nal_roundtrip", check_nal_roundtrip, 1e-12, 1000),
    ("bregman_nonnegative", check_bregman_nonneg, 0.0, 10000),
    ("bregman_closed_form", check_bregman_closed_form, 1e-9, 1),
    ("bregman_rate", check_bregman_rate, 1e-6, 200),
    ("impedance_recovery", check_impedance_recovery, 1e-12, 1000),
    ("tip_power_flow", check_tip_vpf, 1e-12, 1000),
    ("telescoping", check_telescoping, 1e-9, 100),
    ("accompanying_nonnegative", check_nu_nonneg, 0.0, 100),
    ("two_link_lagrangian", check_two_link_lagrangian, 1e-8, 200),
    ("energy_conservation", check_energy_conservation, 1e-3, 2),
    ("spring_cycle_energy", check_spring_cycle, 1e-4, 1),
    ("quintic_peak_speed", check_quintic_peak, 1e-12, 50),
    ("backend_agreement", check_backend_agreement, 1e-9, 50),
)


def verify_suite(seed: int = 0, mutations: dict | None = None, only=None, scale: float = 1.0) -> list[PropertyResult]:
    """Run every property check; ``mutations`` maps a property name to extra kwargs.

    ``mutations={"regressor_identity": {"regressor": broken}}`` swaps in a
    faulty implementation, which the suite must then flag.
    """
    mutations = mutations or {}
    results = []
    for name, fn, tol, count in PROPERTIES:
        if only is not None and name not in only:
            continue
        rng = np.random.default_rng([seed, len(results)])
        n = max(1, int(round(count * scale))) if count > 2 else count
        t0 = time.perf_counter()
        w = fn(rng, n, **mutations.get(name, {}))
        ok = w.value <= tol
        results.append(PropertyResult(name, tol, n, w.value, ok, None if ok else w.example,
                                      time.perf_counter() - t0))
    return results
