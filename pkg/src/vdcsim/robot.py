"""Serial-chain description, kinematics and plant dynamics.

The model is entirely data-driven: see ``data/default_robot.yaml`` for the
schema.  The shipped default is a plausible 7-DoF arm exoskeleton; it is not
a calibrated model of any particular device.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import dynamics as dyn
from ._yaml import ConfigError, dotted, load_file, load_text, where
from .backend import kernels as _default_kernels
from .nal import is_pd, nal_map, params_from_physical
from .spatial import SpatialForce, SpatialVelocity, FrameTransform, axis_rotation, check_rotation, rpy_matrix
from .spatial import matrix_to_quat

AXIS_INDEX = {"x": 0, "y": 1, "z": 2}
AXIS_NAME = {v: k for k, v in AXIS_INDEX.items()}
ROBOT_SCHEMA = "vdcsim-robot/1"
DEFAULT_GRAVITY = (0.0, 0.0, -9.81)

rigid_body_regressor = dyn.rigid_body_regressor
actuator_regressor = dyn.actuator_regressor


@dataclass(frozen=True)
class LinkDescription:
    """One joint + rigid body + actuator.

    ``rotation``/``offset`` place ``T_i`` in ``B_i``; ``com`` and ``inertia``
    (about the COM, ``B_i`` axes, order xx yy zz xy yz xz) are in ``B_i``.
    """

    name: str
    axis: int
    rotation: np.ndarray
    offset: np.ndarray
    mass: float
    com: np.ndarray
    inertia: np.ndarray
    rotor_inertia: float
    rotor_mass: float = 0.0
    limits: tuple[float, float] = (-math.pi, math.pi)

    def __post_init__(self):
        if self.axis not in (0, 1, 2):
            raise ValueError(f"{self.name}: axis must be 0, 1 or 2")
        check_rotation(self.rotation)
        if not self.mass > 0.0:
            raise ValueError(f"{self.name}: mass must be positive")
        if not self.rotor_inertia > 0.0:
            raise ValueError(f"{self.name}: rotor inertia must be positive")
        if not self.limits[0] < self.limits[1]:
            raise ValueError(f"{self.name}: joint limits must be increasing")
        if not is_pd(nal_map(self.phi)):
            raise ValueError(f"{self.name}: inertial parameters are not physically consistent")

    @property
    def phi(self) -> np.ndarray:
        """Inertial parameters about the ``B_i`` origin."""
        xx, yy, zz, xy, yz, xz = self.inertia
        I_c = np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])
        return params_from_physical(self.mass, self.com, I_c)

    @property
    def phi_rotor(self) -> np.ndarray:
        """Rotor as a short cylinder about the joint axis, centred on the joint."""
        diag = np.full(3, 0.6 * self.rotor_inertia)
        diag[self.axis] = self.rotor_inertia
        m = self.rotor_mass if self.rotor_mass > 0.0 else 10.0 * self.rotor_inertia
        return np.concatenate([[m], np.zeros(3), diag, np.zeros(3)])


@dataclass(frozen=True)
class ChainPoses:
    """World poses of every ``B_i`` and ``T_i`` frame."""

    R_B: np.ndarray
    p_B: np.ndarray
    R_T: np.ndarray
    p_T: np.ndarray

    @property
    def ee_position(self) -> np.ndarray:
        return self.p_T[-1]

    @property
    def ee_rotation(self) -> np.ndarray:
        return self.R_T[-1]

    @property
    def ee_quaternion(self) -> np.ndarray:
        return matrix_to_quat(self.R_T[-1])

    def frame(self, name: str) -> FrameTransform:
        """World pose of ``"B3"``, ``"T7"`` etc. as a transform from ``"G"``."""
        kind, idx = name[0], int(name[1:])
        if kind == "T" and idx == 0:
            return FrameTransform(np.eye(3), np.zeros(3), "G", "T0")
        R, p = (self.R_B, self.p_B) if kind == "B" else (self.R_T, self.p_T)
        return FrameTransform(R[idx - 1], p[idx - 1], "G", name)


class RobotModel:
    """Immutable chain model; every evaluation is a pure function of its inputs."""

    def __init__(self, links, gravity=DEFAULT_GRAVITY, name: str = "robot", kernels=None):
        self.links = tuple(links)
        if not self.links:
            raise ValueError("a robot needs at least one link")
        self.name = name
        self.n = len(self.links)
        self.gravity = np.asarray(gravity, dtype=float).reshape(3)
        self.kernels = kernels if kernels is not None else _default_kernels
        self.axis = np.array([l.axis for l in self.links], dtype=np.int64)
        self.link_R = np.ascontiguousarray([l.rotation for l in self.links], dtype=float)
        self.link_r = np.ascontiguousarray([l.offset for l in self.links], dtype=float)
        self.phi = np.ascontiguousarray([l.phi for l in self.links], dtype=float)
        self.phi_rotor = np.ascontiguousarray([l.phi_rotor for l in self.links], dtype=float)
        self.rotor_inertia = np.array([l.rotor_inertia for l in self.links], dtype=float)
        self.q_min = np.array([l.limits[0] for l in self.links])
        self.q_max = np.array([l.limits[1] for l in self.links])
        for arr in (self.axis, self.link_R, self.link_r, self.phi, self.phi_rotor, self.rotor_inertia, self.gravity):
            arr.setflags(write=False)

    def with_kernels(self, kernels) -> "RobotModel":
        return RobotModel(self.links, self.gravity, self.name, kernels)

    def with_gravity(self, gravity) -> "RobotModel":
        return RobotModel(self.links, gravity, self.name, self.kernels)

    def kappa(self, i: int) -> np.ndarray:
        return dyn.kappa(int(self.axis[i]))

    # -- kinematics ----------------------------------------------------------

    def forward_kinematics(self, q) -> ChainPoses:
        q = np.ascontiguousarray(q, dtype=float)
        n = self.n
        out = [np.empty((n, 3, 3)), np.empty((n, 3)), np.empty((n, 3, 3)), np.empty((n, 3))]
        self.kernels.fk(self.axis, self.link_R, self.link_r, q, *out)
        return ChainPoses(*out)

    def end_effector_pose(self, q):
        """``(position, quaternion [w, x, y, z])`` of ``T_n`` in the world."""
        poses = self.forward_kinematics(q)
        return poses.ee_position.copy(), poses.ee_quaternion

    def jacobian(self, q, poses: ChainPoses | None = None) -> np.ndarray:
        if poses is None:
            poses = self.forward_kinematics(q)
        return dyn.geometric_jacobian(self.axis, poses.R_B, poses.p_B, poses.p_T[-1])

    def body_velocity_recursion(self, q, qd):
        """Spatial velocities ``V_B`` (n, 6) and ``V_T`` (n, 6) in their own frames."""
        return dyn.body_velocities(self.axis, self.link_R, self.link_r, np.asarray(q, float), np.asarray(qd, float))

    def body_velocity(self, q, qd, i: int) -> SpatialVelocity:
        V_B, _ = self.body_velocity_recursion(q, qd)
        return SpatialVelocity.from_vector(V_B[i], f"B{i + 1}")

    # -- dynamics ------------------------------------------------------------

    def _tip_wrench(self, f_ext, q) -> np.ndarray:
        """External wrench on the robot as a world-frame 6-vector at the end-effector."""
        if f_ext is None:
            return np.zeros(6)
        if isinstance(f_ext, SpatialForce):
            vec = f_ext.vector
            if f_ext.frame == f"T{self.n}":
                R = self.forward_kinematics(q).ee_rotation
                return np.concatenate([R @ vec[:3], R @ vec[3:]])
            if f_ext.frame not in ("world", "G"):
                raise ValueError(f"external force must be in world or T{self.n}, got {f_ext.frame}")
            return vec
        return np.asarray(f_ext, dtype=float).reshape(6)

    def inverse_dynamics(self, q, qd, qdd, f_ext=None, full: bool = False):
        """Joint torques for the given motion; ``f_ext`` acts on the end-effector."""
        q = np.ascontiguousarray(q, float)
        R7 = self.forward_kinematics(q).ee_rotation
        w = self._tip_wrench(f_ext, q)
        tip = -np.concatenate([R7.T @ w[:3], R7.T @ w[3:]])
        n = self.n
        tau, F_star, F_B = np.empty(n), np.empty((n, 6)), np.empty((n, 6))
        self.kernels.inverse_dynamics(
            self.axis, self.link_R, self.link_r, self.phi, self.rotor_inertia, self.gravity,
            q, np.ascontiguousarray(qd, float), np.ascontiguousarray(qdd, float), tip, tau, F_star, F_B,
        )
        return (tau, F_star, F_B) if full else tau

    def gravity_torques(self, q) -> np.ndarray:
        z = np.zeros(self.n)
        return self.inverse_dynamics(q, z, z)

    def mass_matrix(self, q) -> np.ndarray:
        """Joint-space inertia incl. rotor inertias, by unit-acceleration passes."""
        flat = self.with_gravity((0.0, 0.0, 0.0))
        z = np.zeros(self.n)
        return np.column_stack([flat.inverse_dynamics(q, z, e) for e in np.eye(self.n)])

    def forward_dynamics(self, q, qd, tau, f_ext=None) -> np.ndarray:
        q = np.ascontiguousarray(q, float)
        qdd = np.empty(self.n)
        self.kernels.forward_dynamics(
            self.axis, self.link_R, self.link_r, self.phi, self.rotor_inertia, self.gravity,
            q, np.ascontiguousarray(qd, float), np.ascontiguousarray(tau, float),
            self._tip_wrench(f_ext, q), qdd,
        )
        return qdd

    plant_forward_dynamics = forward_dynamics

    def step(self, q, qd, tau, wrench_world, h: float, nsub: int = 1) -> np.ndarray:
        """Advance ``q``, ``qd`` in place by ``nsub`` semi-implicit Euler steps; returns first ``qdd``."""
        qdd0 = np.empty(self.n)
        self.kernels.plant_step(
            self.axis, self.link_R, self.link_r, self.phi, self.rotor_inertia, self.gravity,
            q, qd, np.ascontiguousarray(tau, float), np.ascontiguousarray(wrench_world, float),
            float(h), int(nsub), qdd0,
        )
        return qdd0

    # -- energy --------------------------------------------------------------

    def kinetic_energy(self, q, qd) -> float:
        qd = np.asarray(qd, float)
        return 0.5 * float(qd @ self.mass_matrix(q) @ qd)

    def potential_energy(self, q) -> float:
        poses = self.forward_kinematics(q)
        e = 0.0
        for i, link in enumerate(self.links):
            c = poses.p_B[i] + poses.R_B[i] @ link.com
            e -= link.mass * float(self.gravity @ c)
        return e

    def within_limits(self, q) -> bool:
        q = np.asarray(q)
        return bool(np.all(q >= self.q_min) and np.all(q <= self.q_max))


# -- description files ---------------------------------------------------------

_LINK_KEYS = {
    "name", "axis", "rpy", "rotation", "offset", "mass", "com", "inertia",
    "rotor_inertia", "rotor_mass", "limits",
}
_ROBOT_KEYS = {"schema", "name", "gravity", "links"}


def _vec(value, n, ctx):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{ctx}: expected {n} numbers") from None
    if arr.shape != (n,) or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{ctx}: expected {n} finite numbers")
    return arr


def robot_from_dict(data, lines=None, source: str = "<robot>") -> RobotModel:
    lines = lines or {}

    def ctx(*path):
        return f"{where(source, lines, path)}: {dotted(path)}" if path else source

    if not isinstance(data, dict):
        raise ConfigError(f"{source}: robot description must be a mapping")
    for key in data:
        if key not in _ROBOT_KEYS:
            raise ConfigError(f"{ctx(key)}: unknown key")
    if data.get("schema", ROBOT_SCHEMA) != ROBOT_SCHEMA:
        raise ConfigError(f"{ctx('schema')}: unsupported schema {data['schema']!r}")
    raw_links = data.get("links")
    if not isinstance(raw_links, list) or not raw_links:
        raise ConfigError(f"{ctx('links') if 'links' in data else source}: 'links' must be a non-empty list")
    links = []
    for i, raw in enumerate(raw_links):
        base = ("links", i)
        if not isinstance(raw, dict):
            raise ConfigError(f"{ctx(*base)}: each link must be a mapping")
        for key in raw:
            if key not in _LINK_KEYS:
                raise ConfigError(f"{ctx(*base, key)}: unknown key")
        for key in ("axis", "offset", "mass", "com", "inertia", "rotor_inertia"):
            if key not in raw:
                raise ConfigError(f"{ctx(*base)}: missing required key {key!r}")
        axis = raw["axis"]
        if axis not in AXIS_INDEX:
            raise ConfigError(f"{ctx(*base, 'axis')}: axis must be one of x, y, z")
        if "rotation" in raw and "rpy" in raw:
            raise ConfigError(f"{ctx(*base)}: give either 'rotation' or 'rpy', not both")
        if "rotation" in raw:
            R = np.asarray(raw["rotation"], dtype=float)
            if R.shape != (3, 3):
                raise ConfigError(f"{ctx(*base, 'rotation')}: expected a 3x3 matrix")
        else:
            R = rpy_matrix(*_vec(raw.get("rpy", [0, 0, 0]), 3, ctx(*base, "rpy")))
        limits = _vec(raw.get("limits", [-math.pi, math.pi]), 2, ctx(*base, "limits"))
        try:
            links.append(
                LinkDescription(
                    name=str(raw.get("name", f"link{i + 1}")),
                    axis=AXIS_INDEX[axis],
                    rotation=R,
                    offset=_vec(raw["offset"], 3, ctx(*base, "offset")),
                    mass=float(raw["mass"]),
                    com=_vec(raw["com"], 3, ctx(*base, "com")),
                    inertia=_vec(raw["inertia"], 6, ctx(*base, "inertia")),
                    rotor_inertia=float(raw["rotor_inertia"]),
                    rotor_mass=float(raw.get("rotor_mass", 0.0)),
                    limits=(float(limits[0]), float(limits[1])),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{ctx(*base)}: {exc}") from None
    gravity = _vec(data.get("gravity", DEFAULT_GRAVITY), 3, ctx("gravity"))
    return RobotModel(links, gravity, name=str(data.get("name", "robot")))


def load_robot(path) -> RobotModel:
    data, lines = load_file(path)
    return robot_from_dict(data, lines, str(path))


def default_robot_text() -> str:
    return resources.files("vdcsim").joinpath("data/default_robot.yaml").read_text()


def default_robot() -> RobotModel:
    data, lines = load_text(default_robot_text(), "default_robot.yaml")
    return robot_from_dict(data, lines, "default_robot.yaml")


def resolve_robot(ref: str | Path | None) -> RobotModel:
    """``None`` or ``"default"`` gives the shipped arm; anything else is a file path."""
    if ref is None or str(ref) == "default":
        return default_robot()
    return load_robot(ref)


def planar_two_link(l1=0.4, l2=0.3, m1=1.2, m2=0.8, rotor=(0.01, 0.01), gravity=(0.0, -9.81, 0.0)) -> RobotModel:
    """Two z-axis joints in the x-y plane with point-like links (COM at link ends)."""
    tiny = 1e-6
    links = [
        LinkDescription("l1", 2, np.eye(3), np.array([l1, 0, 0]), m1, np.array([l1, 0, 0]),
                        np.array([tiny, tiny, tiny, 0, 0, 0]), rotor[0]),
        LinkDescription("l2", 2, np.eye(3), np.array([l2, 0, 0]), m2, np.array([l2, 0, 0]),
                        np.array([tiny, tiny, tiny, 0, 0, 0]), rotor[1]),
    ]
    return RobotModel(links, gravity, name="planar-2link")


__all__ = [
    "LinkDescription", "RobotModel", "ChainPoses", "load_robot", "default_robot",
    "robot_from_dict", "resolve_robot", "planar_two_link", "rigid_body_regressor",
    "actuator_regressor", "axis_rotation",
]
