"""Human arm coupling, virtual wall and the contact energy monitor.

Sign conventions (all world frame):

* ``f`` handed to the controller is the wrench the robot exerts on its
  surroundings; the plant receives ``-f``.
* ``f_h`` is the wrench the human arm exerts on the robot handle.
* A wall with outward normal ``n`` at offset ``z_e`` fills ``n . p < z_e``.
  Penetration is ``z_e - n . p``; ``v`` and ``a`` are measured into the wall
  (along ``-n``) and ``f_c >= 0`` is the magnitude the wall pushes back with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spatial import quat_error_vec, quat_multiply

PASSIVITY_EPS = 1e-6
ELEMENTS = ("none", "mass", "damping")
ENERGY_RULES = ("zoh", "rectangle", "trapezoid")


def _diag(value, n, name, strict=False) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape == (n, n):
        arr = np.diag(arr)
    if arr.shape != (n,):
        raise ValueError(f"{name} must be a scalar or length-{n} diagonal")
    if np.any(arr < 0.0) or (strict and np.any(arr <= 0.0)):
        raise ValueError(f"{name} diagonal must be {'positive' if strict else 'non-negative'}")
    return arr


# -- human arm -----------------------------------------------------------------


@dataclass(frozen=True)
class HumanArmModel:
    """Diagonal hand inertia, damping to ground and coupling stiffness to the handle.

    The defaults are generic literature-scale values for a relaxed grasp,
    with the rotational channels scaled to hand-sized moments.
    """

    M_h: np.ndarray = field(default_factory=lambda: np.array([1.5, 1.5, 1.5, 0.01, 0.01, 0.01]))
    B_h: np.ndarray = field(default_factory=lambda: np.array([15.0, 15.0, 15.0, 0.1, 0.1, 0.1]))
    K_h: np.ndarray = field(default_factory=lambda: np.array([150.0, 150.0, 150.0, 1.0, 1.0, 1.0]))

    def __post_init__(self):
        object.__setattr__(self, "M_h", _diag(self.M_h, 6, "M_h", strict=True))
        object.__setattr__(self, "B_h", _diag(self.B_h, 6, "B_h"))
        object.__setattr__(self, "K_h", _diag(self.K_h, 6, "K_h"))


@dataclass
class HumanArmState:
    position: np.ndarray
    quat: np.ndarray
    velocity: np.ndarray  # [linear, angular], world

    @classmethod
    def at(cls, position, quat) -> "HumanArmState":
        return cls(np.array(position, float), np.array(quat, float), np.zeros(6))

    def copy(self) -> "HumanArmState":
        return HumanArmState(self.position.copy(), self.quat.copy(), self.velocity.copy())


def arm_displacement(state: HumanArmState, position, quat) -> np.ndarray:
    """``X_h - X`` with the rotational part as a quaternion error."""
    return np.concatenate([state.position - np.asarray(position, float), quat_error_vec(state.quat, quat)])


def _quat_step(quat, omega, dt):
    angle = np.linalg.norm(omega) * dt
    if angle < 1e-15:
        return quat
    axis = omega / np.linalg.norm(omega)
    dq = np.concatenate([[math.cos(0.5 * angle)], math.sin(0.5 * angle) * axis])
    out = quat_multiply(dq, quat)
    return out / np.linalg.norm(out)


def human_arm_force(model: HumanArmModel, state: HumanArmState, position, quat, dt: float):
    """Coupling wrench on the robot, then one semi-implicit Euler step of the hand.

    The returned ``f_h = K_h (X_h - X)`` equals ``-(M_h a_h + B_h v_h)`` for
    the acceleration used in the step, since no other force acts on the hand.
    Returns ``(f_h, a_h)``; ``state`` is advanced in place.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    f_h = model.K_h * arm_displacement(state, position, quat)
    acc = -(f_h + model.B_h * state.velocity) / model.M_h
    state.velocity = state.velocity + dt * acc
    state.position = state.position + dt * state.velocity[:3]
    state.quat = _quat_step(state.quat, state.velocity[3:], dt)
    return f_h, acc


# -- wall ------------------------------------------------------------------------


@dataclass(frozen=True)
class VirtualWall:
    position: float
    stiffness: float
    element: str = "none"
    mass: float = 0.0
    damping: float = 0.0
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        element = {1: "mass", 2: "damping", 0: "none"}.get(self.element, self.element)
        if element not in ELEMENTS:
            raise ValueError(f"element must be one of {ELEMENTS}")
        object.__setattr__(self, "element", element)
        for name in ("stiffness", "mass", "damping"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ValueError(f"wall {name} must be finite and >= 0")
        n = np.asarray(self.normal, float).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("wall normal must be a unit vector")
        object.__setattr__(self, "normal", n)

    @property
    def contact_axis(self) -> np.ndarray:
        """Unit 6-vector pointing into the wall."""
        return np.concatenate([-self.normal, np.zeros(3)])

    def penetration(self, p) -> float:
        return float(self.position - self.normal @ np.asarray(p, float))

    def inward(self, x) -> float:
        return float(-self.normal @ np.asarray(x, float)[:3])


def varying_mass_gate(a: float, v: float, m_d: float) -> float:
    return m_d if a * v >= 0.0 else 0.0


def contact_force(wall: VirtualWall, penetration: float, v: float, a: float) -> float:
    """Push-back magnitude ``k_e p + {m_e a | b_e v}`` while ``p > 0``, else 0."""
    if penetration <= 0.0:
        return 0.0
    f = wall.stiffness * penetration
    if wall.element == "mass":
        f += varying_mass_gate(a, v, wall.mass) * a
    elif wall.element == "damping":
        f += wall.damping * v
    return f


def compose_external_force(f_h, f_c: float, mode: str, axis=None) -> np.ndarray:
    """Wrench the robot exerts: ``-f_h`` alone, plus ``f_c`` along the contact axis in contact mode."""
    f_h = np.asarray(f_h, float)
    if mode == "pHRI":
        return -f_h
    if mode != "pHREI":
        raise ValueError("mode must be 'pHRI' or 'pHREI'")
    axis = np.array([0.0, 0.0, -1.0, 0.0, 0.0, 0.0]) if axis is None else np.asarray(axis, float)
    return -f_h + f_c * axis


# -- energy ----------------------------------------------------------------------


def passivity_energy_step(E_c: float, f_c: float, v: float, dt: float) -> float:
    return E_c + f_c * v * dt


class PassivityMonitor:
    """Accumulates the work done on the wall and tracks its running minimum.

    ``zoh`` (default) charges each held force against the penetration change
    over its hold interval, which is exactly the work the wall receives;
    ``rectangle`` and ``trapezoid`` integrate ``f_c v`` from sampled
    velocities.
    """

    def __init__(self, rule: str = "rectangle", eps: float = PASSIVITY_EPS):
        if rule not in ENERGY_RULES:
            raise ValueError(f"energy rule must be one of {ENERGY_RULES}")
        self.rule = rule
        self.eps = eps
        self.E_c = 0.0
        self.min_E_c = 0.0
        self._prev = None  # (f_c, penetration, v)

    def update(self, f_c: float, penetration: float, v: float, dt: float) -> float:
        """Record the sample at the start of an interval; charges the previous one."""
        if self._prev is not None:
            f0, p0, v0 = self._prev
            if self.rule == "zoh":
                self.E_c += f0 * (penetration - p0)
            elif self.rule == "rectangle":
                self.E_c = passivity_energy_step(self.E_c, f0, v0, dt)
            else:
                self.E_c += 0.5 * (f0 * v0 + f_c * v) * dt
            self.min_E_c = min(self.min_E_c, self.E_c)
        self._prev = (f_c, penetration, v)
        return self.E_c

    @property
    def passive(self) -> bool:
        return self.min_E_c >= -self.eps


class Differentiator:
    """Backward difference followed by a first-order low-pass (``cutoff`` Hz, 0 = raw)."""

    def __init__(self, dt: float, cutoff: float = 50.0):
        self.dt = dt
        self.alpha = 1.0 if cutoff == 0.0 else dt / (dt + 1.0 / (2.0 * math.pi * cutoff))
        self._prev = None
        self.value = 0.0

    def __call__(self, x: float) -> float:
        if self._prev is not None:
            self.value += self.alpha * ((x - self._prev) / self.dt - self.value)
        self._prev = x
        return self.value
