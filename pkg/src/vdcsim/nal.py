"""Natural adaptation on the 4x4 image of the inertial parameter vector.

Parameter layout used throughout the package::

    phi = [m, h_x, h_y, h_z, I_xx, I_yy, I_zz, I_xy, I_yz, I_xz]

with ``h = m * c`` the first mass moment and ``I`` the rotational inertia
about the frame origin.  ``nal_map`` sends ``phi`` to

    L = [[0.5 tr(I) 1 - I, h], [h^T, m]]

which is positive definite exactly when ``phi`` is physically consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

N_PARAMS = 10
PD_EPS = 1e-9
MAX_HALVINGS = 40
SYM_TOL = 1e-12

# (row, col) of each vecI entry inside the 3x3 inertia matrix
_INERTIA_INDEX = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2))


class PhysicalConsistencyError(RuntimeError):
    """An estimate left the positive-definite cone."""


def inertia_matrix(vec_i) -> np.ndarray:
    xx, yy, zz, xy, yz, xz = vec_i
    return np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])


def inertia_vector(I) -> np.ndarray:
    return np.array([I[r, c] for r, c in _INERTIA_INDEX])


def params_from_physical(mass: float, com, inertia_com) -> np.ndarray:
    """Inertial parameters about the frame origin from COM-referred values."""
    com = np.asarray(com, dtype=float)
    inertia_com = np.asarray(inertia_com, dtype=float)
    I_o = inertia_com + mass * (com @ com * np.eye(3) - np.outer(com, com))
    return np.concatenate([[mass], mass * com, inertia_vector(I_o)])


def nal_map(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    I = inertia_matrix(phi[4:])
    L = np.empty((4, 4))
    L[:3, :3] = 0.5 * np.trace(I) * np.eye(3) - I
    L[:3, 3] = phi[1:4]
    L[3, :3] = phi[1:4]
    L[3, 3] = phi[0]
    return L


def nal_unmap(L) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got {L.shape}")
    if np.max(np.abs(L - L.T)) > SYM_TOL * max(1.0, np.max(np.abs(L))):
        raise ValueError("L must be symmetric")
    sigma = L[:3, :3]
    I = np.trace(sigma) * np.eye(3) - sigma
    return np.concatenate([[L[3, 3]], L[:3, 3], inertia_vector(I)])


def dual_s_from_s(s) -> np.ndarray:
    """Symmetric ``S`` with ``tr(nal_map(p) @ S) == p @ s`` for every ``p``.

    Closed form of the 10x10 duality system; see ``tests/test_nal.py`` for
    the linear-solve construction it is checked against.
    """
    s = np.asarray(s, dtype=float)
    sigma = s[4] + s[5] + s[6]
    S = np.empty((4, 4))
    S[0, 0] = sigma - s[4]
    S[1, 1] = sigma - s[5]
    S[2, 2] = sigma - s[6]
    S[0, 1] = S[1, 0] = -0.5 * s[7]
    S[1, 2] = S[2, 1] = -0.5 * s[8]
    S[0, 2] = S[2, 0] = -0.5 * s[9]
    S[:3, 3] = 0.5 * s[1:4]
    S[3, :3] = 0.5 * s[1:4]
    S[3, 3] = s[0]
    return S


def dual_s_matrix(W, e) -> np.ndarray:
    """Dual image of ``s = W^T e`` (bodies: 6x10 and 6-vector; actuators: 1x10 and scalar)."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    e = np.atleast_1d(np.asarray(e, dtype=float))
    return dual_s_from_s(W.T @ e)


def min_eig(L) -> float:
    return float(np.linalg.eigvalsh(L)[0])


def is_pd(L, eps: float = PD_EPS) -> bool:
    try:
        np.linalg.cholesky(L - eps * np.eye(L.shape[0]))
    except np.linalg.LinAlgError:
        return False
    return True


def nal_update(L_hat, S, gamma: float, dt: float, eps: float = PD_EPS):
    """One explicit Euler step of ``dL/dt = L S L / gamma``.

    The step is halved until the result stays above ``eps`` in its smallest
    eigenvalue.  Returns ``(L_next, halvings)``.
    """
    if dt <= 0.0 or gamma <= 0.0:
        raise ValueError("dt and gamma must be positive")
    L_hat = np.asarray(L_hat, dtype=float)
    rate = L_hat @ S @ L_hat
    rate = 0.5 * (rate + rate.T) / gamma
    h = dt
    for halvings in range(MAX_HALVINGS + 1):
        L_next = L_hat + h * rate
        if is_pd(L_next, eps):
            return L_next, halvings
        h *= 0.5
    raise PhysicalConsistencyError(
        f"estimate lost positive definiteness even after {MAX_HALVINGS} halvings; dt too large"
    )


def bregman_divergence(L_true, L_hat) -> float:
    """Log-det Bregman divergence ``log(|L_hat|/|L|) + tr(L_hat^-1 L) - 4``."""
    L_true = np.asarray(L_true, dtype=float)
    L_hat = np.asarray(L_hat, dtype=float)
    n = L_true.shape[0]
    try:
        c_true = np.linalg.cholesky(L_true)
        c_hat = np.linalg.cholesky(L_hat)
    except np.linalg.LinAlgError:
        raise ValueError("Bregman divergence needs positive-definite arguments") from None
    logdet = 2.0 * (np.sum(np.log(np.diag(c_hat))) - np.sum(np.log(np.diag(c_true))))
    return float(logdet + np.trace(np.linalg.solve(L_hat, L_true)) - n)


def bregman_rate(L_true, L_hat, L_hat_dot) -> float:
    """Time derivative ``tr(L_hat^-1 dL_hat L_hat^-1 (L_hat - L_true))``."""
    inv = np.linalg.inv(L_hat)
    return float(np.trace(inv @ L_hat_dot @ inv @ (L_hat - L_true)))


def project_pd(L, floor: float) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (L + L.T))
    return (V * np.maximum(w, floor)) @ V.T


def perturbed_estimate(phi_true, fraction: float, rng: np.random.Generator, tries: int = 1000) -> np.ndarray:
    """``nal_map`` of ``phi * (1 + u)`` with ``u ~ U(-fraction, fraction)`` per entry.

    Draws that are not comfortably positive definite (smallest eigenvalue
    below a tenth of the true one) are redrawn; after ``tries`` failures the
    last draw is projected onto that floor.
    """
    phi_true = np.asarray(phi_true, dtype=float)
    floor = 0.1 * max(min_eig(nal_map(phi_true)), PD_EPS)
    for _ in range(tries):
        L = nal_map(phi_true * (1.0 + rng.uniform(-fraction, fraction, size=N_PARAMS)))
        if min_eig(L) >= floor:
            return L
    return project_pd(L, floor)


@dataclass
class AdaptationState:
    """Estimates for every rigid body and actuator plus the single gain."""

    L_body: np.ndarray  # (n, 4, 4)
    L_act: np.ndarray  # (n, 4, 4)
    gamma: float

    def __post_init__(self):
        if self.gamma <= 0.0 or not math.isfinite(self.gamma):
            raise ValueError("adaptation gain must be positive")
        for L in (*self.L_body, *self.L_act):
            if not is_pd(L):
                raise PhysicalConsistencyError("initial estimate is not physically consistent")

    @property
    def phi_body(self) -> np.ndarray:
        return np.array([nal_unmap(L) for L in self.L_body])

    @property
    def phi_act(self) -> np.ndarray:
        return np.array([nal_unmap(L) for L in self.L_act])

    def min_eigenvalues(self) -> np.ndarray:
        Ls = np.concatenate([self.L_body, self.L_act])
        return np.linalg.eigvalsh(Ls)[:, 0]

    def copy(self) -> "AdaptationState":
        return AdaptationState(self.L_body.copy(), self.L_act.copy(), self.gamma)
