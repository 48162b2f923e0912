import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from vdcsim.nal import (
    AdaptationState, PhysicalConsistencyError, bregman_divergence, bregman_rate, dual_s_from_s, dual_s_matrix,
    min_eig, nal_map, nal_unmap, nal_update, perturbed_estimate,
)

seeds = st.integers(0, 2**31 - 1)


def random_pd(r, n=4):
    A = r.normal(size=(n, n))
    return A @ A.T + 0.1 * np.eye(n)


def test_map_examples():
    phi = np.array([1.0, 0, 0, 0, 1, 1, 1, 0, 0, 0])
    assert np.array_equal(nal_map(phi), np.diag([0.5, 0.5, 0.5, 1.0]))
    assert np.array_equal(nal_map(np.zeros(10)), np.zeros((4, 4)))
    assert np.array_equal(nal_unmap(np.diag([0.5, 0.5, 0.5, 1.0])), phi)


@given(seeds)
def test_round_trip(seed):
    phi = np.random.default_rng(seed).normal(size=10)
    assert np.allclose(nal_unmap(nal_map(phi)), phi, rtol=0, atol=1e-15)


def test_unmap_rejects_asymmetric():
    L = np.eye(4)
    L[0, 1] = 0.5
    with pytest.raises(ValueError):
        nal_unmap(L)


def test_dual_matrix_by_linear_solve(rng):
    # solve tr(f(e_k) S) = s_k over the symmetric 4x4 basis and compare with the closed form
    basis = []
    for i in range(4):
        for j in range(i, 4):
            E = np.zeros((4, 4))
            E[i, j] = E[j, i] = 1.0
            basis.append(E)
    A = np.array([[np.trace(nal_map(e_k) @ E) for E in basis] for e_k in np.eye(10)])
    for _ in range(20):
        s = rng.normal(size=10)
        c = np.linalg.solve(A, s)
        S = sum(ci * E for ci, E in zip(c, basis))
        assert np.allclose(dual_s_from_s(s), S, atol=1e-12)


@given(seeds)
def test_dual_identity(seed):
    r = np.random.default_rng(seed)
    W, e, dphi = r.normal(size=(6, 10)), r.normal(size=6), r.normal(size=10)
    S = dual_s_matrix(W, e)
    assert np.allclose(S, S.T)
    lhs = np.trace(nal_map(dphi) @ S)
    rhs = dphi @ (W.T @ e)
    assert abs(lhs - rhs) <= 1e-11 * max(1.0, abs(rhs))
    assert np.array_equal(dual_s_matrix(W, np.zeros(6)), np.zeros((4, 4)))


def test_dual_for_actuator_row(rng):
    W = rng.normal(size=(1, 10))
    dphi = rng.normal(size=10)
    S = dual_s_matrix(W, 0.7)
    assert np.trace(nal_map(dphi) @ S) == pytest.approx(0.7 * (W[0] @ dphi), abs=1e-12)


def test_update_zero_rate_and_symmetry(rng):
    L = random_pd(rng)
    L2, halvings = nal_update(L, np.zeros((4, 4)), 10.0, 1e-3)
    assert np.array_equal(L2, L) and halvings == 0
    S = random_pd(rng) - 2 * np.eye(4)
    L3, _ = nal_update(L, S, 10.0, 1e-3)
    assert np.array_equal(L3, L3.T)


def test_update_step_guard_keeps_pd():
    L = np.diag([1.0, 1.0, 1.0, 1e-3])
    S = -np.diag([0, 0, 0, 1e6])
    L2, halvings = nal_update(L, S, 1.0, 1e-3)
    assert halvings > 0
    assert min_eig(L2) > 0


def test_update_rejects_bad_arguments():
    with pytest.raises(ValueError):
        nal_update(np.eye(4), np.zeros((4, 4)), 0.0, 1e-3)
    with pytest.raises(ValueError):
        nal_update(np.eye(4), np.zeros((4, 4)), 1.0, 0.0)


def test_bregman_examples(frozen):
    assert bregman_divergence(np.eye(4), np.eye(4)) == pytest.approx(0.0, abs=1e-15)
    d = bregman_divergence(np.eye(4), 2 * np.eye(4))
    assert d == pytest.approx(frozen["bregman_identity_vs_twice_identity"], abs=1e-9)
    assert d == pytest.approx(4 * math.log(2) - 2, abs=1e-9)
    assert d == pytest.approx(0.772589, abs=1e-6)
    with pytest.raises(ValueError):
        bregman_divergence(np.eye(4), -np.eye(4))


@given(seeds)
def test_bregman_nonnegative_and_matches_oracle(seed):
    r = np.random.default_rng(seed)
    A, B = random_pd(r), random_pd(r)
    d = bregman_divergence(A, B)
    assert d >= 0.0
    # D(A || B) with the log-det generator equals the oracle with arguments (A, B)
    assert d == pytest.approx(oracles.log_det_bregman(A, B), rel=1e-9, abs=1e-12)


@given(seeds)
def test_bregman_rate_finite_difference(seed):
    r = np.random.default_rng(seed)
    L, Lh = random_pd(r), random_pd(r)
    dLh = r.normal(size=(4, 4))
    dLh = 0.5 * (dLh + dLh.T)
    h = 1e-7
    fd = (bregman_divergence(L, Lh + h * dLh) - bregman_divergence(L, Lh - h * dLh)) / (2 * h)
    assert abs(bregman_rate(L, Lh, dLh) - fd) <= 1e-6 * max(1.0, abs(fd))


def test_perturbed_estimate_is_pd(robot, rng):
    for phi in robot.phi:
        L = perturbed_estimate(phi, 0.3, rng)
        assert min_eig(L) > 0


def test_adaptation_state_validation(robot):
    Ls = np.array([nal_map(p) for p in robot.phi])
    with pytest.raises(ValueError):
        AdaptationState(Ls, Ls, 0.0)
    bad = Ls.copy()
    bad[0] = -np.eye(4)
    with pytest.raises(PhysicalConsistencyError):
        AdaptationState(bad, Ls, 10.0)
    st = AdaptationState(Ls, Ls, 10.0)
    assert np.allclose(st.phi_body, robot.phi)
    assert np.all(st.min_eigenvalues() > 0)
