import os
import subprocess
import sys

import numpy as np
import pytest

from vdcsim import backend
from vdcsim.controller import ControllerGains, ImpedanceTarget, VDCController, perturbed_adaptation
from vdcsim.robot import default_robot, planar_two_link

pytestmark = pytest.mark.skipif("c" not in backend.available(), reason="compiled kernels not built")

PY = backend.load("python")


@pytest.fixture(scope="module")
def pair():
    if "c" not in backend.available():
        pytest.skip("compiled kernels not built")
    r = default_robot()
    return r.with_kernels(backend.load("c")), r.with_kernels(PY)


def test_backend_names():
    assert backend.load("c").__name__.endswith("_ckernels")
    assert PY.__name__.endswith("_pykernels")
    with pytest.raises(ValueError):
        backend.load("fortran")


def test_kinematics_and_dynamics_agree(pair, rng):
    c, p = pair
    for _ in range(20):
        q, qd, qdd, tau = rng.uniform(-1.5, 1.5, (4, 7))
        f = rng.normal(size=6)
        a, b = c.forward_kinematics(q), p.forward_kinematics(q)
        assert np.allclose(a.R_T, b.R_T, atol=1e-14) and np.allclose(a.p_T, b.p_T, atol=1e-14)
        assert np.allclose(c.inverse_dynamics(q, qd, qdd, f), p.inverse_dynamics(q, qd, qdd, f), atol=1e-11)
        assert np.allclose(c.forward_dynamics(q, qd, tau, f), p.forward_dynamics(q, qd, tau, f), atol=1e-9)


def test_plant_step_agrees(pair, rng):
    c, p = pair
    q0, qd0, tau = rng.uniform(-1, 1, (3, 7))
    w = rng.normal(size=6)
    qc, qdc, qp, qdp = q0.copy(), qd0.copy(), q0.copy(), qd0.copy()
    ac = c.step(qc, qdc, tau, w, 1e-4, 10)
    ap = p.step(qp, qdp, tau, w, 1e-4, 10)
    assert np.allclose(ac, ap, atol=1e-10)
    assert np.allclose(qc, qp, atol=1e-12) and np.allclose(qdc, qdp, atol=1e-10)


def test_controller_ticks_agree(pair, rng):
    c, p = pair
    gains = ControllerGains.uniform(7)
    ad = perturbed_adaptation(c, 10.0, 0.3, np.random.default_rng(1))
    cc = VDCController(c, gains, ImpedanceTarget.standard(), ad)
    cp = VDCController(p, gains, ImpedanceTarget.standard(), ad)
    for _ in range(5):
        q, qd = rng.uniform(-1, 1, (2, 7))
        pose = c.forward_kinematics(q)
        args = (q, qd, pose.ee_position + 0.01, pose.ee_quaternion, np.full(6, 0.05), rng.normal(size=6))
        a, b = cc.task_tick(*args), cp.task_tick(*args)
        assert np.allclose(a.tau, b.tau, atol=1e-10)
        assert np.allclose(a.F_r, b.F_r, atol=1e-10)
    assert np.allclose(cc.adaptation.L_body, cp.adaptation.L_body, atol=1e-12)
    assert np.allclose(cc.state.int_eV, cp.state.int_eV, atol=1e-12)


def test_non_default_chain_length(rng):
    arm = planar_two_link()
    c, p = arm.with_kernels(backend.load("c")), arm.with_kernels(PY)
    q, qd, qdd = rng.normal(size=(3, 2))
    assert np.allclose(c.inverse_dynamics(q, qd, qdd), p.inverse_dynamics(q, qd, qdd), atol=1e-12)


def test_environment_forces_fallback():
    code = "import vdcsim; print(vdcsim.BACKEND)"
    env = dict(os.environ, VDCSIM_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
