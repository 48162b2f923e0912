"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line (repeated in the terminal summary)
and asserts the criterion at its stated tolerance.
"""

import os
import time

import numpy as np
import pytest

import oracles
from vdcsim import experiments as ex
from vdcsim import nal
from vdcsim.cli import main as cli_main
from vdcsim.config import load_config
from vdcsim.robot import planar_two_link, rigid_body_regressor
from vdcsim.sim import run_batch, run_scenario


@pytest.fixture(scope="module")
def slow_run():
    """The slow tracking preset over one full square (20 s) with every diagnostic on."""
    scn = load_config(preset="slow").scenario
    assert scn.diagnostics and scn.adapt and scn.param_error == 0.3 and scn.dt == 1e-3
    t0 = time.perf_counter()
    log = run_scenario(scn)
    return log, time.perf_counter() - t0


def test_criterion_01_regressor_identity(criterion):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    w = ex.check_regressor_identity(rng, 1000)
    # second, independent reference: Newton-Euler about the centre of mass
    worst_ne = 0.0
    for _ in range(1000):
        m = rng.uniform(0.2, 3.0)
        com = rng.uniform(-0.2, 0.2, 3)
        A = rng.normal(size=(3, 3))
        I_c = 0.01 * A @ A.T + 1e-3 * np.eye(3)
        v, om, dv, dw, g = rng.normal(size=(5, 3))
        phi = nal.params_from_physical(m, com, I_c)
        V = np.concatenate([v, om])
        got = rigid_body_regressor(V, V, np.concatenate([dv, dw]), g) @ phi
        ref = oracles.newton_euler_wrench(m, com, I_c, v, om, dv, dw, g)
        worst_ne = max(worst_ne, np.linalg.norm(got - ref) / max(np.linalg.norm(ref), 1e-300))
    secs = time.perf_counter() - t0
    ok = w.value <= 1e-9 and worst_ne <= 1e-9 and secs < 5.0
    criterion(1, "regressor identity", ok,
              f"worst rel err {w.value:.2e} (terms) / {worst_ne:.2e} (Newton-Euler) <= 1e-9, {secs:.2f} s < 5 s")
    assert ok


def test_criterion_02_adaptation_map_and_divergence(criterion, frozen):
    rng = np.random.default_rng(202)
    worst_rt = 0.0
    for _ in range(1000):
        phi = rng.normal(size=10) * rng.uniform(0.01, 10.0)
        back = nal.nal_unmap(nal.nal_map(phi))
        worst_rt = max(worst_rt, np.max(np.abs(back - phi)) / np.max(np.abs(phi)))
    neg = ex.check_bregman_nonneg(rng, 10000).value
    closed = abs(nal.bregman_divergence(np.eye(4), 2 * np.eye(4)) - frozen["bregman_closed_form_4ln2_minus_2"])
    rate = ex.check_bregman_rate(rng, 200).value
    # round trip is exact up to the rounding of one trace evaluation (a few ulp)
    ok = worst_rt <= 4 * np.finfo(float).eps and neg == 0.0 and closed <= 1e-9 and rate <= 1e-6
    criterion(2, "parameter map and divergence", ok,
              f"round trip {worst_rt:.1e} rel, min D_F violation {neg:.1e} over 1e4 pairs, "
              f"closed form err {closed:.1e}, rate vs finite diff {rate:.1e}")
    assert ok


def test_criterion_03_impedance_recovery(criterion):
    w = ex.check_impedance_recovery(np.random.default_rng(303), 1000)
    ok = w.value <= 1e-12
    criterion(3, "required velocity equals actual under target impedance", ok,
              f"worst residual {w.value:.2e} <= 1e-12 over 1000 states")
    assert ok


def test_criterion_04_power_flow_telescoping(criterion, slow_run):
    log, _ = slow_run
    d = log.summary["diagnostics"]
    tele = d["telescoping_max_relative"]
    tip = ex.check_tip_vpf(np.random.default_rng(404), 1000).value
    ok = log.summary["stable"] and d["ticks"] >= 20000 and tele <= 1e-9 and tip <= 1e-12
    criterion(4, "power-flow telescoping", ok,
              f"max relative residual {tele:.1e} <= 1e-9 over {d['ticks']} ticks; tip flow {tip:.1e} <= 1e-12")
    assert ok


def test_criterion_05_accompanying_function_decrease(criterion):
    good = ex.regulation_lyapunov(duration=5.0)
    bad = ex.regulation_lyapunov(duration=5.0, gain_sign=-1.0)
    r = good.report
    detected = bad.report.increase_violations.size > 0 or not bad.stable
    ok = good.stable and r.non_increasing and r.checked > 4000 and detected
    criterion(5, "accompanying function non-increasing", ok,
              f"{r.increase_violations.size} increases over {r.checked} ticks "
              f"(worst rate {r.worst_increase:.1e} W); wrong-sign gains flagged on "
              f"{bad.report.increase_violations.size}/{bad.report.checked} ticks; "
              f"body-only weighting non-increasing={good.alt_report.non_increasing}; "
              f"strict dissipation bound exceeded on {r.bound_violations.size} ticks by <= {r.worst_excess:.1e} W")
    assert ok


def test_criterion_06_physical_consistency(criterion, slow_run):
    log, _ = slow_run
    lmin = np.concatenate([log.cols("lmin_b", 7), log.cols("lmin_a", 7)], axis=1)
    dur = log.phase(2).shape[0] * 1e-3
    ok = log.summary["stable"] and dur >= 20.0 and np.all(lmin > 0.0)
    criterion(6, "estimates stay physically consistent", ok,
              f"min eigenvalue {lmin.min():.2e} > 0 over {lmin.shape[0]} ticks ({dur:.0f} s adaptive phase)")
    assert ok


def test_criterion_07_tracking_presets(criterion, slow_run):
    log, slow_secs = slow_run
    slow = log.summary
    t0 = time.perf_counter()
    fast = run_scenario(load_config(preset="fast").scenario).summary
    fast_secs = time.perf_counter() - t0
    slow_ok = (slow["stable"] and slow["min_E_c"] >= -1e-6 and slow["max_ep_xy"] < 0.01
               and slow["max_eo_deg"] < 2.0)
    ratio_xy = fast["max_ep_xy"] / slow["max_ep_xy"]
    ratio_eo = fast["max_eo_deg"] / slow["max_eo_deg"]
    fast_ok = fast["stable"] and fast["min_E_c"] >= -1e-6 and ratio_xy <= 2.0 and ratio_eo <= 2.0
    ok = slow_ok and fast_ok and slow_secs < 60 and fast_secs < 60
    criterion(7, "tracking presets", ok,
              f"slow: x-y {1e3 * slow['max_ep_xy']:.2f} mm, orient {slow['max_eo_deg']:.2f} deg, "
              f"min E_c {slow['min_E_c']:.1e} J ({slow_secs:.0f} s); fast: x-y {1e3 * fast['max_ep_xy']:.2f} mm "
              f"({ratio_xy:.2f}x), orient {fast['max_eo_deg']:.2f} deg ({ratio_eo:.2f}x), "
              f"min E_c {fast['min_E_c']:.1e} J ({fast_secs:.0f} s); limit 2x")
    assert ok


def test_criterion_08_zwidth_direction(criterion, tmp_path):
    workers = os.cpu_count() or 1
    seen = []
    t0 = time.perf_counter()
    mass, damping = ex.zwidth_sweep(ex.ZWidthSpec(), workers=workers, checkpoint=tmp_path / "ck.jsonl",
                                    progress=seen.append)
    secs = time.perf_counter() - t0
    ex.write_zwidth((mass, damping), ex.ZWidthSpec(), tmp_path)
    m014 = mass.k_e_max[list(mass.values).index(0.14)]
    d5 = damping.k_e_max[list(damping.values).index(5.0)]
    ok = mass.monotone() and damping.monotone() and m014 > d5 and secs < 1800
    curve = lambda c: " ".join(f"{v:g}:{k:.0f}" for v, k in zip(c.values, c.k_e_max))
    criterion(8, "stiffness limit curves", ok,
              f"mass monotone={mass.monotone()} damping monotone={damping.monotone()}; "
              f"k*(m_d=0.14)={m014:.0f} vs k*(b_e=5)={d5:.0f} N/m; {secs:.0f} s on {workers} worker(s); "
              f"mass [{curve(mass)}] damping [{curve(damping)}]")
    assert ok


def test_criterion_09_determinism(criterion, tmp_path):
    runs = []
    for k in range(2):
        out = tmp_path / f"sim{k}"
        assert cli_main(["simulate", "--preset", "fast", "-o", "diagnostics=false", "--out", str(out)]) == 0
        runs.append((out / "runlog.csv").read_bytes())
    sweeps = []
    small = ["-o", "zwidth.mass_grid=[0, 0.14]", "-o", "zwidth.damping_grid=[0, 5]",
             "-o", "zwidth.k_max=400", "-o", "zwidth.resolution=100", "-o", "duration=0.5"]
    for workers in (1, 2, 4):
        out = tmp_path / f"zw{workers}"
        cli_main(["zwidth", *small, "--workers", str(workers), "--out", str(out)])
        sweeps.append(tuple((out / f).read_bytes() for f in ("zwidth_mass.csv", "zwidth_damping.csv")))
    base = load_config(preset="fast").scenario.with_changes(duration=0.5, diagnostics=False)
    batch = [base.with_changes(seed=s) for s in range(3)]
    same_batch = run_batch(batch, workers=1) == run_batch(batch, workers=3)
    ok = runs[0] == runs[1] and len(set(sweeps)) == 1 and same_batch
    criterion(9, "determinism", ok,
              f"run log repeat identical={runs[0] == runs[1]} ({len(runs[0])} bytes); "
              f"sweep CSVs identical across 1/2/4 workers={len(set(sweeps)) == 1}; batch summaries identical={same_batch}")
    assert ok


def test_criterion_10_plant_validity(criterion, frozen):
    p = frozen["two_link_params"]
    arm = planar_two_link(p["l1"], p["l2"], p["m1"], p["m2"], (p["Im1"], p["Im2"]), (0.0, -p["g"], 0.0))
    worst_sym = max(np.max(np.abs(arm.inverse_dynamics(c["q"], c["qd"], c["qdd"]) - c["tau"]))
                    for c in frozen["two_link"])
    worst_cf = ex.check_two_link_lagrangian(np.random.default_rng(1010), 200).value
    drift = ex.check_energy_conservation(np.random.default_rng(1011), 2).value
    ok = worst_sym <= 1e-8 and worst_cf <= 1e-8 and drift <= 1e-3
    criterion(10, "plant validity", ok,
              f"two-link vs symbolic Lagrangian {worst_sym:.1e}, vs closed form {worst_cf:.1e} <= 1e-8; "
              f"energy drift {100 * drift:.3f}% <= 0.1% over 10 s")
    assert ok
