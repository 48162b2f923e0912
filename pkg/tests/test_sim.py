import json

import numpy as np
import pytest

from vdcsim.sim import (
    RUNLOG_SCHEMA, Scenario, SquarePath, parallel_map, quintic, read_runlog_csv, run_batch, run_scenario,
    runlog_columns,
)

SHORT = Scenario(duration=0.2, diagnostics=False)


def test_quintic_boundaries_and_symmetry(frozen):
    p, v, a = quintic(0.0, 1.0, 2.0, 0.0)
    assert (p, v, a) == (0.0, 0.0, 0.0)
    p, v, a = quintic(0.0, 1.0, 2.0, 2.0)
    assert p == 1.0 and v == 0.0 and a == 0.0
    assert quintic(0.0, 1.0, 2.0, 1.0)[0] == pytest.approx(0.5, abs=1e-15)
    assert quintic(0.0, 1.0, 2.0, 5.0)[0] == 1.0
    assert quintic(0.0, 1.0, 2.0, -1.0)[0] == 0.0
    ts = np.linspace(0, 1, 100001)
    peak = max(quintic(0.0, 1.0, 1.0, t)[1] for t in ts)
    assert peak == pytest.approx(frozen["quintic_peak_speed_unit_tf"], abs=1e-9)
    with pytest.raises(ValueError):
        quintic(0.0, 1.0, 0.0, 0.5)


def test_quintic_derivatives_consistent():
    h = 1e-6
    for t in (0.3, 0.9, 1.7):
        p1, v, a = quintic(0.0, 2.0, 2.0, t)
        assert (quintic(0.0, 2.0, 2.0, t + h)[0] - quintic(0.0, 2.0, 2.0, t - h)[0]) / (2 * h) == pytest.approx(v, rel=1e-7)
        assert (quintic(0.0, 2.0, 2.0, t + h)[1] - quintic(0.0, 2.0, 2.0, t - h)[1]) / (2 * h) == pytest.approx(a, rel=1e-6)


def test_square_path_closed_and_continuous():
    path = SquarePath(np.array([0.4, 0.0, 0.1]), np.array([1.0, 0, 0, 0]), 0.1, 2.0)
    c = path.corners()
    assert np.array_equal(c[0], c[-1])
    for k in range(5):
        p, xd, quat = path(k * path.t_f)
        assert np.allclose(p, c[k]) and np.allclose(xd, 0.0)
        assert np.array_equal(quat, path.quat)
    # moves in the y-z plane only
    ts = np.linspace(0, path.period, 401)
    xs = np.array([path(t)[0] for t in ts])
    assert np.allclose(xs[:, 0], 0.4)


def test_square_path_peak_speed_scales_with_segment_time():
    def peak(t_f):
        path = SquarePath(np.zeros(3), np.array([1.0, 0, 0, 0]), 0.1, t_f)
        return max(np.linalg.norm(path(t)[1][:3]) for t in np.linspace(0, path.period, 4001))

    assert peak(2.0) / peak(5.0) == pytest.approx(2.5, rel=1e-6)
    assert peak(5.0) == pytest.approx(0.1 * 15 / (8 * 5.0), rel=1e-6)


def test_scenario_validation():
    for bad in ({"dt": 0.0}, {"t_f": -1.0}, {"substeps": 0}, {"mode": "free"}):
        with pytest.raises(ValueError):
            Scenario(**bad)
    s = Scenario().with_changes(wall={"k_e": 1500.0}, human={"enabled": False})
    assert s.wall.k_e == 1500.0 and s.wall.m_d == 0.14 and not s.human.enabled


def test_zero_duration_run_is_empty():
    log = run_scenario(Scenario(duration=0.0, initial_spread=0.0))
    assert log.data.shape == (0, len(runlog_columns(7)))
    assert log.summary["status"] == "ok" and log.summary["ticks"] == 0


def test_runs_are_bit_identical():
    a, b = run_scenario(SHORT), run_scenario(SHORT)
    assert np.array_equal(a.data, b.data, equal_nan=True)
    assert a.summary == b.summary
    c = run_scenario(SHORT.with_changes(seed=1))
    assert not np.array_equal(a.data[:, 2:9], c.data[:, 2:9])


def test_calibration_reaches_start():
    log = run_scenario(SHORT)
    assert log.summary["calibrated"]
    first = log.phase(2)[0]
    q = first[[log.columns.index(f"q{i}") for i in range(1, 8)]]
    assert np.max(np.abs(q - np.array(SHORT.q_start))) < 1e-3
    assert np.all(np.diff(log.col("t")) > 0)
    assert np.allclose(np.diff(log.col("t")), 1e-3)


def test_substep_refinement_converges():
    base = Scenario(duration=0.25, diagnostics=False)
    ends = []
    for s in (10, 20, 40):
        log = run_scenario(base.with_changes(substeps=s))
        ends.append(np.concatenate([log.cols("q", 7)[-1], log.cols("qd", 7)[-1]]))
    d1 = np.max(np.abs(ends[0] - ends[1]))
    d2 = np.max(np.abs(ends[1] - ends[2]))
    assert d1 < 1e-6 and d2 < 1e-6
    assert d2 < 0.6 * d1  # first-order convergence


def test_free_motion_regulation_below_one_millimetre():
    scn = Scenario(mode="pHRI", side=0.0, duration=10.0, human={"enabled": False}, diagnostics=False)
    log = run_scenario(scn)
    ep = log.phase(2)[:, [log.columns.index(c) for c in ("ep_x", "ep_y", "ep_z")]]
    assert log.summary["stable"]
    assert np.linalg.norm(ep[-1]) < 1e-3
    assert np.max(np.linalg.norm(ep[-1000:], axis=1)) < 1e-3


def test_csv_round_trip(tmp_path):
    log = run_scenario(SHORT)
    path = tmp_path / "run.csv"
    log.write_csv(path)
    assert path.read_text().splitlines()[0] == f"# {RUNLOG_SCHEMA}"
    header, data = read_runlog_csv(path)
    assert header == log.columns
    assert np.array_equal(data, log.data, equal_nan=True)
    log.write_summary(tmp_path / "s.json")
    assert json.loads((tmp_path / "s.json").read_text())["status"] == "ok"


def test_csv_rejects_foreign_schema(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("# other/1\na,b\n1,2\n")
    with pytest.raises(ValueError):
        read_runlog_csv(path)


def test_unstable_contact_is_reported_as_blowup():
    # a large gated virtual mass destabilises the contact loop on the default model
    from vdcsim.experiments import contact_scenario, zwidth_template

    log = run_scenario(contact_scenario(zwidth_template(), "mass", 1.68, 0.0))
    assert log.summary["status"] == "blowup" and not log.summary["stable"]
    assert np.all(np.isfinite(log.data[:, 2:16]))


def test_parallel_map_preserves_order():
    assert parallel_map(abs, [-3, 1, -2], workers=2) == [3, 1, 2]
    scns = [SHORT.with_changes(duration=0.05, seed=s) for s in (0, 1)]
    assert run_batch(scns, workers=2) == run_batch(scns, workers=1)
