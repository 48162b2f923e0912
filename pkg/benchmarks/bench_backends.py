"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_backends.py [--repeat N] [--seconds S]
"""

import argparse
import timeit

import numpy as np

from vdcsim import backend
from vdcsim.controller import ControllerGains, ImpedanceTarget, VDCController, perturbed_adaptation
from vdcsim.robot import default_robot
from vdcsim.config import load_config
from vdcsim.sim import run_scenario


def cases(kern):
    rng = np.random.default_rng(0)
    robot = default_robot().with_kernels(kern)
    q, qd, qdd, tau = rng.uniform(-1, 1, (4, 7))
    w = rng.normal(size=6)
    est = perturbed_adaptation(robot, 10.0, 0.3, np.random.default_rng(1))
    ctrl = VDCController(robot, ControllerGains.uniform(7), ImpedanceTarget.standard(), est)
    pose = robot.forward_kinematics(q)
    target = (pose.ee_position + 0.01, pose.ee_quaternion, np.full(6, 0.05), w)

    def plant():
        robot.step(q.copy(), qd.copy(), tau, w, 1e-4, 10)

    def tick():
        # restart from the same estimates so repeated calls measure the same work
        ctrl.adaptation = est.copy()
        ctrl.task_tick(q, qd, *target)

    return {
        "forward kinematics": lambda: robot.forward_kinematics(q),
        "inverse dynamics": lambda: robot.inverse_dynamics(q, qd, qdd, w),
        "plant step (10 sub-steps)": plant,
        "controller tick": tick,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seconds", type=float, default=0.2, help="simulated seconds for the end-to-end run")
    args = ap.parse_args(argv)

    names = backend.available()
    table = {}
    for name in names:
        for label, fn in cases(backend.load(name)).items():
            n, _ = timeit.Timer(fn).autorange()
            best = min(timeit.repeat(fn, number=n, repeat=args.repeat)) / n
            table.setdefault(label, {})[name] = best

    scn = load_config(preset="fast").scenario.with_changes(duration=args.seconds, diagnostics=False, initial_spread=0.0)
    for name in names:
        kern = backend.load(name)
        t = timeit.timeit(lambda kern=kern: run_scenario(scn, robot=default_robot().with_kernels(kern)), number=1)
        table.setdefault(f"simulate {args.seconds:g} s", {})[name] = t

    print(f"{'case':<28}" + "".join(f"{n:>14}" for n in names) + ("    speed-up" if len(names) > 1 else ""))
    for label, row in table.items():
        cells = "".join(f"{row[n] * 1e6:>12.1f}us" if row[n] < 0.1 else f"{row[n]:>13.2f}s" for n in names)
        extra = f"{row['python'] / row['c']:>11.1f}x" if {"c", "python"} <= row.keys() else ""
        print(f"{label:<28}{cells}{extra}")


if __name__ == "__main__":
    main()
