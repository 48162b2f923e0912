"""``vdcsim`` command line: simulate, zwidth, verify, describe.

Exit codes: 0 ok, 1 verification failure, 2 configuration error, 3 numeric blow-up.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ._yaml import ConfigError
from .config import describe, load_config
from .experiments import PRESETS, verify_suite, write_zwidth, zwidth_sweep
from .robot import resolve_robot
from .sim import run_scenario

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3
OUT_ENV = "VDCSIM_OUT"


def _out_dir(arg) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or "vdcsim-out")


def _load(args):
    overrides = list(args.override or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    return load_config(args.config, overrides, preset=getattr(args, "preset", None))


def _robot(cfg):
    robot = resolve_robot(cfg.scenario.robot)
    if len(cfg.scenario.q_start) != robot.n:
        raise ConfigError(f"{cfg.source}: q_start has {len(cfg.scenario.q_start)} entries, robot has {robot.n} joints")
    return robot


def _summary_table(s: dict) -> str:
    rows = [
        ("status", s["status"]),
        ("rms e_p x-y (mm)", f"{1e3 * s['rms_ep_xy']:.3f}"),
        ("rms e_p z (mm)", f"{1e3 * s['rms_ep_z']:.3f}"),
        ("max e_p x-y (mm)", f"{1e3 * s['max_ep_xy']:.3f}"),
        ("rms e_o (deg)", f"{s['rms_eo_deg']:.4f}"),
        ("max e_o (deg)", f"{s['max_eo_deg']:.4f}"),
        ("max contact force (N)", f"{s['max_contact_force']:.3f}"),
        ("rms torque (N m)", f"{s['rms_tau']:.4f}"),
        ("min E_c (J)", f"{s['min_E_c']:.3e}"),
        ("passive", str(s["passive"])),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    robot = _robot(cfg)  # fails before anything is written
    log = run_scenario(cfg.scenario, robot)
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log.write_csv(out / "runlog.csv")
    log.summary["config"] = cfg.scenario.to_dict()
    log.write_summary(out / "summary.json")
    print(_summary_table(log.summary))
    print(f"wrote {out / 'runlog.csv'} and {out / 'summary.json'}")
    return EXIT_OK if log.summary["stable"] else EXIT_BLOWUP


def cmd_zwidth(args) -> int:
    cfg = _load(args)
    _robot(cfg)
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(pt):
        extra = f" ({pt.note})" if pt.note else ""
        print(f"{pt.element:>8} {pt.value:8.3f}  k_e* = {pt.k_e_max:9.1f} N/m{extra}", file=sys.stderr, flush=True)

    curves = zwidth_sweep(cfg.zwidth, workers=args.workers or os.cpu_count() or 1,
                          checkpoint=out / "zwidth_checkpoint.jsonl", progress=progress)
    summary = write_zwidth(curves, cfg.zwidth, out)
    for c in curves:
        print(f"{c.element}: monotone={c.monotone()} critical_value={c.critical_value()}")
    print(f"wrote curves to {out}")
    return EXIT_OK if all(v["monotone"] for v in summary["curves"].values()) else EXIT_VERIFY


def cmd_verify(args) -> int:
    results = verify_suite(seed=args.seed or 0, scale=args.scale)
    failed = [r for r in results if not r.passed]
    for r in results:
        if args.verbose or not r.passed:
            print(r.line())
    if failed:
        first = failed[0]
        print(f"first counterexample ({first.name}):")
        print(json.dumps(first.counterexample, indent=2))
        return EXIT_VERIFY
    print(f"all {len(results)} properties passed")
    return EXIT_OK


def cmd_describe(args) -> int:
    sys.stdout.write(describe())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vdcsim", description=__doc__.splitlines()[0])
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, with_preset=True):
        sp.add_argument("config", nargs="?", help="YAML config file (defaults if omitted)")
        sp.add_argument("-o", "--override", action="append", metavar="KEY=VALUE", help="override one key")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./vdcsim-out)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int, help="worker processes (default: logical cores)")
        if with_preset:
            sp.add_argument("--preset", choices=sorted(PRESETS))

    s = sub.add_parser("simulate", help="run one scenario and write its log and summary")
    common(s)
    s.set_defaults(func=cmd_simulate)
    z = sub.add_parser("zwidth", help="sweep the passive stiffness limit over both element grids")
    common(z, with_preset=False)
    z.set_defaults(func=cmd_zwidth)
    v = sub.add_parser("verify", help="run the invariant suite")
    v.add_argument("-v", "--verbose", action="store_true", help="list every property with its tolerance")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--scale", type=float, default=1.0, help="multiply sample counts")
    v.set_defaults(func=cmd_verify)
    d = sub.add_parser("describe", help="print the config schema with defaults")
    d.set_defaults(func=cmd_describe)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
