"""Command-line entry point: simulate, monte-carlo, design-gains, terrain export."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import DEFAULT_CONFIG, DEFAULT_SCHEDULE, SimConfig
from .gcas import GainSchedule


def _load_common(args):
    cfg = SimConfig.load(args.config)
    schedule = GainSchedule.load(args.gains)
    return cfg, schedule


def cmd_simulate(args) -> int:
    from .harness.metrics import run_metrics
    from .harness.scenario import load_scenario
    from .harness.simulate import AbortedRunError, run_scenario

    cfg, schedule = _load_common(args)
    sc = load_scenario(args.scenario)
    sc = replace(sc, gcas=sc.gcas and not args.no_gcas, fep=sc.fep and not args.no_fep)
    try:
        log = run_scenario(sc, cfg, schedule if sc.gcas else None, csv_path=args.out)
    except AbortedRunError as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return 2
    m = run_metrics(log)
    print(json.dumps(m.as_dict(), indent=2))
    return 0


def cmd_monte_carlo(args) -> int:
    from .harness.montecarlo import McConfig, monte_carlo

    cfg, schedule = _load_common(args)
    mc = McConfig(n=args.n, seed=args.seed, workers=args.workers)
    result = monte_carlo(mc, cfg, schedule, runs_dir=args.runs_dir)
    text = result.dumps()
    if args.out:
        Path(args.out).write_text(text + "\n")
    r = result.report
    print(f"success {r['n_success']}/{r['n']} ({100 * r['success_rate']:.2f}%), "
          f"mean min altitude {r['metrics']['min_altitude'].get('mean', float('nan')):.1f} m")
    return 0


def cmd_design_gains(args) -> int:
    from .gain_designer import GridSpec, ObjectiveWeights, build_schedule

    cfg = SimConfig.load(args.config)
    grid = GridSpec.loads(Path(args.grid).read_text()) if args.grid else GridSpec()
    weights = ObjectiveWeights.parse(args.weights)

    def progress(i, n, rep):
        print(f"[{i}/{n}] phi={rep.point.phi:+.3f} theta={rep.point.theta:+.3f} vt={rep.point.vt:.0f} "
              f"k1={rep.gains.k1:.4g}{' FAILED' if rep.failed else ''}", file=sys.stderr, flush=True)

    schedule, reports = build_schedule(grid, weights, cfg, seed=args.seed, workers=args.workers,
                                       progress=None if args.quiet else progress)
    schedule.save(args.out)
    report = [{
        "phi": r.point.phi, "theta": r.point.theta, "vt": r.point.vt, "h0": r.point.h,
        "k1": r.gains.k1, "k2": r.gains.k2, "J_total": r.J_total, "failed": r.failed,
        "candidates": [{"k1": c.k1, "J1": c.J[0], "J2": c.J[1], "J3": c.J[2], "collided": c.collided, "min_h": c.min_h}
                       for c in r.candidates],
    } for r in reports]
    report_path = Path(args.report) if args.report else Path(args.out).with_suffix(".report.json")
    report_path.write_text(json.dumps(report, indent=1) + "\n")
    print(f"wrote {args.out} ({schedule.shape[0]}x{schedule.shape[1]}x{schedule.shape[2]}) and {report_path}")
    return 0


def cmd_terrain_export(args) -> int:
    from .terrain import peaks_terrain

    grid = peaks_terrain(tuple(args.x_range), tuple(args.y_range), args.resolution,
                         args.horizontal_scale, args.vertical_scale)
    grid.save(args.out)
    print(f"wrote {args.out} ({grid.x.size}x{grid.y.size}, max {grid.z.max():.1f} m)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="autogcas", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=str(DEFAULT_CONFIG), help="configuration YAML")
        sp.add_argument("--gains", default=str(DEFAULT_SCHEDULE), help="gain schedule file")

    s = sub.add_parser("simulate", help="run one scenario and write its CSV log")
    common(s)
    s.add_argument("--scenario", required=True)
    s.add_argument("--no-gcas", action="store_true")
    s.add_argument("--no-fep", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("monte-carlo", help="randomized campaign on flat ground")
    common(m)
    m.add_argument("--n", type=int, default=200)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", default=None, help="aggregate JSON report")
    m.add_argument("--runs-dir", default=None, help="directory for per-run CSV logs")
    m.add_argument("--workers", type=int, default=1)
    m.set_defaults(func=cmd_monte_carlo)

    d = sub.add_parser("design-gains", help="optimise the ECBF gain schedule")
    d.add_argument("--config", default=str(DEFAULT_CONFIG))
    d.add_argument("--grid", default=None, help="grid file (default 7x6x6 grid)")
    d.add_argument("--weights", default="0.2,0.3,0.5")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True)
    d.add_argument("--report", default=None)
    d.add_argument("--workers", type=int, default=1)
    d.add_argument("--quiet", action="store_true")
    d.set_defaults(func=cmd_design_gains)

    t = sub.add_parser("terrain", help="terrain utilities")
    tsub = t.add_subparsers(dest="terrain_command", required=True)
    te = tsub.add_parser("export", help="write a peaks terrain grid file")
    te.add_argument("--x-range", type=float, nargs=2, default=[0.0, 12000.0])
    te.add_argument("--y-range", type=float, nargs=2, default=[-6000.0, 6000.0])
    te.add_argument("--resolution", type=float, default=50.0)
    te.add_argument("--horizontal-scale", type=float, default=2000.0)
    te.add_argument("--vertical-scale", type=float, default=150.0)
    te.add_argument("--out", required=True)
    te.set_defaults(func=cmd_terrain_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
