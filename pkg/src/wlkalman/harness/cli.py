"""Command-line entry point: ``wlkalman run | list-scenarios | validate``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigurationError, WLKalmanError
from .config import BUILTIN, load_config, resolve_scenario
from .csvio import emit_csv
from .runner import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("wlkalman")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _name_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="wlkalman", description="Distributed widely linear Kalman filter experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write the result CSV")
    run.add_argument("--scenario", required=True, help="builtin name or config file path")
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output CSV path (default: config 'out' or <scenario>.csv)")
    run.add_argument("--variants", type=_name_list)
    run.add_argument("--eta-sweep", type=_float_list)
    run.add_argument("--horizon", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--no-theory", action="store_true", help="skip the theoretical error analysis")

    sub.add_parser("list-scenarios", help="list builtin scenarios")

    val = sub.add_parser("validate", help="check a config file without running it")
    val.add_argument("config")
    return p


def _print_summary(result, out):
    print(f"{'eta':>6} {'variant':<14} {'steady MSE':>12} {'se':>10} {'theory':>12}", file=out)
    for point in result.points:
        for name, s in point.series.items():
            rep = point.reports.get(name)
            theory = f"{rep.network_theoretical:12.6g}" if rep else f"{'-':>12}"
            print(f"{point.eta:6.3g} {name:<14} {s.network_steady:12.6g} {s.network_steady_se:10.3g} {theory}",
                  file=out)


def cmd_run(args, out):
    cfg = resolve_scenario(args.scenario)
    cfg = cfg.with_overrides(trials=args.trials, seed=args.seed, variants=args.variants,
                             eta_sweep=args.eta_sweep, horizon=args.horizon, workers=args.workers,
                             out=args.out)
    cfg.validate()
    path = cfg.out or f"{cfg.name}.csv"
    result = run_scenario(cfg, theory=not args.no_theory,
                          progress=lambda pt: log.info("eta=%g done", pt.eta))
    for d in result.diagnostics:
        print(f"diagnostic: {d}", file=sys.stderr)
    emit_csv(result, path)
    _print_summary(result, out)
    print(f"wrote {path}", file=out)
    return EXIT_OK


def cmd_list(args, out):
    for name, factory in BUILTIN.items():
        cfg = factory()
        print(f"{name:<12} {factory.__doc__.strip().splitlines()[0]}", file=out)
        print(f"{'':<12} variants={','.join(cfg.variants)} trials={cfg.trials} horizon={cfg.horizon}",
              file=out)
    return EXIT_OK


def cmd_validate(args, out):
    cfg = load_config(args.config)
    topo = cfg.build_topology()
    for eta in cfg.eta_sweep:
        cfg.build_model(topo.n_nodes, eta)
    print(f"{args.config}: ok ({cfg.kind}, {topo.n_nodes} nodes, {len(cfg.eta_sweep)} sweep points)", file=out)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "list-scenarios": cmd_list, "validate": cmd_validate}


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, WLKalmanError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
