"""Command line entry point: ``geese run|sweep|ablate|sense|plot|calibrate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from geese import harness
from geese.errors import ConfigError
from geese.optimizer import DESK_INIT_SIZE
from geese.plots import emit_plots


def _common(p: argparse.ArgumentParser, epsilon: str, init: str):
    p.add_argument("--config", help="key=value config file; command line flags win")
    p.add_argument("--problem", default=None, help="S1, S2 or S3")
    p.add_argument("--cases", type=int, default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--epsilon", default=None, help=f"threshold(s), comma separated (default {epsilon})")
    p.add_argument("--calibrate", type=float, default=None, metavar="FRACTION",
                   help="set epsilon so this fraction of uniform states is feasible")
    p.add_argument("--init", default=None, help=f"initial sample size(s), comma separated (default {init})")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--full-scale", action="store_true", help="use the full-scale wide surrogate networks")
    p.add_argument("--set", action="append", default=[], metavar="geese.KEY=VALUE",
                   help="override a GEESE setting, e.g. --set geese.focus=2")
    p.set_defaults(default_epsilon=epsilon, default_init=init)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geese", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="compare algorithms on one problem")
    _common(p, "0.075", "64")
    p.add_argument("--algos", default=None, help="comma separated: geese,random,ga,pso")

    p = sub.add_parser("sweep", help="threshold x initial-size grid")
    _common(p, "0.05,0.075,0.1", "16,32,64")
    p.add_argument("--algos", default=None)

    p = sub.add_parser("ablate", help="paired GEESE ablations")
    _common(p, "0.05", str(DESK_INIT_SIZE))
    p.add_argument("--which", default=None, help="comma separated subset of 1,2,3,4")

    p = sub.add_parser("sense", help="one-at-a-time hyperparameter sensitivity")
    _common(p, "0.075", str(DESK_INIT_SIZE))
    p.add_argument("--grid", default=None, help="comma separated subset of L,NIT,lr,eps_e")

    p = sub.add_parser("plot", help="render SVG charts from a results CSV")
    p.add_argument("csv")
    p.add_argument("--out", default=None)

    p = sub.add_parser("calibrate", help="threshold giving a target feasible fraction")
    p.add_argument("--problem", default="S1")
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    return parser


def settings_from_args(args) -> dict:
    settings: dict = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        settings.update(harness.parse_config_text(text))
    settings.setdefault("epsilons", args.default_epsilon)
    settings.setdefault("init_sizes", args.default_init)
    flags = {
        "problem": args.problem, "n_cases": args.cases, "budget": args.budget, "epsilons": args.epsilon,
        "init_sizes": args.init, "seed": args.seed, "out": args.out, "workers": args.workers,
        "algorithms": getattr(args, "algos", None), "ablations": getattr(args, "which", None),
        "sensitivity": getattr(args, "grid", None),
    }
    settings.update({k: v for k, v in flags.items() if v is not None})
    if args.full_scale:
        settings["full_scale"] = "true"
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        key = key if key.startswith("geese.") else "geese." + key
        settings[key] = value
    if args.calibrate is not None:
        problem = settings.get("problem", "S1")
        settings["epsilons"] = str(harness.calibrated_epsilon(problem, args.calibrate))
    return settings


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "plot":
            paths = emit_plots(args.csv, args.out)
            for p in paths:
                print(p)
            return 0
        if args.command == "calibrate":
            eps = harness.calibrated_epsilon(args.problem, args.fraction, args.samples, args.seed)
            print(f"{eps:.6g}")
            return 0
        exp = harness.build_config(settings_from_args(args))
        if args.command in ("run", "sweep"):
            rows, _ = harness.run_experiment(exp)
            out_file = Path(exp.out) / "summary.csv"
        elif args.command == "ablate":
            rows = harness.run_ablations(exp)
            out_file = Path(exp.out) / "ablations.csv"
        else:
            rows = harness.run_sensitivity(exp)
            out_file = Path(exp.out) / "sensitivity.csv"
        harness.print_rows(rows)
        print(f"wrote {out_file}")
        return 0
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
