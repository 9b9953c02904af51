"""Command-line entry point.

::

    uioinv synthesize  --config plant.cfg --out out/
    uioinv reconstruct --config exp.cfg --nd 15 --seed 1
    uioinv track-uc    --config case4.cfg --nc 1 --nd 10
    uioinv demo case1  --out demo_out/

The exit code is 0 when every check of the report passes, 1 when a check
fails and 2 when the run raises an error.
"""

import argparse
import sys

from .errors import UioInvError
from .experiment import ExperimentConfig, run_demo, run_experiment
from .fileio import read_config

SUBCOMMANDS = {
    "synthesize": "synthesize",
    "reconstruct": "reconstruct",
    "track": "track",
    "track-uc": "track_uc",
    "bound-curve": "bound_curve",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="uioinv", description="Unknown-input observers and delayed inversion experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run a {name} experiment from a config file")
        p.add_argument("--config", required=True, help="key = value experiment file")
        p.add_argument("--nd", type=int, help="FIR delay n_d")
        p.add_argument("--nc", type=int, help="controller order n_c")
        p.add_argument("--seed", type=int, help="seed for random_seeded signals")
        p.add_argument("--out", help="output directory")
        p.add_argument("--plot", action="store_true", help="also render SVGs (needs matplotlib)")
    p = sub.add_parser("demo", help="run a built-in case study")
    p.add_argument("case", choices=["case1", "case2", "case3", "case4"])
    p.add_argument("--out", default="demo_out", help="output directory")
    p.add_argument("--plot", action="store_true", help="also render SVGs (needs matplotlib)")
    return parser


def _load(args):
    """Read the config; the subcommand sets the mode and flags override keys."""
    mapping = read_config(args.config)
    mapping["mode"] = SUBCOMMANDS[args.command]
    overrides = {"n_d": args.nd, "n_c": args.nc, "seed": args.seed, "output_dir": args.out}
    mapping.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_mapping(mapping)


def _summary(label, rep):
    status = "PASS" if rep.passed else "FAIL"
    failed = [k for k, v in rep.checks.items() if not v]
    tail = f" (failed: {', '.join(failed)})" if failed else ""
    return f"{status} {label}{tail}"


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "demo":
            reports = run_demo(args.case, args.out, plot=args.plot)
            for key, rep in reports.items():
                print(_summary(f"{args.case}/{key}", rep))
            ok = all(r.passed for r in reports.values())
        else:
            cfg = _load(args)
            rep = run_experiment(cfg, plot=args.plot)
            print(_summary(cfg.mode, rep))
            ok = rep.passed
    except UioInvError as exc:
        print(f"error [{exc.kind}]: {exc}", file=sys.stderr)
        return 2
    except (OSError, TypeError, ValueError) as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
