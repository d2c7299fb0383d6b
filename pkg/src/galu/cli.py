"""``galu <subcommand>``: run an experiment or a property suite and write its results.

Exit codes: 0 success, 1 usage error, 2 property-suite failure, 3 capacity error.
"""
import argparse
import json
import logging
import sys

from .errors import CapacityError
from .experiments import ACTIVATIONS, EXPERIMENTS, MODES, resolve_config, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_PROPERTY, EXIT_CAPACITY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser():
    parser = _Parser(prog="galu", description="GaLU network experiments and property checks.")
    sub = parser.add_subparsers(dest="experiment", metavar="subcommand", parser_class=_Parser)
    sub.required = True
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="FILE", help="JSON config; flags override its fields")
        p.add_argument("--m", type=_int_list, metavar="N|LIST")
        p.add_argument("--d", type=_int_list, metavar="N|LIST")
        p.add_argument("--k", type=_int_list, metavar="N|LIST")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--activation", choices=ACTIVATIONS)
        p.add_argument("--mode", choices=MODES)
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--success-mse", dest="success_mse", type=float)
        p.add_argument("--k-max", dest="k_max", type=int)
        p.add_argument("--ratios", type=_float_list, metavar="LIST")
        p.add_argument("--delta", type=float)
        p.add_argument("--n-test", dest="n_test", type=int)
        p.add_argument("--loss", choices=("mse", "hinge"))
        p.add_argument("--iterations", type=int, help="optimizer iterations (default 20000)")
        p.add_argument("--full-budget", dest="full_budget", action="store_true", default=None,
                       help="use the 100k-iteration optimizer budget")
        p.add_argument("--workers", type=int)
        p.add_argument("--memory-budget", dest="memory_budget", type=int, metavar="BYTES",
                       help="largest feature or Gram matrix to allocate (default 4 GiB)")
        p.add_argument("--negate-indicator", dest="negate_indicator", action="store_true", default=None,
                       help=argparse.SUPPRESS)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {
        key: getattr(args, key)
        for key in ("m", "d", "k", "seed", "trials", "activation", "mode", "out", "success_mse", "k_max",
                    "ratios", "delta", "n_test", "loss", "full_budget", "workers", "memory_budget",
                    "negate_indicator")
    }
    if args.iterations is not None:
        overrides["optimizer"] = {"iterations": args.iterations}
    try:
        file_values = {}
        if args.config:
            with open(args.config) as fh:
                file_values = json.load(fh)
            if not isinstance(file_values, dict):
                raise ValueError("config file must hold a JSON object")
        cfg = resolve_config(args.experiment, file_values, overrides)
    except (OSError, ValueError, TypeError) as exc:
        print(f"galu: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        rows, results = run_experiment(cfg)
    except CapacityError as exc:
        print(f"galu: capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except PermissionError as exc:
        print(f"galu: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if results is not None:
        for r in results:
            print(r.line())
        if not all(r.passed for r in results):
            return EXIT_PROPERTY
    else:
        print(f"wrote {len(rows)} rows to {cfg.out}/results.csv")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
