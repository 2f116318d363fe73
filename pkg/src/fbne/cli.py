"""Command-line entry point: ``fbne run|grid|gen-asia|inspect-model``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .bif import builtin_asia
from .bn import forward_sample
from .data import write_csv


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fbne", description="Federated Bayesian network ensemble simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="override the config's output directory")

    p = sub.add_parser("grid", help="run a scenario grid (resumable)")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output")

    p = sub.add_parser("gen-asia", help="sample records from the Asia network")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("inspect-model", help="describe a BIF network")
    p.add_argument("bif")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "run":
        raw = harness.load_config(args.config)
        if args.output:
            raw["output"] = args.output
        raw.setdefault("output", "results")
        result = harness.run_scenario(raw)
        sys.stdout.write(harness.summary_rows([result]))
    elif args.command == "grid":
        grid = harness.load_config(args.config)
        root = harness.run_grid(grid, args.output, args.jobs)
        print(f"results written to {root}")
    elif args.command == "gen-asia":
        write_csv(forward_sample(builtin_asia(), args.n, args.seed), args.out)
    elif args.command == "inspect-model":
        sys.stdout.write(harness.inspect_model(args.bif))
    return 0


if __name__ == "__main__":
    sys.exit(main())
