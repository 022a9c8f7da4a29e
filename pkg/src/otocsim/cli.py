"""Command-line driver: ``otocsim {exact,protocol,frame-potential,compile}``.

Exit codes: 0 success, 1 validation error, 2 numerical infeasibility.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .harness import COMMANDS
from .molecule import MoleculeFileError
from .pulse import InfeasibleTimingError

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _seed(s: str) -> int:
    value = int(s, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _workers(s: str) -> int:
    value = int(s)
    if value < 1:
        raise argparse.ArgumentTypeError("workers must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="otocsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "exact": "exact O(t) and modified O_M(t) for n = 0..n_periods_max",
        "protocol": "randomized-measurement estimate of the OTOC",
        "frame-potential": "frame potentials of design-Hamiltonian ensembles",
        "compile": "solve refocusing times and verify the compiled ZZ block",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="flat key = value config file")
        p.add_argument("--seed", type=_seed, required=True, help="master seed (unsigned 64-bit)")
        p.add_argument("--workers", type=_workers, default=1, help="worker processes")
        p.add_argument("--out", type=Path, help="output CSV path (default: stdout)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key; may be repeated")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config, args.set)
        COMMANDS[args.command](cfg, args.seed, args.out, args.workers)
    except InfeasibleTimingError as exc:
        where = f" [{exc.equation}]" if exc.equation else ""
        print(f"otocsim: infeasible: {exc}{where}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, MoleculeFileError, ValueError) as exc:
        print(f"otocsim: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
