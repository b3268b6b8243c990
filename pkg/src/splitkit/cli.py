"""Command line entry point: ``splitkit {study,kernels,verify}``."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigurationError, InvalidArgument
from .harness import OutputError, emit_outputs, load_config, parse_number, run_convergence_study
from .quadrature import OPTIMAL_TAU_F, kernel_integral, optimal_tau_F

EXIT_OK, EXIT_CONFIG, EXIT_CELL, EXIT_IO = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _num(text):
    try:
        return parse_number(text)
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="splitkit", description="Exponential splitting convergence studies.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("study", help="run a convergence study")
    s.add_argument("--config")
    s.add_argument("--problem", choices=["schrodinger", "transport", "matrix"])
    s.add_argument("--family", choices=["F", "D"])
    s.add_argument("--tau", type=_num, action="append")
    s.add_argument("--h", type=_num, action="append")
    s.add_argument("--t-end", type=_num)
    s.add_argument("--backend", choices=["dense", "krylov", "diagonal-auto"])
    s.add_argument("--ref", choices=["exact", "fine-step"])
    s.add_argument("--out")
    s.add_argument("--emit", choices=["csv", "svg", "both"])
    s.add_argument("--grid-n", type=int)
    s.add_argument("--dx", type=_num)
    s.add_argument("--dim", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--repeats", type=int)
    s.add_argument("--ref-factor", type=int)
    s.add_argument("--ref-rtol", type=_num)

    k = sub.add_parser("kernels", help="error-kernel integral and optimal tau")
    k.add_argument("--family", choices=["F", "D"], default="F")
    k.add_argument("--tau", type=_num)

    sub.add_parser("verify", help="run the quick invariant suite")
    return p


def _study(args) -> int:
    overrides = {
        key: getattr(args, key)
        for key in ("problem", "family", "tau", "h", "t_end", "backend", "ref", "out", "emit",
                    "grid_n", "dx", "dim", "seed", "repeats", "ref_factor", "ref_rtol")
    }
    try:
        cfg = load_config(args.config, overrides)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    table = run_convergence_study(cfg)
    try:
        paths = emit_outputs(table, cfg)
    except OutputError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    for tau in cfg.tau:
        order = table.orders.get((cfg.problem, cfg.family, tau))
        print(f"tau={tau:<10g} order={'n/a' if order is None else format(order, '.4f')}")
    for path in paths:
        print(f"wrote {path}")
    if table.failed:
        for r in table.failed:
            print(f"cell failed: tau={r.tau:g} h={r.h:g}: {r.failure}", file=sys.stderr)
        return EXIT_CELL
    return EXIT_OK


def _kernels(args) -> int:
    try:
        if args.tau is not None:
            print(f"kernel integral {args.family}(tau={args.tau!r}) = {kernel_integral(args.family, args.tau)!r}")
    except InvalidArgument as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.family == "F":
        tau = optimal_tau_F()
        print(f"optimal tau = {tau:.17g}")
        print(f"closed form (3 - sqrt(3))/6 = {OPTIMAL_TAU_F:.17g}")
        print(f"kernel integral at optimal tau = {kernel_integral('F', tau)!r}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "study":
        return _study(args)
    if args.command == "kernels":
        return _kernels(args)
    from .verify import run_all

    return EXIT_OK if run_all() else EXIT_CELL


if __name__ == "__main__":
    sys.exit(main())
