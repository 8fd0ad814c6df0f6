# bgp.py

import argparse
import sys
from typing import List, Optional

from core.context import RunContext
from core.errors import BGPError
from core.logger import log, set_quiet
from modules.commands import COMMANDS

EXIT_OK, EXIT_UNEXPECTED = 0, 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bgp",
        description="Balanced-growth-path solver for a multi-country trade and variety-growth model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario file (YAML or JSON)")
    common.add_argument("--out", help="output directory (default: out/<scenario>)")
    common.add_argument("--tol", type=float, help="outer-loop tolerance; inner loops are tightened to match")
    common.add_argument("--max-iter", type=int, dest="max_iter", help="iteration cap for every loop")
    common.add_argument("--seed", type=int, help="random initial guess seed")
    common.add_argument("--format", choices=["csv", "json"], action="append", dest="formats",
                        help="table format; repeat for both")
    common.add_argument("--quiet", action="store_true", help="warnings and errors only")

    sub.add_parser("solve", parents=[common], help="solve one BGP equilibrium")
    sub.add_parser("counterfactual", parents=[common], help="solve baseline and shocked BGPs, decompose welfare")
    cal = sub.add_parser("calibrate", parents=[common], help="Head-Ries trade costs and (T, psi) fit")
    cal.add_argument("--theta", type=float, help="override the trade elasticity")
    sweep = sub.add_parser("sweep", parents=[common], help="g* over a grid of trade-cost multipliers")
    sweep.add_argument("--theta", type=float, help="override the trade elasticity (robustness runs)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_quiet(args.quiet)
    try:
        ctx = RunContext(
            config_path=args.config,
            out_dir=args.out,
            tol=args.tol,
            max_iter=args.max_iter,
            seed=args.seed,
            formats=args.formats,
            theta=getattr(args, "theta", None),
            quiet=args.quiet,
        )
        log("bgp", f"{args.command}: {ctx.name} -> {ctx.out_dir}")
        return COMMANDS[args.command](ctx)
    except BGPError as err:
        log("bgp", f"{type(err).__name__}: {err}", level="error")
        return err.exit_code
    except KeyboardInterrupt:
        log("bgp", "interrupted", level="warning")
        return EXIT_UNEXPECTED
    except Exception as err:  # noqa: BLE001
        log("bgp", f"unexpected error: {type(err).__name__}: {err}", level="error")
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
