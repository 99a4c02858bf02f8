"""Command line wrapper: `plotkit <figure-kind> --in ... --out ...`."""

import argparse
import logging
import sys
from pathlib import Path

from .figures import FIGURE_KINDS, FigureSpec, SchemaError, render

log = logging.getLogger("plotkit")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotkit", description=__doc__)
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in FIGURE_KINDS:
        p = sub.add_parser(kind, help=f"render a {kind} figure")
        p.add_argument("--in", dest="inputs", type=Path, nargs="+", required=True,
                       help="input CSV (or fit-report JSON for `fits`)")
        p.add_argument("--out", type=Path, required=True, help="output image path")
        p.add_argument("--log-x", action="store_true")
        p.add_argument("--log-y", action="store_true")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = _parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=tuple(args.inputs),
        out=args.out,
        log_x=args.log_x,
        log_y=args.log_y,
    )
    try:
        series = render(spec)
    except (SchemaError, OSError) as err:
        log.error("%s", err)
        return 1
    log.info("wrote %s (%d series)", spec.out, len(series))
    return 0


if __name__ == "__main__":
    sys.exit(main())
