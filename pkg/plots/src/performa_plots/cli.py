"""`plot` command line: render surface and estimator-summary artifacts."""

from __future__ import annotations

import argparse
import sys

from .io import SchemaError
from .render import load_style, plot_estimators, plot_surface


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot", description="render performa CSV/JSON artifacts to PNG")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("surface", help="3D metric surface with markers")
    p.add_argument("csv", help="surface CSV path")
    p.add_argument("report", help="properness report JSON path")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--style", help="style JSON override")
    p.set_defaults(func=lambda a: plot_surface(
        a.csv, a.report, a.out, style=load_style(a.style)))

    p = sub.add_parser("estimators", help="median/band panels per estimator")
    p.add_argument("csv", help="experiment summary CSV path")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--style", help="style JSON override")
    p.set_defaults(func=lambda a: plot_estimators(
        a.csv, a.out, style=load_style(a.style)))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        out = args.func(args)
    except (SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    print(out)
    return 0


def entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()
