"""Command-line front end: one subcommand per figure kind.

Exit codes: 0 on success, 2 for any input problem (bad schema, missing
file, malformed rows, bad options).
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .figures import FIGURE_KINDS, PlotJob, render
from .tables import SchemaError

# CLI names use dashes; figure kinds keep the table spelling
_COMMANDS = {kind.lower().replace("_", "-"): kind for kind in FIGURE_KINDS}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srmra-plots",
        description="Render figures from srmra experiment CSV tables.",
    )
    parser.add_argument("--version", action="version",
                        version=f"srmra-plots {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="FIGURE")
    for command, kind in _COMMANDS.items():
        one_input = kind in ("overlay", "per_frequency")
        p = sub.add_parser(command, help=f"render a {kind} figure")
        p.add_argument(
            "--input", action="append", required=True, metavar="CSV",
            help="input table" + ("" if one_input else ", repeatable for overlaid series"),
        )
        p.add_argument("--output", required=True, metavar="BASE",
                       help="output path; .svg and .png are written")
        p.add_argument("--title", default=None)
        p.add_argument("--dpi", type=int, default=150)
        p.set_defaults(figure_kind=kind)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        job = PlotJob(
            input_csv_paths=tuple(args.input),
            figure_kind=args.figure_kind,
            output_path=args.output,
            title=args.title,
            dpi=args.dpi,
        )
        svg_path, png_path = render(job)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(svg_path)
    print(png_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
