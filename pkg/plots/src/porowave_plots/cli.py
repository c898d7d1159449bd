"""Command line front end: one figure per invocation."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, PlotDataError, PlotJob, render
from .formats import FormatError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="porowave-plot",
        description="Render a figure from a simulator snapshot or CSV.")
    parser.add_argument("--kind", required=True, choices=KINDS,
                        help="which figure to draw")
    parser.add_argument("--in", dest="in_path", required=True,
                        metavar="PATH", help="input snapshot or CSV")
    parser.add_argument("--out", dest="out_path", required=True,
                        metavar="PATH", help="output image file")
    parser.add_argument("--normalize", type=float, default=None,
                        metavar="VALUE",
                        help="field-contour scale constant"
                             " (default: the data maximum)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    job = PlotJob(kind=args.kind, in_path=args.in_path,
                  out_path=args.out_path, normalization=args.normalize)
    try:
        render(job)
    except (FormatError, PlotDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
