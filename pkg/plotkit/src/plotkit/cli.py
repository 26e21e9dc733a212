"""plotkit <kind> --in CSV --out IMG [--group COL] [--logx] [--x COL] [--y COL]"""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, render
from .schema import SchemaError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="Render sweep CSV outputs to figures")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="input_csv", required=True,
                        help="aggregate CSV produced by the sweep harness")
    parser.add_argument("--out", dest="output_image", required=True,
                        help="output image path (.png, .pdf, .svg)")
    parser.add_argument("--group", dest="group_column",
                        help="column that distinguishes the series")
    parser.add_argument("--logx", action="store_true", help="log-scale x axis")
    parser.add_argument("--x", dest="x_column", default="n")
    parser.add_argument("--y", dest="y_column", default="throughput_bps_mean")
    args = parser.parse_args(argv)

    spec = FigureSpec(kind=args.kind, input_csv=args.input_csv,
                      output_image=args.output_image,
                      group_column=args.group_column,
                      x_column=args.x_column, y_column=args.y_column,
                      log_x=args.logx)
    try:
        render(spec)
    except SchemaError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(f"wrote {args.output_image}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
