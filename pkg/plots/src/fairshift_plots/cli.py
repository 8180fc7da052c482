"""Command line rendering of sweep grids to PNG figures.

Either pass a JSON figure spec or assemble one from flags. Exit code 0 on
success, 2 on any input problem (the message names a missing column).
"""

from __future__ import annotations

import argparse
import json
import sys

from .figures import FigureSpec, SurfaceSpec, render
from .grid import GridError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairshift-plot", description=__doc__)
    p.add_argument("--spec", help="JSON figure spec file")
    p.add_argument("--input", help="grid file (.json or .csv)")
    p.add_argument(
        "--surface",
        action="append",
        default=[],
        metavar="COLUMN[:STYLE]",
        help="column to draw, optionally with style solid|gradated (repeatable)",
    )
    p.add_argument("--out", help="output PNG path")
    p.add_argument("--x-label", default="tau_g")
    p.add_argument("--y-label", default="tau_h")
    p.add_argument("--z-label", default="disparity")
    p.add_argument("--title", default="")
    return p


def _spec_from_args(args) -> FigureSpec:
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            return FigureSpec.from_json(json.load(fh))
    if not args.input or not args.out or not args.surface:
        raise GridError("need --spec, or --input with --out and at least one --surface")
    surfaces = []
    for raw in args.surface:
        column, _, style = raw.partition(":")
        surfaces.append(SurfaceSpec(column=column, style=style or "solid"))
    return FigureSpec(
        input_path=args.input,
        surfaces=tuple(surfaces),
        output_path=args.out,
        x_label=args.x_label,
        y_label=args.y_label,
        z_label=args.z_label,
        title=args.title,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = _spec_from_args(args)
        render(spec)
        return 0
    except (GridError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"fairshift-plot: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
