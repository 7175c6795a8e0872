"""Command line: render <kind> <inputs...> -o out.png (or .svg)."""
from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glacialdde-render",
        description="Render glacialdde CSV outputs into figures.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("inputs", nargs="+", help="CSV inputs for the figure kind")
    p.add_argument("-o", "--output", required=True,
                   help="image path (.png or .svg)")
    p.add_argument("--title", default=None)
    p.add_argument("--sink-meta", default=None,
                   help="basin meta JSON carrying the sink location")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    meta = {}
    if args.sink_meta:
        meta["meta_path"] = args.sink_meta
    spec = FigureSpec(kind=args.kind, inputs=args.inputs, output=args.output,
                      title=args.title, meta=meta)
    try:
        render(spec)
    except (SchemaError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
