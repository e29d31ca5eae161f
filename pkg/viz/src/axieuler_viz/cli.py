"""
    axieuler-viz <kind> --in <csv...> --out <png/svg>

kind is one of growth | criterion | scaling.  growth takes two inputs
(the amplitude-growth and semigroup-growth series); the others take one.
Exit codes: 0 success, 2 validation error (bad arguments, missing files,
schema-version mismatch), 3 unexpected runtime error.
"""

from __future__ import annotations

import argparse
import sys

from .plots import KINDS, FigureSpec, render
from .schema import SchemaError


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="axieuler-viz",
        description="Render figures from axieuler CSV outputs.")
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--in", dest="inputs", nargs="+", required=True,
                    help="input CSV path(s); growth takes beta then lambda")
    ap.add_argument("--out", required=True, help="output image (.png/.svg)")
    ap.add_argument("--yscale", choices=("linear", "log"), default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    default_scale = "linear" if args.kind == "criterion" else "log"
    try:
        spec = FigureSpec(kind=args.kind, inputs=tuple(args.inputs),
                          out=args.out,
                          yscale=args.yscale or default_scale)
        path = render(spec)
    except (SchemaError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:                          # noqa: BLE001
        print(f"unexpected error: {e}", file=sys.stderr)
        return 3
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
