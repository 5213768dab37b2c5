"""settling-plots render --csv <file> --kind <k> --out <img>"""
import argparse
import sys

from .render import KINDS, FigureSpec, SchemaError, render


def main(argv=None):
    parser = argparse.ArgumentParser(prog="settling-plots")
    sub = parser.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("render")
    p.add_argument("--csv", required=True)
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--out", required=True)
    p.add_argument("--title")
    args = parser.parse_args(argv)
    try:
        path, _ = render(FigureSpec(args.csv, args.kind, args.out,
                                    title=args.title))
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
