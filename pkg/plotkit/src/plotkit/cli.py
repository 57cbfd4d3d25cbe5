"""CLI: plot --spec <file> renders one figure from a JSON spec."""
from __future__ import annotations

import argparse

from .render import load_spec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot",
                                     description="render compsched CSVs")
    parser.add_argument("command", nargs="?", default="plot",
                        choices=["plot"], help="subcommand (default: plot)")
    parser.add_argument("--spec", required=True, help="figure spec JSON file")
    args = parser.parse_args(argv)
    out = render(load_spec(args.spec))
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
