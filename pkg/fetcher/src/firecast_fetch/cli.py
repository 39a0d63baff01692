"""Command-line granule acquisition: search, fetch, convert.

Exit codes: 0 success, 1 usage error, 2 fetch or conversion failure,
3 unexpected failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import sys
import traceback
from pathlib import Path

from .convert import convert_granule
from .errors import FetchError
from .granules import fetch_granules, search_granules


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a YYYY-MM-DD date: {text!r}") from exc


def _bbox(text: str) -> tuple[float, float, float, float]:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("bbox needs lon_min,lat_min,lon_max,lat_max")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad bbox number in {text!r}") from exc


def _add_search_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--product", required=True, help="collection short name, e.g. VNP14IMG")
    sub.add_argument("--date", required=True, type=_date, help="UTC day, YYYY-MM-DD")
    sub.add_argument(
        "--bbox", required=True, type=_bbox, help="lon_min,lat_min,lon_max,lat_max"
    )
    sub.add_argument("--limit", type=int, help="stop after this many granules")


def _cmd_search(args) -> int:
    refs = search_granules(args.product, args.date, args.bbox, args.limit)
    for ref in refs:
        size = "?" if ref.size_mb is None else f"{ref.size_mb:.1f}MB"
        print(f"{ref.name}\t{size}\t{ref.url}")
    print(f"{len(refs)} granule(s)")
    return 0


def _cmd_fetch(args) -> int:
    refs = search_granules(args.product, args.date, args.bbox, args.limit)
    if not refs:
        print("no granules matched", file=sys.stderr)
        return 2
    for path in fetch_granules(refs, args.dest):
        print(path)
    return 0


def _cmd_convert(args) -> int:
    written = []
    for granule in args.granules:
        written.extend(convert_granule(granule, args.out))
    for path in written:
        print(path)
    print(f"{len(written)} swath(s) from {len(args.granules)} granule(s)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="firecast-fetch",
        description="Download VIIRS active-fire granules and convert them to swaths.",
    )
    commands = parser.add_subparsers(dest="command", metavar="command", required=True)

    sub = commands.add_parser("search", help="list matching granules")
    _add_search_args(sub)
    sub.set_defaults(func=_cmd_search)

    sub = commands.add_parser("fetch", help="download matching granules")
    _add_search_args(sub)
    sub.add_argument("--dest", required=True, type=Path, help="download directory")
    sub.set_defaults(func=_cmd_fetch)

    sub = commands.add_parser("convert", help="granule files to .swt swaths")
    sub.add_argument("granules", nargs="+", type=Path, help="granule files")
    sub.add_argument("--out", required=True, type=Path, help="swath output directory")
    sub.set_defaults(func=_cmd_convert)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        return args.func(args)
    except FetchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
