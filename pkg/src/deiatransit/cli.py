"""Command line entry point: ``deiatransit run``, one subcommand per stage, and an input converter."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .pipeline import (
    KEYS,
    SCHEMA_VERSION,
    SEGMENTS,
    STAGES,
    ConfigError,
    PipelineError,
    load_config,
    run_all,
    run_stage,
)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI-style config file; flags override its keys")
    g = p.add_argument_group("config overrides")
    for key, opt in KEYS.items():
        flag = "--" + key.replace("_", "-")
        if key == "heuristics":
            g.add_argument(flag, dest=key, action="store_const", const="true", default=None,
                           help=opt.help)
            g.add_argument("--no-heuristics", dest=key, action="store_const", const="false")
        else:
            g.add_argument(flag, dest=key, default=None, metavar=key.upper(), help=opt.help or None)


def flatten_coordinates(obj):
    """Copy of a post with nested ``coordinates`` moved to top-level lon/lat.

    Accepts ``"coordinates": [lon, lat]`` or a GeoJSON Point object under
    that key. Anything else comes back unchanged.
    """
    if not isinstance(obj, dict) or "coordinates" not in obj:
        return obj
    coords = obj["coordinates"]
    if isinstance(coords, dict):
        coords = coords.get("coordinates")
    if not (isinstance(coords, list) and len(coords) == 2):
        return obj
    flat = {k: v for k, v in obj.items() if k != "coordinates"}
    flat["lon"], flat["lat"] = coords
    return flat


def convert(src, dst) -> int:
    """Rewrite NDJSON posts to the flat schema; returns the number of lines rewritten.

    Unparseable lines are copied verbatim so ``ingest`` reports them at the
    same line numbers.
    """
    n = 0
    with open(src, encoding="utf-8") as fin, open(dst, "w", encoding="utf-8", newline="\n") as fout:
        for line in fin:
            line = line.rstrip("\n")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                fout.write(line + "\n")
                continue
            flat = flatten_coordinates(obj)
            n += flat is not obj
            fout.write((json.dumps(flat, ensure_ascii=False) if flat is not obj else line) + "\n")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deiatransit",
        description="Transportation DEIA indicators from geotagged posts.",
    )
    parser.add_argument(
        "--version", action="version",
        version=f"deiatransit {__version__} (artifact schema {SCHEMA_VERSION})",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    p = sub.add_parser("run", help="run every stage end to end")
    _add_config_flags(p)
    for stage in STAGES:
        p = sub.add_parser(stage, help=f"run the {stage} stage only")
        _add_config_flags(p)
        if stage == "topics":
            p.add_argument("--segment", choices=SEGMENTS, action="append",
                           help="sentiment segment(s) to model; default all")
    p = sub.add_parser("convert", help="flatten nested coordinates into lon/lat fields")
    p.add_argument("input", help="NDJSON posts with a coordinates field")
    p.add_argument("output", help="flat NDJSON for the ingest stage")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "convert":
        try:
            n = convert(args.input, args.output)
        except OSError as exc:
            print(f"deiatransit: error [convert] {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        print(f"rewrote {n} lines")
        return EXIT_OK
    overrides = {k: getattr(args, k) for k in KEYS}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"deiatransit: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "run":
            run_all(cfg)
        elif args.command == "topics" and args.segment:
            run_stage("topics", cfg, segments=tuple(args.segment))
        else:
            run_stage(args.command, cfg)
    except PipelineError as exc:
        print(f"deiatransit: error {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
