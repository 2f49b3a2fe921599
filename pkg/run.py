#!/usr/bin/env python3
"""
GlueSearch - Unified CLI Runner
The main entry point for building indexes and searching them
"""

import argparse
import asyncio
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add to path
sys.path.insert(0, str(Path(__file__).parent))

from gluesearch.core import GlueSearchConfig, prepare_patterns, search_prepared
from gluesearch.errors import GlueSearchError
from gluesearch.fm_index import BwtIndex
from gluesearch.grammar_search import SearchStats
from gluesearch.lz77 import decode, dump_phrases, load_phrases, parse, parse_multi
from gluesearch.storage import index_to_bytes, load_index, save_grammar
from gluesearch.visual import show_build_summary, show_stats
from gluesearch.wildcard import WildcardStats, match_exact, match_flexible, parse_wildcard_pattern
from shards.orchestrator import Orchestrator, TcpClient, loopback_cluster
from shards.protocol import SearchMode, ShardError, ShardSpec
from shards.server import shard_serve


# ----------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------

def load_config(args) -> GlueSearchConfig:
    """Defaults < YAML < environment < explicit flags."""
    config = GlueSearchConfig.load(getattr(args, "config", None)).with_overrides(
        sample_rate=getattr(args, "sample_rate", None),
        workers=getattr(args, "workers", None),
        overlap=getattr(args, "overlap", None),
        host=getattr(args, "host", None),
        port=getattr(args, "port", None),
    )
    logging.basicConfig(
        level=config.log_level.upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    return config


def read_text(path: str, raw: bool = False) -> bytes:
    """File contents as bytes; one trailing newline is dropped unless raw."""
    data = Path(path).read_bytes()
    if not raw:
        if data.endswith(b"\r\n"):
            data = data[:-2]
        elif data.endswith(b"\n"):
            data = data[:-1]
    return data


def read_patterns(args) -> List[bytes]:
    """Patterns from --pattern flags or a newline-delimited --patterns file."""
    if args.patterns:
        lines = Path(args.patterns).read_bytes().splitlines()
        return [line for line in lines if line]
    return [p.encode("utf-8") for p in args.pattern]


def emit(records: List[Dict[str, Any]], fmt: str, columns: List[str]):
    """Write result records to stdout as JSON lines or tab-separated text."""
    for record in records:
        if fmt == "json":
            print(json.dumps(record))
            continue
        fields = []
        for column in columns:
            value = record.get(column, "")
            if isinstance(value, list):
                value = " ".join(str(v) for v in value)
            fields.append(str(value))
        print("\t".join(fields))


def add_pattern_source(parser: argparse.ArgumentParser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--pattern", "-p", action="append", help="Pattern (repeatable)")
    group.add_argument("--patterns", "-P", help="File with one pattern per line")


def add_common(parser: argparse.ArgumentParser, stats: bool = False):
    parser.add_argument("--config", "-c", help="Config file path")
    parser.add_argument("--format", "-f", choices=["text", "json"], default="text", help="Output format")
    if stats:
        parser.add_argument("--stats", action="store_true", help="Print search statistics to stderr")


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def cmd_build(args):
    """Build an index file from a text file"""
    config = load_config(args)
    text = read_text(args.text, args.raw)

    started = time.perf_counter()
    index = BwtIndex.build(text, sample_rate=config.sample_rate, rank_step=config.rank_step)
    payload = index_to_bytes(index)
    Path(args.out).write_bytes(payload)
    elapsed = time.perf_counter() - started

    show_build_summary(index.n, index.alphabet_size, index.sample_rate, len(payload), elapsed)
    emit(
        [{"index": args.out, "n": index.n, "sigma": index.alphabet_size, "bytes": len(payload)}],
        args.format,
        ["index", "n", "sigma", "bytes"],
    )


def cmd_count(args):
    """Count patterns by plain backward search"""
    load_config(args)
    index = load_index(args.index)
    records = []
    for pattern in read_patterns(args):
        interval = index.backward_search(pattern)
        records.append({
            "pattern": pattern.decode("utf-8", errors="replace"),
            "count": len(interval),
            "interval": interval.to_list(),
        })
    emit(records, args.format, ["pattern", "count"])


def cmd_locate(args):
    """Locate patterns by plain backward search"""
    load_config(args)
    index = load_index(args.index)
    records = []
    for pattern in read_patterns(args):
        positions = index.locate_all(index.backward_search(pattern), len(pattern))
        records.append({
            "pattern": pattern.decode("utf-8", errors="replace"),
            "count": len(positions),
            "positions": positions,
        })
    emit(records, args.format, ["pattern", "count", "positions"])


def cmd_multi_search(args):
    """Search many patterns through one shared grammar"""
    config = load_config(args)
    index = load_index(args.index)
    patterns = read_patterns(args)

    prepared = prepare_patterns(patterns)
    stats = SearchStats()
    results = search_prepared(index, prepared, workers=config.workers, stats=stats)
    emit([r.to_dict() for r in results], args.format, ["pattern", "count", "positions"])

    if args.stats:
        rows = prepared.stats()
        rows.update({
            "glue calls": stats.glue_calls,
            "empty short-circuits": stats.short_circuits,
            "antilocate calls": stats.glue.antilocate_calls,
            "workers": config.workers,
        })
        show_stats("📊 Multi-pattern search", rows, level_sizes=stats.level_sizes)


def cmd_wildcard(args):
    """Match a pattern containing '?' wildcards"""
    load_config(args)
    index = load_index(args.index)
    wp = parse_wildcard_pattern(args.pattern.encode("utf-8"))

    stats = WildcardStats()
    if args.mode == "exact":
        spans = [(start, start + wp.span - 1) for start in match_exact(index, wp, stats)]
    else:
        spans = match_flexible(index, wp, stats)

    records = [
        {"start": start, "end": end, "match": index.extract(start, end).decode("utf-8", errors="replace")}
        for start, end in spans
    ]
    emit(records, args.format, ["start", "end", "match"])
    if args.stats:
        show_stats(f"🃏 Wildcard search ({args.mode})", stats.to_dict())


def cmd_lz77(args):
    """Parse a file into LZ77 phrases, or decode a phrase dump"""
    load_config(args)
    if args.decode:
        data = decode(load_phrases(Path(args.input).read_text()).phrases)
        if args.out:
            Path(args.out).write_bytes(data)
        else:
            sys.stdout.buffer.write(data)
            sys.stdout.flush()
        return

    if args.multi:
        result = parse_multi([line for line in Path(args.input).read_bytes().splitlines() if line])
    else:
        result = parse(Path(args.input).read_bytes())
    dump = dump_phrases(result)
    if args.out:
        Path(args.out).write_text(dump)
    else:
        sys.stdout.write(dump)


def cmd_grammar(args):
    """Build the AVL-grammar for a pattern set"""
    load_config(args)
    prepared = prepare_patterns(read_patterns(args))
    if args.out:
        save_grammar(prepared.grammar, prepared.roots, args.out)

    stats = prepared.stats()
    if args.format == "json":
        print(json.dumps(stats))
    else:
        print(f"z\t{stats['phrases']}")
        print(f"rules\t{stats['rules']}")
        print(f"live_rules\t{stats['live_rules']}")
        print(f"root_heights\t{' '.join(str(h) for h in stats['root_heights'])}")


async def cmd_serve_shard(args):
    """Serve one shard index over TCP"""
    config = load_config(args)
    index = load_index(args.index)
    spec = ShardSpec(args.shard_id, args.offset, index.n, args.shard_overlap)
    return await shard_serve(index, config.host, config.port, spec, config)


def parse_endpoint(value: str):
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {value!r}")
    return host, int(port)


async def cmd_dist_query(args):
    """Query shards: in-process from --text, or running shards via --shard"""
    config = load_config(args)
    patterns = read_patterns(args)
    mode = SearchMode(args.mode)

    if args.text:
        clients = loopback_cluster(read_text(args.text, args.raw), args.shards, config.overlap, config)
    else:
        clients = [TcpClient(k, host, port, config) for k, (host, port) in enumerate(args.shard)]

    orchestrator = Orchestrator(clients)
    try:
        aggregated = await orchestrator.run(patterns, mode)
        if args.shutdown:
            await orchestrator.shutdown()
    finally:
        await orchestrator.close()

    records = aggregated.to_dict()["results"]
    emit(records, args.format, ["pattern", "count", "positions"])


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="GlueSearch - FM-index search with grammar-preprocessed patterns",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Build an index
  python run.py build corpus.txt --out corpus.bwtg

  # Search many patterns at once
  python run.py multi-search --index corpus.bwtg --patterns patterns.txt --stats

  # Wildcards
  python run.py wildcard --index corpus.bwtg --pattern 's??s' --mode exact

  # Two in-process shards
  python run.py dist-query --text corpus.txt --shards 2 --overlap 9 -p ip -p ss
        """
    )

    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    # build
    build_parser = subparsers.add_parser("build", help="Build an index file")
    build_parser.add_argument("text", help="Text file to index")
    build_parser.add_argument("--out", "-o", required=True, help="Index file to write")
    build_parser.add_argument("--sample-rate", "-s", type=int, help="Locate/antilocate sample spacing")
    build_parser.add_argument("--raw", action="store_true", help="Keep a trailing newline")
    add_common(build_parser)

    # count / locate
    for name, help_text in (("count", "Count patterns"), ("locate", "Locate patterns")):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--index", "-i", required=True, help="Index file")
        add_pattern_source(sub)
        add_common(sub)

    # multi-search
    multi_parser = subparsers.add_parser("multi-search", help="Search patterns through a shared grammar")
    multi_parser.add_argument("--index", "-i", required=True, help="Index file")
    multi_parser.add_argument("--workers", "-w", type=int, help="Executors per grammar level")
    add_pattern_source(multi_parser)
    add_common(multi_parser, stats=True)

    # wildcard
    wildcard_parser = subparsers.add_parser("wildcard", help="Match a pattern with '?' wildcards")
    wildcard_parser.add_argument("--index", "-i", required=True, help="Index file")
    wildcard_parser.add_argument("--pattern", "-p", required=True, help="Pattern, e.g. 's??s'")
    wildcard_parser.add_argument("--mode", "-m", choices=["exact", "flexible"], default="exact",
                                 help="exact: each '?' is one symbol; flexible: a run of w '?' is 0..w symbols")
    add_common(wildcard_parser, stats=True)

    # lz77
    lz77_parser = subparsers.add_parser("lz77", help="LZ77 phrase dump or decode")
    lz77_parser.add_argument("input", help="File to parse, or a phrase dump with --decode")
    lz77_parser.add_argument("--decode", "-d", action="store_true", help="Decode a phrase dump")
    lz77_parser.add_argument("--multi", action="store_true", help="Parse each line as a separate pattern")
    lz77_parser.add_argument("--out", "-o", help="Output file (default stdout)")
    lz77_parser.add_argument("--config", "-c", help="Config file path")

    # grammar
    grammar_parser = subparsers.add_parser("grammar", help="Build the AVL-grammar for patterns")
    grammar_parser.add_argument("--out", "-o", help="Write the serialized grammar here")
    add_pattern_source(grammar_parser)
    add_common(grammar_parser)

    # serve-shard
    serve_parser = subparsers.add_parser("serve-shard", help="Serve a shard index over TCP")
    serve_parser.add_argument("--index", "-i", required=True, help="Index file")
    serve_parser.add_argument("--host", help="Listen address")
    serve_parser.add_argument("--port", type=int, help="Listen port (0 picks a free one)")
    serve_parser.add_argument("--shard-id", type=int, default=0, help="Shard id reported in results")
    serve_parser.add_argument("--offset", type=int, default=1, help="Global position of the shard's first symbol")
    serve_parser.add_argument("--shard-overlap", type=int, default=0, help="Trailing symbols shared with the next shard")
    serve_parser.add_argument("--workers", "-w", type=int, help="Executors per grammar level")
    serve_parser.add_argument("--config", "-c", help="Config file path")

    # dist-query
    dist_parser = subparsers.add_parser("dist-query", help="Search patterns across shards")
    target = dist_parser.add_mutually_exclusive_group(required=True)
    target.add_argument("--text", "-t", help="Text file to shard in-process")
    target.add_argument("--shard", action="append", type=parse_endpoint, help="Running shard HOST:PORT (repeatable)")
    dist_parser.add_argument("--shards", "-q", type=int, default=1, help="Shard count with --text")
    dist_parser.add_argument("--overlap", type=int, help="Shard overlap with --text")
    dist_parser.add_argument("--raw", action="store_true", help="Keep a trailing newline in --text")
    dist_parser.add_argument("--mode", "-m", choices=["count", "locate"], default="count", help="Result mode")
    dist_parser.add_argument("--shutdown", action="store_true", help="Stop the shards afterwards")
    add_pattern_source(dist_parser)
    add_common(dist_parser)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 2

    # Run command
    commands = {
        "build": cmd_build,
        "count": cmd_count,
        "locate": cmd_locate,
        "multi-search": cmd_multi_search,
        "wildcard": cmd_wildcard,
        "lz77": cmd_lz77,
        "grammar": cmd_grammar,
        "serve-shard": cmd_serve_shard,
        "dist-query": cmd_dist_query,
    }

    cmd = commands[args.command]

    try:
        if asyncio.iscoroutinefunction(cmd):
            return asyncio.run(cmd(args)) or 0
        return cmd(args) or 0
    except ShardError as e:
        print(f"❌ {e}", file=sys.stderr)
        return 1
    except (GlueSearchError, OSError, ValueError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("\n\n🛑 Shutting down...", file=sys.stderr)
        return 0


if __name__ == "__main__":
    sys.exit(main())
