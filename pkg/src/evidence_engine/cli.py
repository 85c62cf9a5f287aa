"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data or resource error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Sequence

from .errors import EngineError

log = logging.getLogger("evidence_engine")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--index", help="index file (overrides config)")
    p.add_argument("--k", type=int, help="result depth")
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--tau", type=float, help="similarity threshold")
    p.add_argument("--budget", type=int, help="summary token budget")
    p.add_argument("--no-compression", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evidence-engine", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="build an index from a JSONL corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lenient", action="store_true",
                   help="skip bad corpus lines instead of failing")

    for name, helptext in (("query", "retrieve evidence for an entity query"),
                           ("evidence", "like query, always printing the full JSON")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("entities", help='e.g. "disease:diabetes, drug:metformin"')
        _engine_flags(p)
        p.add_argument("--json", action="store_true", help="print the EvidenceSet JSON")
        p.add_argument("--server", help="query a running service instead, e.g. http://127.0.0.1:8000")

    p = sub.add_parser("eval", help="score the pipeline against a golden JSONL file")
    p.add_argument("--golden", required=True)
    _engine_flags(p)

    p = sub.add_parser("serve", help="run the HTTP JSON service")
    _engine_flags(p)
    p.add_argument("--addr", default="127.0.0.1:8000", help="host:port")
    return parser


def _config(args):
    from .engine import load_config

    if args.k is not None and args.k < 1:
        raise UsageError("--k must be >= 1")
    return load_config(
        args.config, index=args.index, k=args.k, k1=args.k1, b=args.b, tau=args.tau,
        budget=args.budget, compression=False if args.no_compression else None,
    )


def cmd_index(args) -> int:
    from .corpus import read_corpus
    from .retrieval import build_index, save_index

    problems: list = []
    docs = read_corpus(args.corpus, strict=not args.lenient, problems=problems)
    for exc in problems:
        print(f"skipped: {exc}", file=sys.stderr)
    index = build_index(docs)
    save_index(index, args.out)
    print(f"indexed {index.N} documents, {len(index.terms)} terms -> {args.out}")
    return EXIT_OK


def _fetch_remote(server: str, entities: str, k: int | None) -> dict[str, Any]:
    import httpx

    params: dict[str, Any] = {"q": entities}
    if k is not None:
        params["k"] = k
    try:
        resp = httpx.get(server.rstrip("/") + "/v1/evidence", params=params, timeout=30.0)
    except httpx.HTTPError as exc:
        raise EngineError(f"cannot reach {server}: {exc}") from exc
    if resp.status_code != 200:
        raise EngineError(f"server returned {resp.status_code}: {resp.text}")
    return resp.json()


def _print_summary(data: dict[str, Any]) -> None:
    groups = "; ".join(f"{g['entity']} = {' | '.join(g['forms'])}" for g in data["expanded_query"])
    print(f"query: {data['query']}  [{groups}]")
    if not data["results"]:
        print("no document contains every query entity")
    for r in data["results"]:
        print(f"{r['rank']:>3}. {r['doc_id']}  bm25={r['score']:.4f}")
        if r["evidence"] is None:
            print("     (no evidence)")
            continue
        for s in r["evidence"]["sentences"]:
            print(f"     [{s['index']}] {s['text']}")


def cmd_query(args) -> int:
    if args.server:
        data = _fetch_remote(args.server, args.entities, args.k)
    else:
        from .engine import Engine, evidence_set_to_dict

        data = evidence_set_to_dict(Engine(_config(args)).run(args.entities))
    if args.json or args.command == "evidence":
        sys.stdout.write(json.dumps(data, ensure_ascii=False, indent=2) + "\n")
    else:
        _print_summary(data)
    return EXIT_OK


def cmd_eval(args) -> int:
    from .engine import Engine, run_evaluation

    report = run_evaluation(Engine(_config(args)), args.golden)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app
    from .engine import Engine

    host, sep, port = args.addr.rpartition(":")
    if not sep or not port.isdigit():
        raise UsageError(f"--addr must be host:port, got {args.addr!r}")
    app = create_app(Engine(_config(args)))
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return EXIT_OK


COMMANDS = {"index": cmd_index, "query": cmd_query, "evidence": cmd_query,
            "eval": cmd_eval, "serve": cmd_serve}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EngineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
