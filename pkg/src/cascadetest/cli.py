"""Command line entry point: ``pool build``, ``generate``, ``eval``, ``report``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import RunConfig, load_config
from .corpus import build_demo_pools, write_pools
from .errors import (
    BackendUnavailable,
    CassetteError,
    ConfigError,
    EmptyResultSet,
    IncompleteQuery,
    PoolFormatError,
    ProjectLayoutError,
    ReplayMiss,
    ToolchainUnavailable,
)
from .llm import RecordingBackend, make_backend
from .metrics import RunReport, build_report, render_report
from .pipeline import Pipeline, read_outcomes, write_outcomes
from .query import load_queries

log = logging.getLogger("cascadetest")

EXIT_OK, EXIT_INPUT, EXIT_EMPTY, EXIT_BACKEND = 0, 2, 3, 4

INPUT_ERRORS = (ProjectLayoutError, ConfigError, PoolFormatError, IncompleteQuery, CassetteError,
                FileNotFoundError, json.JSONDecodeError, KeyError, ValueError)
BACKEND_ERRORS = (BackendUnavailable, ReplayMiss, ToolchainUnavailable)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- subcommands ---------------------------------------------------------------


def cmd_pool_build(args) -> int:
    prefix, oracle = build_demo_pools(args.project, main_dir=args.main_dir, test_dir=args.test_dir)
    p_path, o_path = write_pools(prefix, oracle, args.out)
    print(f"{p_path}: {len(prefix.entries)} entries")
    print(f"{o_path}: {len(oracle.entries)} entries")
    return EXIT_OK


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    d = cfg.to_dict()
    for key in ("mode", "strategy", "variant", "shots", "token_budget", "seed", "jobs",
                "prefix_pool", "oracle_pool", "workspace_root"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = str(Path(v).resolve()) if key.endswith(("_pool", "_root")) else v
    if args.compile_max is not None:
        d["budget"]["compile_max"] = args.compile_max
    if args.exec_max is not None:
        d["budget"]["exec_max"] = args.exec_max
    if args.cassette:
        d["llm"] = {**d["llm"], "backend": "replay", "cassette": str(Path(args.cassette).resolve())}
    if args.record_to:
        d["llm"] = {**d["llm"], "record_to": str(Path(args.record_to).resolve())}
    return RunConfig.from_dict(d)


def cmd_generate(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = _apply_overrides(cfg, args)
    cfg.check_paths()
    queries = load_queries(args.queries)
    llm = make_backend(cfg.llm)
    pipe = Pipeline.from_config(cfg, llm=llm)
    outcomes = pipe.run(queries, jobs=cfg.jobs)
    write_outcomes(outcomes, args.out)
    if isinstance(llm, RecordingBackend):
        llm.save(cfg.llm["record_to"])
    passed = sum(o.correct for o in outcomes)
    print(f"{args.out}: {len(outcomes)} outcomes, {passed} correct")
    return EXIT_OK


def _focal_set(path: str | None):
    if not path:
        return None
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".jsonl"):
        return {q.focal_key for q in load_queries(path)}
    return {line.strip() for line in text.splitlines() if line.strip()}


def cmd_eval(args) -> int:
    outcomes = read_outcomes(args.outcomes)
    report = build_report(outcomes, _focal_set(args.focal), args.mode, args.strategy, args.variant)
    text = render_report(report, args.format)
    if args.save:
        Path(args.save).write_text(render_report(report, "json"), encoding="utf-8")
    _emit(text, args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    report = RunReport.from_dict(json.loads(Path(args.report).read_text(encoding="utf-8")))
    _emit(render_report(report, args.format), args.out)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cascadetest", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    pool = sub.add_parser("pool", help="demo pool management")
    pool_sub = pool.add_subparsers(dest="pool_command", required=True)
    pb = pool_sub.add_parser("build", help="mine prefix and oracle pools from a Java project")
    pb.add_argument("project")
    pb.add_argument("--out", required=True)
    pb.add_argument("--main-dir", default="src/main")
    pb.add_argument("--test-dir", default="src/test")
    pb.set_defaults(func=cmd_pool_build)

    gen = sub.add_parser("generate", help="generate and verify tests for a queries file")
    gen.add_argument("--config")
    gen.add_argument("--queries", required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--mode", choices=["cascaded", "direct"])
    gen.add_argument("--strategy", choices=["random", "ascending", "descending", "totally_random"])
    gen.add_argument("--variant", choices=["well_crafted", "vanilla"])
    gen.add_argument("--shots", type=int)
    gen.add_argument("--token-budget", type=int)
    gen.add_argument("--compile-max", type=int)
    gen.add_argument("--exec-max", type=int)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--jobs", type=int)
    gen.add_argument("--prefix-pool")
    gen.add_argument("--oracle-pool")
    gen.add_argument("--workspace-root")
    gen.add_argument("--cassette", help="replay LLM replies from this cassette")
    gen.add_argument("--record-to", help="record live LLM exchanges to this cassette")
    gen.set_defaults(func=cmd_generate)

    ev = sub.add_parser("eval", help="compute metrics over an outcomes file")
    ev.add_argument("outcomes")
    ev.add_argument("--focal", help="focal method keys, one per line, or a queries .jsonl")
    ev.add_argument("--format", choices=["table", "json"], default="table")
    ev.add_argument("--out")
    ev.add_argument("--save", help="also write the JSON report here")
    ev.add_argument("--mode", default="cascaded")
    ev.add_argument("--strategy", default="random")
    ev.add_argument("--variant", default="well_crafted")
    ev.set_defaults(func=cmd_eval)

    rep = sub.add_parser("report", help="re-render a saved JSON report")
    rep.add_argument("report")
    rep.add_argument("--format", choices=["table", "json"], default="table")
    rep.add_argument("--out")
    rep.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except EmptyResultSet as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except BACKEND_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
