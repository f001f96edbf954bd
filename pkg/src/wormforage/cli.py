"""Command-line interface.

Verbs: train (single run), sweep (multi-seed benchmark), report, render,
validate-connectome. Exit codes: 0 success, 1 config error, 2 runtime
failure, 3 partial sweep failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback
from pathlib import Path

from wormforage import data
from wormforage.config import ConfigError, load_settings
from wormforage.connectome import Connectome, Genome, load_connectome
from wormforage.harness import (
    SweepConfig,
    compare_report,
    execute_run,
    export_best_episode,
    make_run_config,
    run_key,
    run_sweep,
)
from wormforage.pipelines import INIT_MODES, PipelineKind, TrainBudget, initial_genome
from wormforage.render import render_trajectory

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_PARTIAL = 3

_PIPELINE_NAMES = [k.value for k in PipelineKind]


class _Parser(argparse.ArgumentParser):
    """argparse's default usage-error exit code is 2; here misuse is a config
    error and must exit 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parse_seeds(text: str) -> tuple[int, ...]:
    """Accept comma-separated seeds with ranges: "0,5,10-12" → (0, 5, 10, 11, 12)."""
    seeds: list[int] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "-" in chunk[1:]:
            lo_text, hi_text = chunk.rsplit("-", 1)
            lo, hi = int(lo_text), int(hi_text)
            if hi < lo:
                raise ConfigError(f"bad seed range {chunk!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(chunk))
    if not seeds:
        raise ConfigError("no seeds given")
    return tuple(seeds)


def _parse_pipelines(text: str) -> tuple[PipelineKind, ...]:
    kinds = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            kinds.append(PipelineKind(chunk))
        except ValueError:
            raise ConfigError(
                f"unknown pipeline {chunk!r} (choose from {', '.join(_PIPELINE_NAMES)})"
            ) from None
    if not kinds:
        raise ConfigError("no pipelines given")
    return tuple(kinds)


def _budget_from_args(args: argparse.Namespace) -> TrainBudget:
    chosen = [
        name
        for name, value in (
            ("--generations", args.generations),
            ("--wall-clock-budget", args.wall_clock_budget),
            ("--evaluations", args.evaluations),
        )
        if value is not None
    ]
    if len(chosen) != 1:
        raise ConfigError(
            "set exactly one of --generations, --wall-clock-budget, --evaluations"
        )
    return TrainBudget(
        generations=args.generations,
        wall_clock_s=args.wall_clock_budget,
        evaluations=args.evaluations,
    )


def _load_conn(args: argparse.Namespace) -> Connectome:
    path = Path(args.connectome) if args.connectome else data.fixture_path("small")
    if not path.exists():
        raise ConfigError(f"connectome file not found: {path}")
    return load_connectome(path)


def _add_run_flags(p: argparse.ArgumentParser, *, for_sweep: bool) -> None:
    p.add_argument(
        "--pipeline",
        default=",".join(_PIPELINE_NAMES) if for_sweep else None,
        required=not for_sweep,
        help="pipeline kind" + (" (comma-separated list for sweeps)" if for_sweep else ""),
    )
    p.add_argument("--task", default="pentagon", help="food layout name(s), comma-separated")
    p.add_argument(
        "--seeds",
        default="0-29" if for_sweep else "0",
        help='seed list, e.g. "3" or "0,5,10-12"',
    )
    p.add_argument("--generations", type=int, default=None, help="budget in generations")
    p.add_argument(
        "--wall-clock-budget", type=float, default=None, help="budget in seconds"
    )
    p.add_argument(
        "--evaluations", type=int, default=None, help="budget in episode evaluations"
    )
    p.add_argument("--init-mode", choices=INIT_MODES, default="biological_prior")
    p.add_argument("--config", default=None, help="TOML config file")
    p.add_argument("--out", default="wormforage_out", help="output directory")
    p.add_argument(
        "--workers",
        type=int,
        default=max(1, os.cpu_count() or 1),
        help="parallel worker processes (sweeps parallelize across runs)",
    )
    p.add_argument(
        "--connectome", default=None, help="connectome CSV (default: bundled fixture)"
    )


def _cmd_train(args: argparse.Namespace) -> int:
    settings = load_settings(args.config)
    budget = _budget_from_args(args)
    seeds = _parse_seeds(args.seeds)
    if len(seeds) != 1:
        raise ConfigError("train runs a single seed; use sweep for several")
    pipelines = _parse_pipelines(args.pipeline)
    if len(pipelines) != 1:
        raise ConfigError("train runs a single pipeline; use sweep for several")
    tasks = [t.strip() for t in args.task.split(",") if t.strip()]
    if len(tasks) != 1:
        raise ConfigError("train runs a single task; use sweep for several")
    conn = _load_conn(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    pipeline, task, seed = pipelines[0], tasks[0], seeds[0]
    status = execute_run(pipeline, task, seed, settings, budget, args.init_mode, conn, out_dir)
    key = run_key(pipeline, task, seed)

    best_conn = load_connectome(out_dir / f"checkpoint_{key}.csv")
    run_cfg = make_run_config(conn, settings, task, seed, args.init_mode)
    best = Genome.from_weights(best_conn.base_weights, initial_genome(run_cfg).prior)
    episode_base = out_dir / f"episode_{key}"
    csv_path, _meta = export_best_episode(
        conn, settings, task, seed, best, episode_base, dump_activity=args.dump_activity
    )
    print(f"records:    {out_dir / status.records_file}")
    print(f"checkpoint: {out_dir / status.checkpoint_file}")
    print(f"episode:    {csv_path}")
    if args.render_svg:
        svg = render_trajectory(csv_path)
        print(f"svg:        {svg}")
    print(
        f"done: {status.generations} generations, {status.evaluations} evaluations"
    )
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    settings = load_settings(args.config)
    budget = _budget_from_args(args)
    cfg = SweepConfig(
        pipelines=_parse_pipelines(args.pipeline),
        seeds=_parse_seeds(args.seeds),
        tasks=tuple(t.strip() for t in args.task.split(",") if t.strip()),
        budget=budget,
        settings=settings,
        init_mode=args.init_mode,
        workers=args.workers,
    )
    conn = _load_conn(args)
    result = run_sweep(cfg, conn, args.out, resume=args.resume)
    done = sum(1 for s in result.statuses if s.status == "done")
    print(f"sweep: {done}/{len(result.statuses)} runs done -> {result.out_dir}")
    for status in result.failed:
        print(f"FAILED {status.key}:\n{status.error}", file=sys.stderr)
    return EXIT_PARTIAL if result.failed else EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    csv_path, txt_path = compare_report(args.sweep_dir)
    with open(txt_path, "r", encoding="utf-8") as fh:
        print(fh.read(), end="")
    print(f"report: {csv_path}")
    return EXIT_OK


def _cmd_render(args: argparse.Namespace) -> int:
    out = render_trajectory(args.trajectory, args.out)
    print(f"svg: {out}")
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    conn = load_connectome(args.path)
    kinds: dict[str, int] = {}
    for syn in conn.synapses:
        kinds[syn.kind.value] = kinds.get(syn.kind.value, 0) + 1
    print(f"nodes:     {conn.n_nodes}")
    print(f"synapses:  {conn.n_synapses}")
    for kind, count in sorted(kinds.items()):
        print(f"  {kind}: {count}")
    print(f"food sensors:  {len(conn.food_sensory)}")
    print(f"avoid sensors: {len(conn.avoidance)}")
    print(f"muscles:       {len(conn.muscles_left)} left, {len(conn.muscles_right)} right")
    print("OK")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wormforage", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p_train = sub.add_parser("train", help="run one pipeline on one task/seed")
    _add_run_flags(p_train, for_sweep=False)
    p_train.add_argument("--render-svg", action="store_true", help="render the best episode")
    p_train.add_argument(
        "--dump-activity", action="store_true", help="export per-step node firing CSV"
    )
    p_train.set_defaults(func=_cmd_train)

    p_sweep = sub.add_parser("sweep", help="multi-seed benchmark sweep")
    _add_run_flags(p_sweep, for_sweep=True)
    p_sweep.add_argument("--resume", action="store_true", help="skip runs already done")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_report = sub.add_parser("report", help="summarize a sweep directory")
    p_report.add_argument("sweep_dir")
    p_report.set_defaults(func=_cmd_report)

    p_render = sub.add_parser("render", help="render a trajectory CSV to SVG")
    p_render.add_argument("trajectory")
    p_render.add_argument("--out", default=None)
    p_render.set_defaults(func=_cmd_render)

    p_val = sub.add_parser("validate-connectome", help="check a connectome CSV")
    p_val.add_argument("path")
    p_val.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:
        traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
