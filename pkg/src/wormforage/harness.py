"""Benchmark harness: multi-seed sweeps, aggregation, reports, file export.

Layout of a sweep directory:
    config.toml                              every knob actually used
    sweep.json                               pipelines / seeds / tasks / budget
    manifest.json                            per-run status (done/failed), file names
    records_<pipeline>_<task>_s<seed>.csv    one row per generation
    checkpoint_<pipeline>_<task>_s<seed>.csv best genome (connectome CSV format)
      + .meta.json / .roles.json sidecars
    aggregate_<pipeline>_<task>.csv          mean ± std per generation and
                                             per wall-clock bucket
    report.csv / report.txt                  written by compare_report

Parallelism is across runs (one process per run); within a run everything is
sequential, so schedules cannot affect results. A crashed run is recorded in
the manifest with its error and excluded from aggregates, never dropped
silently. Resuming a sweep skips runs already marked done; interrupted runs
are redone from scratch, which yields identical records because runs are
deterministic in their seeds.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from wormforage.config import Settings, settings_to_toml
from wormforage.connectome import Connectome, Genome, save_connectome
from wormforage.environment import run_episode, export_episode
from wormforage.pipelines import (
    INIT_MODES,
    PipelineKind,
    RunConfig,
    RunRecord,
    TrainBudget,
    train,
    train_iter,
)

_INT_FIELDS = {"generation", "food_eaten_best", "l0_best", "evaluations_cumulative"}
_WALL_CLOCK_BUCKETS = 25
_AGG_METRICS = (
    "best_fitness",
    "mean_fitness",
    "food_eaten_best",
    "l2_best",
    "l0_best",
    "evaluations_cumulative",
)


# ---------------------------------------------------------------------------
# RunRecord CSV I/O


def write_records(path: str | Path, records: list[RunRecord]) -> None:
    """Floats are written with repr, so reruns compare byte-for-byte."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(RunRecord.FIELDS) + "\n")
        for rec in records:
            cells = []
            for name in RunRecord.FIELDS:
                value = getattr(rec, name)
                cells.append(str(value) if name in _INT_FIELDS else repr(float(value)))
            fh.write(",".join(cells) + "\n")


def read_records(path: str | Path) -> list[RunRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(RunRecord.FIELDS):
            raise ValueError(f"{path}: unexpected record header {header}")
        for row in reader:
            kwargs = {}
            for name, cell in zip(RunRecord.FIELDS, row):
                kwargs[name] = int(cell) if name in _INT_FIELDS else float(cell)
            records.append(RunRecord(**kwargs))
    return records


# ---------------------------------------------------------------------------
# Sweep configuration and execution


@dataclass(frozen=True)
class SweepConfig:
    pipelines: tuple[PipelineKind, ...]
    seeds: tuple[int, ...]
    tasks: tuple[str, ...] = ("pentagon",)
    budget: TrainBudget = TrainBudget(generations=10)
    settings: Settings = Settings()
    init_mode: str = "biological_prior"
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.pipelines or not self.seeds or not self.tasks:
            raise ValueError("pipelines, seeds, and tasks must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if any(s < 0 for s in self.seeds):
            raise ValueError("seeds must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}")


@dataclass
class RunStatus:
    key: str
    pipeline: str
    task: str
    seed: int
    status: str  # "done" | "failed"
    records_file: str | None = None
    checkpoint_file: str | None = None
    generations: int = 0
    evaluations: int = 0
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    out_dir: Path
    statuses: list[RunStatus]

    @property
    def failed(self) -> list[RunStatus]:
        return [s for s in self.statuses if s.status != "done"]


def run_key(pipeline: PipelineKind | str, task: str, seed: int) -> str:
    return f"{PipelineKind(pipeline).value}_{task}_s{seed}"


def make_run_config(
    conn: Connectome, settings: Settings, task: str, seed: int, init_mode: str
) -> RunConfig:
    env = dataclasses.replace(settings.env, layout=task)
    return RunConfig(
        conn=conn,
        master_seed=seed,
        env=env,
        sim=settings.sim,
        motor=settings.motor,
        evo=settings.evo,
        mads=settings.mads,
        es=settings.es,
        tuning=settings.tuning,
        init_mode=init_mode,
    )


def _write_checkpoint(
    conn: Connectome,
    genome: Genome,
    base: Path,
    *,
    generation: int,
    fitness: float,
    reg_fitness: float,
    seed: int,
    pipeline: str,
    task: str,
) -> None:
    delta = genome.weights - genome.prior
    save_connectome(conn, base, weights=genome.weights)
    meta = {
        "generation": generation,
        "fitness": fitness,
        "reg_fitness": reg_fitness,
        "l0": int(np.count_nonzero(delta)),
        "l2": float(np.linalg.norm(delta)),
        "seed": seed,
        "pipeline": pipeline,
        "task": task,
    }
    with open(base.with_suffix(".meta.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def execute_run(
    pipeline: PipelineKind,
    task: str,
    seed: int,
    settings: Settings,
    budget: TrainBudget,
    init_mode: str,
    conn: Connectome,
    out_dir: str | Path,
) -> RunStatus:
    """One full training run: records CSV + per-generation best-genome checkpoint."""
    pipeline = PipelineKind(pipeline)
    out_dir = Path(out_dir)
    key = run_key(pipeline, task, seed)
    cfg = make_run_config(conn, settings, task, seed, init_mode)
    records_path = out_dir / f"records_{key}.csv"
    ckpt_path = out_dir / f"checkpoint_{key}.csv"

    records: list[RunRecord] = []
    state = None
    for state, rec in train_iter(pipeline, cfg, budget):
        records.append(rec)
        _write_checkpoint(
            conn,
            state.best_ever.genome,
            ckpt_path,
            generation=rec.generation,
            fitness=state.best_ever.raw_fitness,
            reg_fitness=state.best_ever.reg_fitness,
            seed=seed,
            pipeline=pipeline.value,
            task=task,
        )
    if state is None:  # zero-budget run: checkpoint the evaluated prior
        result = train(pipeline, cfg, budget)
        state = result.state
        _write_checkpoint(
            conn,
            state.best_ever.genome,
            ckpt_path,
            generation=0,
            fitness=state.best_ever.raw_fitness,
            reg_fitness=state.best_ever.reg_fitness,
            seed=seed,
            pipeline=pipeline.value,
            task=task,
        )
    write_records(records_path, records)
    audit_records(records)
    return RunStatus(
        key=key,
        pipeline=pipeline.value,
        task=task,
        seed=seed,
        status="done",
        records_file=records_path.name,
        checkpoint_file=ckpt_path.name,
        generations=state.generation,
        evaluations=state.evaluations,
    )


def _worker(args: tuple) -> RunStatus:
    pipeline, task, seed, settings, budget, init_mode, conn, out_dir = args
    try:
        return execute_run(pipeline, task, seed, settings, budget, init_mode, conn, out_dir)
    except Exception:
        return RunStatus(
            key=run_key(pipeline, task, seed),
            pipeline=PipelineKind(pipeline).value,
            task=task,
            seed=seed,
            status="failed",
            error=traceback.format_exc(),
        )


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def _status_dict(status: RunStatus) -> dict:
    return dataclasses.asdict(status)


def run_sweep(
    cfg: SweepConfig, conn: Connectome, out_dir: str | Path, resume: bool = False
) -> SweepResult:
    """Execute pipelines × tasks × seeds; aggregate whatever finished."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.toml", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(settings_to_toml(cfg.settings))
    _write_json(
        out_dir / "sweep.json",
        {
            "pipelines": [p.value for p in cfg.pipelines],
            "seeds": list(cfg.seeds),
            "tasks": list(cfg.tasks),
            "budget": dataclasses.asdict(cfg.budget),
            "init_mode": cfg.init_mode,
        },
    )

    manifest_path = out_dir / "manifest.json"
    manifest: dict = {"runs": {}}
    if resume and manifest_path.exists():
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)

    jobs = []
    statuses: list[RunStatus] = []
    for pipeline in cfg.pipelines:
        for task in cfg.tasks:
            for seed in cfg.seeds:
                key = run_key(pipeline, task, seed)
                prior = manifest["runs"].get(key)
                if (
                    resume
                    and prior is not None
                    and prior.get("status") == "done"
                    and (out_dir / prior["records_file"]).exists()
                    and (out_dir / prior["checkpoint_file"]).exists()
                ):
                    statuses.append(RunStatus(**prior))
                    continue
                jobs.append((pipeline, task, seed, cfg.settings, cfg.budget, cfg.init_mode, conn, out_dir))

    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            fresh = list(pool.map(_worker, jobs))
    else:
        fresh = [_worker(job) for job in jobs]

    for status in fresh:
        statuses.append(status)
        manifest["runs"][status.key] = _status_dict(status)
        _write_json(manifest_path, manifest)

    _write_aggregates(cfg, out_dir, statuses)
    return SweepResult(out_dir=out_dir, statuses=statuses)


# ---------------------------------------------------------------------------
# Aggregation


def _mean_std(values: list[float]) -> tuple[float, float]:
    """Sample std (ddof=1); a single observation reports std 0.0."""
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return mean, std


def aggregate_rows(runs: list[list[RunRecord]]) -> list[dict]:
    """Mean ± std per generation bucket and per wall-clock bucket.

    Wall-clock buckets split [0, max final time] into 25 edges; each run
    contributes its last record at or before the edge (sample-and-hold), and
    runs that have not produced a record yet are simply absent from that
    bucket (the n column says how many contributed).
    """
    runs = [r for r in runs if r]
    rows: list[dict] = []
    if not runs:
        return rows
    max_gen = max(r[-1].generation for r in runs)
    for g in range(1, max_gen + 1):
        picked = [r[g - 1] for r in runs if len(r) >= g]
        rows.append(_bucket_row("generation", float(g), picked))
    t_max = max(r[-1].wall_clock_s for r in runs)
    for k in range(1, _WALL_CLOCK_BUCKETS + 1):
        edge = t_max * k / _WALL_CLOCK_BUCKETS
        picked = []
        for r in runs:
            held = None
            for rec in r:
                if rec.wall_clock_s <= edge:
                    held = rec
                else:
                    break
            if held is not None:
                picked.append(held)
        if picked:
            rows.append(_bucket_row("wall_clock", edge, picked))
    return rows


def _bucket_row(kind: str, bucket: float, picked: list[RunRecord]) -> dict:
    row: dict = {"bucket_kind": kind, "bucket": bucket, "n": len(picked)}
    for metric in _AGG_METRICS:
        mean, std = _mean_std([float(getattr(rec, metric)) for rec in picked])
        row[f"{metric}_mean"] = mean
        row[f"{metric}_std"] = std
    return row


def write_aggregate(path: str | Path, rows: list[dict]) -> None:
    header = ["bucket_kind", "bucket", "n"]
    for metric in _AGG_METRICS:
        header += [f"{metric}_mean", f"{metric}_std"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [row["bucket_kind"], repr(float(row["bucket"])), str(row["n"])]
            for metric in _AGG_METRICS:
                cells.append(repr(row[f"{metric}_mean"]))
                cells.append(repr(row[f"{metric}_std"]))
            fh.write(",".join(cells) + "\n")


def _write_aggregates(cfg: SweepConfig, out_dir: Path, statuses: list[RunStatus]) -> None:
    for pipeline in cfg.pipelines:
        for task in cfg.tasks:
            runs = []
            for status in statuses:
                if (
                    status.status == "done"
                    and status.pipeline == pipeline.value
                    and status.task == task
                ):
                    runs.append(read_records(out_dir / status.records_file))
            if runs:
                write_aggregate(
                    out_dir / f"aggregate_{pipeline.value}_{task}.csv", aggregate_rows(runs)
                )


# ---------------------------------------------------------------------------
# Comparison report


def compare_report(sweep_dir: str | Path) -> tuple[Path, Path]:
    """Final-budget summary per pipeline plus pairwise ordering with a
    two-sample (Welch) significance flag; pure function of the sweep files."""
    from scipy import stats

    sweep_dir = Path(sweep_dir)
    manifest_path = sweep_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json in {sweep_dir}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)

    finals: dict[tuple[str, str], list[RunRecord]] = {}
    for entry in manifest["runs"].values():
        if entry.get("status") != "done":
            continue
        records = read_records(sweep_dir / entry["records_file"])
        if not records:
            continue
        finals.setdefault((entry["task"], entry["pipeline"]), []).append(records[-1])

    summary_rows = []
    for (task, pipeline), rows in sorted(finals.items()):
        food = [float(r.food_eaten_best) for r in rows]
        fitness = [float(r.best_fitness) for r in rows]
        food_mean, food_std = _mean_std(food)
        fit_mean, fit_std = _mean_std(fitness)
        summary_rows.append(
            {
                "task": task,
                "pipeline": pipeline,
                "n": len(rows),
                "food_eaten_mean": food_mean,
                "food_eaten_std": food_std,
                "best_fitness_mean": fit_mean,
                "best_fitness_std": fit_std,
            }
        )
    summary_rows.sort(key=lambda r: (r["task"], -r["food_eaten_mean"]))

    csv_path = sweep_dir / "report.csv"
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        header = (
            "task,pipeline,n,food_eaten_mean,food_eaten_std,"
            "best_fitness_mean,best_fitness_std"
        )
        fh.write(header + "\n")
        for row in summary_rows:
            fh.write(
                f"{row['task']},{row['pipeline']},{row['n']},"
                f"{row['food_eaten_mean']!r},{row['food_eaten_std']!r},"
                f"{row['best_fitness_mean']!r},{row['best_fitness_std']!r}\n"
            )

    lines = ["Final-budget comparison (food eaten by the best genome)", ""]
    tasks = sorted({row["task"] for row in summary_rows})
    for task in tasks:
        lines.append(f"task: {task}")
        task_rows = [r for r in summary_rows if r["task"] == task]
        for row in task_rows:
            lines.append(
                f"  {row['pipeline']:<10} n={row['n']:<3} "
                f"food_eaten = {row['food_eaten_mean']:.3f} ± {row['food_eaten_std']:.3f}  "
                f"fitness = {row['best_fitness_mean']:.3f} ± {row['best_fitness_std']:.3f}"
            )
        lines.append("  pairwise (Welch two-sample t-test on final food eaten):")
        for i in range(len(task_rows)):
            for j in range(i + 1, len(task_rows)):
                a, b = task_rows[i], task_rows[j]
                x = [float(r.food_eaten_best) for r in finals[(task, a["pipeline"])]]
                y = [float(r.food_eaten_best) for r in finals[(task, b["pipeline"])]]
                flag = "n/a"
                if len(x) > 1 and len(y) > 1 and (np.std(x) > 0 or np.std(y) > 0):
                    p = float(stats.ttest_ind(x, y, equal_var=False).pvalue)
                    flag = f"significant (p={p:.4f})" if p < 0.05 else f"not significant (p={p:.4f})"
                op = ">" if a["food_eaten_mean"] > b["food_eaten_mean"] else (
                    "=" if a["food_eaten_mean"] == b["food_eaten_mean"] else "<"
                )
                lines.append(f"    {a['pipeline']} {op} {b['pipeline']}: {flag}")
        lines.append("")
    txt_path = sweep_dir / "report.txt"
    with open(txt_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
    return csv_path, txt_path


# ---------------------------------------------------------------------------
# Audits and single-run exports


def expected_evaluations(kind: PipelineKind, settings: Settings, generations: int) -> int | None:
    """Closed-form cumulative evaluation count, where one exists.

    pure_evo evaluates every member once per generation; the ES evaluates
    2·pairs perturbations plus the moved center. Both share one evaluation of
    the initial genome. MADS-carrying pipelines have data-dependent counts.
    """
    kind = PipelineKind(kind)
    if kind is PipelineKind.PURE_EVO:
        return 1 + settings.evo.population_size * generations
    if kind is PipelineKind.OPENAI_ES:
        return 1 + (2 * settings.es.pop_pairs + 1) * generations
    return None


def audit_records(records: list[RunRecord], kind: PipelineKind | None = None,
                  settings: Settings | None = None) -> None:
    """Raise ValueError if the record stream violates its invariants."""
    for i, rec in enumerate(records):
        if rec.generation != i + 1:
            raise ValueError(f"generation column not sequential at row {i}")
        if i > 0:
            prev = records[i - 1]
            if rec.wall_clock_s < prev.wall_clock_s:
                raise ValueError(f"wall_clock_s decreased at generation {rec.generation}")
            if rec.evaluations_cumulative < prev.evaluations_cumulative:
                raise ValueError(f"evaluations_cumulative decreased at generation {rec.generation}")
    if kind is not None and settings is not None:
        for rec in records:
            expect = expected_evaluations(kind, settings, rec.generation)
            if expect is not None and rec.evaluations_cumulative != expect:
                raise ValueError(
                    f"evaluation audit failed at generation {rec.generation}: "
                    f"logged {rec.evaluations_cumulative}, expected {expect}"
                )


def export_activity(conn: Connectome, fired_history: np.ndarray, path: str | Path) -> None:
    """Per-step firing table: column per node, 0/1 per step (row 0 = initial state)."""
    names = [n.name for n in conn.neurons]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(names) + "\n")
        for t in range(fired_history.shape[0]):
            fh.write(str(t) + "," + ",".join(str(int(v)) for v in fired_history[t]) + "\n")


def export_best_episode(
    conn: Connectome,
    settings: Settings,
    task: str,
    seed: int,
    genome: Genome,
    base: str | Path,
    dump_activity: bool = False,
) -> tuple[Path, Path]:
    """Replay the best genome's episode and export trajectory + meta (+ activity)."""
    env = dataclasses.replace(settings.env, layout=task)
    result = run_episode(
        genome, conn, env, settings.sim, seed, settings.motor, record_activity=dump_activity
    )
    csv_path, meta_path = export_episode(result, env, base)
    if dump_activity and result.fired_history is not None:
        export_activity(conn, result.fired_history, Path(base).with_suffix(".activity.csv"))
    return csv_path, meta_path
