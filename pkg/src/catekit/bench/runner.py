"""Replicate loop: generate data, fit models, score, and write results rows."""
from __future__ import annotations

import csv
import logging
import math
import multiprocessing as mp
from dataclasses import dataclass
from pathlib import Path

from ..dgp import Pdl1Params, gen_linear_family, gen_pdl1, load_external, load_preset
from ..metrics import METRIC_NAMES, enumerate_subgroups, evaluate
from ..zoo import MODEL_LABELS, ReplicateZoo
from .config import BenchConfig, ScenarioEntry

log = logging.getLogger(__name__)

COLUMNS = ("scenario", "p", "n", "replicate", "model", "metric", "value", "status", "seed")
RESULTS_FILE = "results.csv"


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    p: int
    n: int
    replicate: int
    model: str
    metric: str
    value: float
    status: str
    seed: int

    @property
    def unit(self) -> tuple:
        return (self.scenario, self.n, self.replicate, self.model)

    def sort_key(self) -> tuple:
        model_rank = MODEL_LABELS.index(self.model) if self.model in MODEL_LABELS else len(MODEL_LABELS)
        return (self.scenario, self.n, self.replicate, model_rank, self.model,
                METRIC_NAMES.index(self.metric))

    def as_csv(self) -> list[str]:
        value = "" if math.isnan(self.value) else repr(float(self.value))
        return [self.scenario, str(self.p), str(self.n), str(self.replicate), self.model,
                self.metric, value, self.status, str(self.seed)]

    @classmethod
    def from_csv(cls, rec: dict) -> ResultRow:
        value = float(rec["value"]) if rec["value"] else float("nan")
        return cls(rec["scenario"], int(rec["p"]), int(rec["n"]), int(rec["replicate"]),
                   rec["model"], rec["metric"], value, rec["status"], int(rec["seed"]))


def generate(entry: ScenarioEntry, n: int, seed: int, test_size: int):
    if entry.generator == "linear":
        return gen_linear_family(load_preset(entry.preset), n, seed, test_size)
    if entry.generator == "pdl1":
        return gen_pdl1(Pdl1Params(**entry.params), n, seed, test_size)
    return load_external(entry.path, n, seed)


@dataclass(frozen=True)
class Task:
    entry: ScenarioEntry
    n: int
    replicate: int
    seed: int
    models: tuple[str, ...]
    test_size: int
    direction: str


def run_task(task: Task) -> list[ResultRow]:
    """Everything for one (scenario, n, replicate); model failures become rows."""
    entry = task.entry
    p = entry.p
    train, evaluation = generate(entry, task.n, task.seed, task.test_size)
    try:
        subgroups = enumerate_subgroups(evaluation.covariates, task.direction)
    except ValueError as exc:
        log.warning("no subgroups for %s n=%d: %s", entry.name, task.n, exc)
        subgroups = []
    zoo = ReplicateZoo(train, task.seed, evaluation)
    rows = []
    for model in task.models:
        try:
            tau_hat = zoo.model(model).predict_cate(evaluation.covariates)
            values = evaluate(tau_hat, evaluation, subgroups)
            statuses = {k: "ok" if math.isfinite(v) else "degenerate" for k, v in values.items()}
        except Exception as exc:  # noqa: BLE001 - recorded as a failure row
            log.warning("%s failed on %s n=%d rep=%d: %s", model, entry.name, task.n,
                        task.replicate, exc)
            values = {k: float("nan") for k in METRIC_NAMES}
            statuses = {k: "failed" for k in METRIC_NAMES}
        for metric in METRIC_NAMES:
            rows.append(ResultRow(entry.name, p, task.n, task.replicate, model, metric,
                                  float(values[metric]), statuses[metric], task.seed))
    return rows


def read_results(path) -> list[ResultRow]:
    path = Path(path)
    if not path.exists():
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        return [ResultRow.from_csv(rec) for rec in csv.DictReader(fh)]


def write_results(path, rows) -> None:
    rows = sorted(rows, key=ResultRow.sort_key)
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow(r.as_csv())
    tmp.replace(path)


def plan_tasks(config: BenchConfig, done: set) -> list[Task]:
    tasks = []
    for entry in config.scenarios:
        for n in config.n_grid:
            for rep in range(config.replicates):
                todo = tuple(m for m in config.models if (entry.name, n, rep, m) not in done)
                if todo:
                    tasks.append(Task(entry, n, rep, config.seed_for(entry.name, n, rep), todo,
                                      config.test_size, config.subgroup_direction))
    return tasks


@dataclass(frozen=True)
class RunSummary:
    path: Path
    units: int
    failed_units: int
    skipped_units: int

    @property
    def exit_code(self) -> int:
        return 2 if self.failed_units else 0


def run_benchmark(config: BenchConfig, out_dir, workers: int | None = None,
                  resume: bool = False) -> RunSummary:
    """Run every (scenario, n, replicate, model) unit and write ``results.csv``.

    With ``resume`` existing units in the output are kept and skipped.  The
    file is rewritten in canonical order after every finished replicate, so
    an interrupted run loses at most the replicates in flight.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / RESULTS_FILE
    rows = read_results(path) if resume else []
    keep = {(e.name, n) for e in config.scenarios for n in config.n_grid}
    rows = [r for r in rows if (r.scenario, r.n) in keep and r.model in config.models
            and r.replicate < config.replicates]
    done = {r.unit for r in rows}
    skipped = len(done)
    tasks = plan_tasks(config, done)
    workers = config.workers if workers is None else workers
    log.info("%d replicate tasks to run (%d units already present)", len(tasks), skipped)

    if workers > 1 and len(tasks) > 1:
        with mp.get_context("spawn").Pool(workers) as pool:
            for i, new in enumerate(pool.imap_unordered(run_task, tasks), 1):
                rows.extend(new)
                write_results(path, rows)
                log.info("finished %d/%d", i, len(tasks))
    else:
        for i, task in enumerate(tasks, 1):
            rows.extend(run_task(task))
            write_results(path, rows)
            log.info("finished %d/%d", i, len(tasks))
    write_results(path, rows)

    units = {r.unit for r in rows}
    expected = len(config.scenarios) * len(config.n_grid) * config.replicates * len(config.models)
    assert len(units) == expected, f"expected {expected} result units, found {len(units)}"
    failed = {r.unit for r in rows if r.status == "failed"}
    return RunSummary(path, len(units), len(failed), skipped)
