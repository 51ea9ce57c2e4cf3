# -*- coding: utf-8 -*-
"""Benchmark sweeps over (task, method, seed) cells, their output files and the reporter."""

import itertools
import json
import time
from pathlib import Path
from typing import List, Optional

import structlog
from pydantic import BaseModel, Field, field_validator

from ..exceptions import SimulationError, ValidationError
from ..hooks import seed_library_hook
from .baselines import Nsga2Strategy, OneShotStrategy, RandomSearchStrategy
from .design_session import RunResult, RunSettings, run_design, scalar_utility
from .design_task import format_signed_error, load_task, signed_error
from .metrics import RunSummary, aggregate_report, plot_data
from .pareto import ObjectivePoint, front_ranks
from .saes import SaesFixedWeightStrategy, SaesNoGradientStrategy, SaesStrategy
from .worker_pool import run_parallel

_logger = structlog.get_logger(__name__)

METHODS = {
    'saes': SaesStrategy,
    'nsga2': Nsga2Strategy,
    'random': RandomSearchStrategy,
    'oneshot': OneShotStrategy,
    'saes_nograd': SaesNoGradientStrategy,
    'saes_noweight': SaesFixedWeightStrategy,
}
TERMINATE = 'TERMINATE'
REPORT_CSV = 'report.csv'
REPORT_TEXT = 'report.txt'
PLOT_DATA = 'plot_data.csv'


class SweepConfig(BaseModel):
    tasks: List[Path] = Field(min_length=1, description="Task files or directories of task files")
    methods: List[str] = Field(default_factory=lambda: ['saes', 'nsga2', 'random'])
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3])
    out_dir: Path = Path('results')
    workers: int = Field(default=1, ge=1, description="Concurrent sweep cells")
    settings: RunSettings = Field(default_factory=RunSettings)

    @field_validator('methods')
    @classmethod
    def _known_methods(cls, methods):
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise ValueError(f"Unknown methods {unknown}; choose from {sorted(METHODS)}")
        if not methods:
            raise ValueError("At least one method is required")
        return methods

    @field_validator('seeds')
    @classmethod
    def _nonempty_seeds(cls, seeds):
        if not seeds:
            raise ValueError("At least one seed is required")
        return seeds


class CellOutcome(BaseModel):
    task_id: str
    method: str
    seed: int
    result: Optional[RunResult] = None
    error_message: Optional[str] = None


def discover_tasks(paths):
    """Expand directories into their *.json task files, sorted by name"""
    files = []
    for path in map(Path, paths):
        if path.is_dir():
            files.extend(sorted(path.glob('*.json')))
        elif path.exists():
            files.append(path)
        else:
            raise FileNotFoundError(f"Task path not found: {path}")
    return files


def load_tasks(paths):
    """Load every task before any run starts; the first invalid file aborts the sweep"""
    specs = [load_task(path) for path in discover_tasks(paths)]
    seen = set()
    for spec in specs:
        if spec.task_id in seen:
            raise ValidationError(f"Duplicate task_id '{spec.task_id}' in the sweep")
        seen.add(spec.task_id)
    return specs


def load_library(settings):
    """The retrieval library named by the settings, built on first use when the file is missing"""
    if not settings.seed_library:
        return None
    path = Path(settings.seed_library)
    if not path.exists():
        _logger.warning("seed_library_missing", path=str(path), action="build")
    return seed_library_hook(path, solver_config=settings.solver)


def run_cell(spec, method, seed, settings, library=None, evaluator=None):
    """One (task, method, seed) run; physics faults are recorded on the outcome"""
    try:
        result = run_design(spec, METHODS[method], seed=seed, settings=settings, evaluator=evaluator,
                            library=library)
    except SimulationError as e:
        _logger.error("cell_failed", task_id=spec.task_id, method=method, seed=seed, error=str(e))
        return CellOutcome(task_id=spec.task_id, method=method, seed=seed, error_message=str(e))
    return CellOutcome(task_id=spec.task_id, method=method, seed=seed, result=result)


def cell_paths(out_dir, task_id, method, seed):
    folder = Path(out_dir) / task_id
    stem = f"{method}_{seed}"
    return {
        'jsonl': folder / f"{stem}.jsonl",
        'txt': folder / f"{stem}.txt",
        'timing': folder / f"{stem}.timing.json",
    }


def write_cell(out_dir, outcome, spec):
    paths = cell_paths(out_dir, outcome.task_id, outcome.method, outcome.seed)
    paths['jsonl'].parent.mkdir(parents=True, exist_ok=True)
    if outcome.result is None:
        paths['txt'].write_text(f"Run failed: {outcome.error_message}\n{TERMINATE}\n", encoding='utf-8')
        return paths
    paths['jsonl'].write_text(outcome.result.to_jsonl(), encoding='utf-8')
    paths['txt'].write_text(report(outcome.result, spec), encoding='utf-8')
    paths['timing'].write_text(json.dumps(outcome.result.timing(), indent=1) + '\n', encoding='utf-8')
    return paths


def write_aggregate(out_dir, results):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = aggregate_report([RunSummary.from_result(result) for result in results])
    (out_dir / REPORT_CSV).write_text(table.to_csv(), encoding='utf-8')
    (out_dir / REPORT_TEXT).write_text(table.to_text(), encoding='utf-8')
    (out_dir / PLOT_DATA).write_text(plot_data(results), encoding='utf-8')
    return table


def run_benchmark(config):
    """Run the Cartesian product of tasks, methods and seeds and write every output"""
    specs = load_tasks(config.tasks)
    library = load_library(config.settings)
    cells = list(itertools.product(specs, config.methods, config.seeds))
    _logger.info("benchmark_started", tasks=len(specs), methods=config.methods, seeds=config.seeds,
                 cells=len(cells), workers=config.workers)
    started = time.perf_counter()

    def _run(cell):
        spec, method, seed = cell
        outcome = run_cell(spec, method, seed, config.settings, library=library)
        write_cell(config.out_dir, outcome, spec)
        return outcome

    outcomes = run_parallel(_run, cells, workers=config.workers)
    results = [outcome.result for outcome in outcomes if outcome.result is not None]
    table = write_aggregate(config.out_dir, results)
    _logger.info("benchmark_finished", runs=len(results), failed=len(outcomes) - len(results),
                 rows=len(table.rows), seconds=round(time.perf_counter() - started, 3))
    return outcomes


def load_results(out_dir):
    """RunResults from a sweep directory, timing sidecars attached when present"""
    results = []
    for path in sorted(Path(out_dir).glob('*/*.jsonl')):
        sidecar = path.with_suffix('.timing.json')
        timing = json.loads(sidecar.read_text(encoding='utf-8')) if sidecar.exists() else None
        results.append(RunResult.from_jsonl(path.read_text(encoding='utf-8'), timing=timing))
    return results


def _value_cell(objective, value):
    if value is None:
        return 'n/a'
    if objective.kind == 'match_target':
        return f"{value:.4g} ({format_signed_error(signed_error(value, objective.target))}%)"
    return f"{value:.4g}"


def report(run, spec):
    """Archive front table, best trade-off, iteration count and status, ending in TERMINATE"""
    members = run.archive_records()
    ranks = front_ranks([ObjectivePoint(id=r.id, values=tuple(r.errors)) for r in members])

    def _utility(record):
        return scalar_utility(record.errors, run.final_weights, record.feasible)

    members.sort(key=lambda r: (_utility(r), r.id))
    header = ['rank', 'id'] + [f"{o.property_id} [{o.kind} {o.target:g}]" for o in spec.objectives] + ['utility']
    rows = [[str(ranks[r.id]), str(r.id)]
            + [_value_cell(o, r.properties.get(o.property_id)) for o in spec.objectives]
            + [f"{_utility(r):.4f}"] for r in members]
    widths = [max(len(line[i]) for line in [header] + rows) for i in range(len(header))]

    lines = [
        f"Task {spec.task_id}: {spec.name}" if spec.name else f"Task {spec.task_id}",
        f"Method {run.method}, seed {run.seed}, physics {run.physics}",
        "",
        f"Pareto front ({len(members)} archive members)",
        '  '.join(cell.ljust(width) for cell, width in zip(header, widths)).rstrip(),
    ]
    lines.extend('  '.join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows)
    lines.append("")

    best = next((r for r in members if ranks[r.id] == 1), None)
    if best is None:
        lines.append("Best trade-off: none (archive empty)")
    else:
        summary = ', '.join(f"{o.property_id}={_value_cell(o, best.properties.get(o.property_id))}"
                            for o in spec.objectives)
        lines.append(f"Best trade-off: id {best.id} x={[round(c, 4) for c in best.x]} {summary}")
    lines.append(f"Iterations: {run.iterations}  Evaluations: {run.evaluations}")
    lines.append(f"Status: {run.status} ({'success' if run.success else 'no fully valid design'})")
    lines.append(TERMINATE)
    return '\n'.join(lines) + '\n'
