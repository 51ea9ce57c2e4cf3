# -*- coding: utf-8 -*-
"""Benchmark metric suite: SR, CSR, MRE, BPM, QS and the per (task, method) aggregate report.

For a run r with candidate pool X_r and K objectives:
    SR   fraction of runs holding at least one candidate that satisfies all K objectives
    CSR  fraction of pooled candidates satisfying at least K/2 objectives
    MRE  per run, the lowest mean relative error over candidates; averaged over runs
    BPM  per run, the highest satisfied share over candidates; averaged, in percent
    QS   20 * I(success) + 40 * bpm + 30 * csr + 10 * (1 - min(mre, 1))
"""

import csv
import io
from itertools import groupby
from typing import List, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, Field, model_validator

_logger = structlog.get_logger(__name__)

QS_WEIGHTS = (20.0, 40.0, 30.0, 10.0)
CSR_SHARE = 0.5

REPORT_COLUMNS = (
    'task_id', 'method', 'runs',
    'SR', 'CSR',
    'MRE', 'MRE_sd',
    'BPM', 'BPM_sd',
    'QS', 'QS_sd',
    'Iter', 'Iter_sd',
    'Evals',
    'Time_s', 'Time_sd',
)
PLOT_COLUMNS = ('task_id', 'method', 'seed', 'generation', 'evaluations', 'best_mean_error', 'best_utility')


class RunSummary(BaseModel):
    task_id: str
    method: str
    seed: int
    success: bool
    candidates: List[Tuple[List[bool], List[float]]] = Field(
        default_factory=list, description="(satisfied flags, relative errors) per candidate")
    iterations: int = 0
    evaluations: int = 0
    wall_clock_s: float = Field(default=0.0, description="Excludes the plasticity share")

    @model_validator(mode='after')
    def _check_widths(self):
        widths = {len(flags) for flags, _ in self.candidates} | {len(errors) for _, errors in self.candidates}
        if len(widths) > 1:
            raise ValueError(f"Run {self.task_id}/{self.method}/{self.seed}: candidates disagree on K")
        return self

    @property
    def objective_count(self):
        return len(self.candidates[0][0]) if self.candidates else 0

    @classmethod
    def from_result(cls, result):
        return cls(
            task_id=result.task_id,
            method=result.method,
            seed=result.seed,
            success=result.success,
            candidates=[(list(r.satisfied), list(r.errors)) for r in result.history],
            iterations=result.iterations,
            evaluations=result.evaluations,
            wall_clock_s=max(0.0, result.wall_clock_s - result.plasticity_s),
        )


def _fully_valid(flags):
    return bool(flags) and all(flags)


def success_rate(runs):
    if not runs:
        raise ValueError("Success rate needs at least one run")
    return sum(1 for run in runs if any(_fully_valid(flags) for flags, _ in run.candidates)) / len(runs)


def constraint_satisfaction_rate(runs):
    pool = [flags for run in runs for flags, _ in run.candidates]
    if not pool:
        raise ValueError("Constraint satisfaction rate needs a nonempty candidate pool")
    return sum(1 for flags in pool if sum(flags) >= CSR_SHARE * len(flags)) / len(pool)


def _run_mre(run):
    return min(float(np.mean(errors)) for _, errors in run.candidates)


def _run_bpm(run):
    return max(sum(flags) / len(flags) for flags, _ in run.candidates)


def _require_candidates(runs):
    if not runs:
        raise ValueError("Metric needs at least one run")
    empty = [f"{run.task_id}/{run.method}/{run.seed}" for run in runs if not run.candidates]
    if empty:
        raise ValueError(f"Runs without candidates: {', '.join(empty)}")


def mean_relative_error(runs):
    _require_candidates(runs)
    return float(np.mean([_run_mre(run) for run in runs]))


def best_property_match(runs):
    """Percentage"""
    _require_candidates(runs)
    return float(np.mean([_run_bpm(run) for run in runs])) * 100.0


def quality_score(success, bpm, csr, mre):
    """Composite score on 0..100; bpm and csr are fractions"""
    for name, value in (('bpm', bpm), ('csr', csr)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    if mre < 0:
        raise ValueError(f"mre must be nonnegative, got {mre}")
    w_success, w_bpm, w_csr, w_mre = QS_WEIGHTS
    return w_success * float(bool(success)) + w_bpm * bpm + w_csr * csr + w_mre * (1.0 - min(mre, 1.0))


def run_quality_score(run):
    return quality_score(success_rate([run]) == 1.0, _run_bpm(run), constraint_satisfaction_rate([run]), _run_mre(run))


def _mean_sd(values):
    values = np.asarray(values, dtype=float)
    sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return float(np.mean(values)), sd


class ReportTable(BaseModel):
    columns: Tuple[str, ...] = REPORT_COLUMNS
    rows: List[dict] = Field(default_factory=list)

    def to_csv(self):
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=self.columns, lineterminator='\n')
        writer.writeheader()
        for row in self.rows:
            writer.writerow({column: _format_cell(row[column]) for column in self.columns})
        return buffer.getvalue()

    def to_text(self):
        cells = [list(self.columns)] + [[_format_cell(row[c]) for c in self.columns] for row in self.rows]
        widths = [max(len(line[i]) for line in cells) for i in range(len(self.columns))]
        lines = ['  '.join(cell.rjust(width) for cell, width in zip(line, widths)) for line in cells]
        lines.insert(1, '  '.join('-' * width for width in widths))
        return '\n'.join(lines) + '\n'


def _format_cell(value):
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def aggregate_report(summaries):
    """One row per (task, method) in lexicographic order"""
    ordered = sorted(summaries, key=lambda s: (s.task_id, s.method, s.seed))
    rows = []
    for (task_id, method), group in groupby(ordered, key=lambda s: (s.task_id, s.method)):
        runs = list(group)
        scored = [run for run in runs if run.candidates]
        mre, mre_sd = _mean_sd([_run_mre(run) for run in scored]) if scored else (1.0, 0.0)
        bpm, bpm_sd = _mean_sd([_run_bpm(run) * 100.0 for run in scored]) if scored else (0.0, 0.0)
        qs, qs_sd = _mean_sd([run_quality_score(run) for run in scored]) if scored else (0.0, 0.0)
        iterations, iterations_sd = _mean_sd([run.iterations for run in runs])
        seconds, seconds_sd = _mean_sd([run.wall_clock_s for run in runs])
        rows.append({
            'task_id': task_id,
            'method': method,
            'runs': len(runs),
            'SR': success_rate(runs),
            'CSR': constraint_satisfaction_rate(scored) if scored else 0.0,
            'MRE': mre, 'MRE_sd': mre_sd,
            'BPM': bpm, 'BPM_sd': bpm_sd,
            'QS': qs, 'QS_sd': qs_sd,
            'Iter': iterations, 'Iter_sd': iterations_sd,
            'Evals': float(np.mean([run.evaluations for run in runs])),
            'Time_s': seconds, 'Time_sd': seconds_sd,
        })
    _logger.info("aggregate_report_built", rows=len(rows), runs=len(ordered))
    return ReportTable(rows=rows)


def plot_data(results):
    """Per-generation best error series of every run as CSV"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(PLOT_COLUMNS)
    for result in sorted(results, key=lambda r: (r.task_id, r.method, r.seed)):
        for stats in result.generations:
            best_utility = '' if stats.best_utility is None else f"{stats.best_utility:.6g}"
            writer.writerow([result.task_id, result.method, result.seed, stats.generation, stats.evaluations,
                             f"{stats.best_mean_error:.6g}", best_utility])
    return buffer.getvalue()
