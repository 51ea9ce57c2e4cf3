# -*- coding: utf-8 -*-
import json

import pytest

from microstructure_orchestrator.exceptions import TaskFileError, ValidationError
from microstructure_orchestrator.hooks import bundled_task_files
from microstructure_orchestrator.models.design_orchestrator import (
    REPORT_CSV, TERMINATE, SweepConfig, cell_paths, discover_tasks, load_results, load_tasks, report, run_benchmark,
    run_cell,
)
from microstructure_orchestrator.models.design_session import RunResult, RunSettings


@pytest.fixture
def sweep(tmp_path, write_task, task_document):
    def _make(out='results', methods=('saes', 'random'), seeds=(0,)):
        return SweepConfig(tasks=[write_task(task_document)], methods=list(methods), seeds=list(seeds),
                           out_dir=tmp_path / out, settings=RunSettings(resolution=8, physics='scaling'))
    return _make


def test_bundled_tasks_load():
    specs = load_tasks(bundled_task_files())
    assert len(specs) == 17
    assert len({spec.task_id for spec in specs}) == 17


def test_sweep_writes_cells_and_report(sweep):
    config = sweep()
    outcomes = run_benchmark(config)
    assert [(o.method, o.seed) for o in outcomes] == [('saes', 0), ('random', 0)]
    assert all(o.result is not None for o in outcomes)

    for outcome in outcomes:
        paths = cell_paths(config.out_dir, 'tiny', outcome.method, outcome.seed)
        assert paths['jsonl'].exists()
        assert paths['txt'].read_text(encoding='utf-8').endswith(TERMINATE + '\n')
        assert set(json.loads(paths['timing'].read_text(encoding='utf-8'))) == {'wall_clock_s', 'plasticity_s'}

    rows = (config.out_dir / REPORT_CSV).read_text(encoding='utf-8').splitlines()
    assert rows[0].startswith('task_id,method,runs,SR,CSR')
    assert [row.split(',')[:2] for row in rows[1:]] == [['tiny', 'random'], ['tiny', 'saes']]
    assert {r.method for r in load_results(config.out_dir)} == {'saes', 'random'}


def test_sweep_records_are_reproducible(sweep):
    first, second = sweep('first'), sweep('second')
    run_benchmark(first)
    run_benchmark(second)
    for method in ('saes', 'random'):
        a = cell_paths(first.out_dir, 'tiny', method, 0)['jsonl'].read_bytes()
        b = cell_paths(second.out_dir, 'tiny', method, 0)['jsonl'].read_bytes()
        assert a == b


def test_concurrent_cells_match_sequential(sweep):
    sequential = sweep('sequential', seeds=(0, 1))
    concurrent = sweep('concurrent', seeds=(0, 1)).model_copy(update={'workers': 3})
    run_benchmark(sequential)
    run_benchmark(concurrent)
    for method in ('saes', 'random'):
        for seed in (0, 1):
            a = cell_paths(sequential.out_dir, 'tiny', method, seed)['jsonl'].read_bytes()
            b = cell_paths(concurrent.out_dir, 'tiny', method, seed)['jsonl'].read_bytes()
            assert a == b


def test_invalid_task_aborts_before_any_output(tmp_path, write_task, task_document):
    good = write_task(task_document, 'a.json')
    bad = dict(task_document)
    del bad['objectives']
    write_task(bad, 'b.json')
    config = SweepConfig(tasks=[good.parent], methods=['random'], seeds=[0], out_dir=tmp_path / 'out',
                         settings=RunSettings(resolution=8, physics='scaling'))
    with pytest.raises(TaskFileError) as info:
        run_benchmark(config)
    assert info.value.field == 'objectives'
    assert not (tmp_path / 'out').exists()


def test_duplicate_task_ids_are_rejected(write_task, task_document):
    with pytest.raises(ValidationError):
        load_tasks([write_task(task_document, 'a.json'), write_task(task_document, 'b.json')])


def test_discover_tasks(tmp_path, write_task, task_document):
    write_task(task_document, 'b.json')
    write_task(task_document, 'a.json')
    assert [p.name for p in discover_tasks([tmp_path])] == ['a.json', 'b.json']
    with pytest.raises(FileNotFoundError):
        discover_tasks([tmp_path / 'missing.json'])


def test_unknown_method_is_rejected(tmp_path):
    with pytest.raises(Exception):
        SweepConfig(tasks=[tmp_path], methods=['gradient_descent'])


def test_physics_fault_is_recorded_on_the_cell(make_spec, scaling_settings, monkeypatch):
    from microstructure_orchestrator.exceptions import SimulationError
    from microstructure_orchestrator.models import design_orchestrator

    def _failing(*args, **kwargs):
        raise SimulationError("solver blew up")

    monkeypatch.setattr(design_orchestrator, 'run_design', _failing)
    outcome = run_cell(make_spec([{'property': 'vf', 'kind': 'match_target', 'target': 0.3}]), 'saes', 0,
                       scaling_settings)
    assert outcome.result is None
    assert outcome.error_message == 'solver blew up'


def _front_run(make_record, archive_ids):
    records = []
    for record_id, errors, vf in [(0, [0.3, 0.1], 0.39), (1, [0.1, 0.2], 0.33), (2, [0.05, 0.5], 0.315)]:
        records.append(make_record(record_id, errors).model_copy(update={'properties': {'vf': vf, 'kappa': 30.0}}))
    return RunResult(task_id='synthetic', method='saes', seed=0, physics='scaling', success=False,
                     status='budget_exhausted', iterations=3, evaluations=3, final_weights=[1.0, 1.0],
                     archive=archive_ids, history=records)


def test_report_orders_front_by_utility(make_record, two_objective_spec):
    text = report(_front_run(make_record, [0, 1, 2]), two_objective_spec)
    lines = text.splitlines()
    start = lines.index('Pareto front (3 archive members)')
    assert [row.split()[1] for row in lines[start + 2:start + 5]] == ['1', '0', '2']
    assert '0.33 (+10.0%)' in text
    assert any(line.startswith('Best trade-off: id 1 ') for line in lines)
    assert 'Iterations: 3  Evaluations: 3' in lines
    assert lines[-2] == 'Status: budget_exhausted (no fully valid design)'
    assert lines[-1] == TERMINATE


def test_report_with_empty_archive(make_record, two_objective_spec):
    text = report(_front_run(make_record, []), two_objective_spec)
    assert 'Best trade-off: none (archive empty)' in text
    assert 'Status: budget_exhausted' in text
    assert text.endswith(TERMINATE + '\n')
