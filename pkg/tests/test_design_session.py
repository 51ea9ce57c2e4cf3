# -*- coding: utf-8 -*-
import numpy as np
import pydantic
import pytest

from microstructure_orchestrator.exceptions import ConvergenceError
from microstructure_orchestrator.models.baselines import RandomSearchStrategy
from microstructure_orchestrator.models.design_session import (
    INFEASIBLE_PENALTY, DesignSession, RunResult, RunSettings, build_record, evaluate_candidates, make_candidate,
    run_design, scalar_utility,
)
from microstructure_orchestrator.models.design_task import PropertyVector


class FailingEvaluator:
    physics = 'failing'

    def __call__(self, x):
        raise ConvergenceError("Load case 0 did not converge", iterations=3, residual=0.5)


class ExplodingEvaluator:
    def __call__(self, x):
        raise RuntimeError("programming fault")


def test_scalar_utility():
    assert scalar_utility([0.1, 0.3], [1.0, 2.0]) == pytest.approx(0.7)
    assert scalar_utility([0.1, 0.3], [1.0, 2.0], feasible=False) == pytest.approx(0.7 + INFEASIBLE_PENALTY)


def test_build_record_scores_objectives(two_objective_spec):
    props = PropertyVector(values={'vf': 0.315, 'kappa': 30.0}, solver_stats=[{'iterations': 7}])
    record = build_record(4, make_candidate([0.2, 0.4, 0.6], parent_id=1), props, two_objective_spec,
                          np.ones(2), generation=2)
    assert record.id == 4 and record.parent_id == 1 and record.generation == 2
    assert record.per_objective_error == pytest.approx([0.05, -0.5])
    assert record.errors == pytest.approx([0.05, 0.5])
    assert record.satisfied == [True, False]
    assert record.scalar_utility == pytest.approx(0.55)
    assert record.solver_iterations == 7


def test_infeasible_geometry_satisfies_nothing(two_objective_spec):
    props = PropertyVector(values={'vf': 0.3, 'kappa': 60.0}, feasible=False)
    record = build_record(0, make_candidate([0.5, 0.5, 0.5]), props, two_objective_spec, np.ones(2), 0)
    assert record.errors == [0.0, 0.0]
    assert record.satisfied == [False, False]
    assert not record.fully_valid
    assert record.penalized_errors() == [INFEASIBLE_PENALTY, INFEASIBLE_PENALTY]


def test_simulation_fault_degrades_the_candidate(two_objective_spec):
    records, plasticity = evaluate_candidates([make_candidate([0.5, 0.5, 0.5])], FailingEvaluator(),
                                              two_objective_spec, np.ones(2), 0, first_id=0)
    record = records[0]
    assert not record.feasible
    assert record.satisfied == [False, False]
    assert record.errors == [1.0, 1.0]
    assert 'did not converge' in record.error_message
    assert plasticity == 0.0


def test_run_survives_failing_evaluator(two_objective_spec, scaling_settings):
    result = run_design(two_objective_spec, RandomSearchStrategy, settings=scaling_settings,
                        evaluator=FailingEvaluator())
    assert result.evaluations == two_objective_spec.budget.evaluation_budget()
    assert not result.success
    assert result.status == 'budget_exhausted'
    assert result.archive == []
    assert result.physics == 'failing'


def test_programming_fault_fails_the_session(two_objective_spec, scaling_settings):
    session = DesignSession(two_objective_spec, RandomSearchStrategy, settings=scaling_settings,
                            evaluator=ExplodingEvaluator())
    with pytest.raises(RuntimeError):
        session.run()
    assert session.state == 'failed'
    assert session.error_message == 'programming fault'
    assert session.pipeline.last_status == 'error'


def test_evaluation_cap_truncates_the_generation(make_spec, scaling_settings):
    spec = make_spec([{'property': 'kappa', 'kind': 'match_target', 'target': 1000.0}],
                     population=4, max_generations=5, max_evaluations=6)
    result = run_design(spec, RandomSearchStrategy, settings=scaling_settings)
    assert result.evaluations == 6
    assert [r.id for r in result.history] == list(range(6))
    assert [r.generation for r in result.history] == [0, 0, 0, 0, 1, 1]
    assert result.iterations == 1


def test_run_stops_once_satisfied(make_spec):
    spec = make_spec([{'property': 'vf', 'kind': 'maximize', 'target': 0.05}], max_generations=5)
    result = run_design(spec, RandomSearchStrategy, settings=RunSettings(resolution=16, physics='scaling'))
    assert result.status == 'satisfied'
    assert result.success
    assert result.iterations == 0
    assert len(result.generations) == 1


def test_full_budget_run_continues_past_success(make_spec):
    spec = make_spec([{'property': 'vf', 'kind': 'maximize', 'target': 0.05}], max_generations=5)
    settings = RunSettings(resolution=16, physics='scaling', stop_when_satisfied=False)
    result = run_design(spec, RandomSearchStrategy, settings=settings)
    assert result.status == 'satisfied'
    assert result.success
    assert len(result.generations) == 6
    assert result.evaluations == spec.budget.evaluation_budget() == 36


def test_run_result_file_round_trip(two_objective_spec, scaling_settings):
    result = run_design(two_objective_spec, RandomSearchStrategy, seed=4, settings=scaling_settings)
    text = result.to_jsonl()
    assert '"wall_clock_s"' not in text
    restored = RunResult.from_jsonl(text, timing=result.timing())
    assert restored == result


def test_run_result_without_summary_is_rejected():
    with pytest.raises(ValueError):
        RunResult.from_jsonl('')


def test_strategy_options_reach_the_strategy(two_objective_spec, scaling_settings):
    class Recording(RandomSearchStrategy):
        def __init__(self, spec, settings, rng, library=None, marker=None):
            super().__init__(spec, settings, rng, library=library)
            self.marker = marker

    session = DesignSession(two_objective_spec, Recording, settings=scaling_settings,
                            strategy_options={'marker': 'seen'})
    session.run()
    assert session.strategy.marker == 'seen'
    assert session.state == 'completed'


def test_invalid_settings_are_rejected():
    with pytest.raises(pydantic.ValidationError):
        RunSettings(resolution=3)
    with pytest.raises(pydantic.ValidationError):
        RunSettings(physics='lattice')
