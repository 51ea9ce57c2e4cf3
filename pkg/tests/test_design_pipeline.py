# -*- coding: utf-8 -*-
import pytest

from microstructure_orchestrator.exceptions import PipelineTransitionError
from microstructure_orchestrator.models.design_pipeline import PhaseEvent, PipelinePhase, step_pipeline


def _advance(state, phase, **event):
    return step_pipeline(state, PhaseEvent(phase=phase, **event))


def test_forward_phases():
    state = _advance(PipelinePhase(), 'parse')
    assert state.phase == 'generate'
    state = _advance(state, 'generate')
    assert state.phase == 'simulate'
    state = _advance(state, 'simulate')
    assert state.phase == 'decide'
    assert state.generation == 0


def test_iterate_with_budget_returns_to_generator():
    state = PipelinePhase(phase='decide', generation=2, iterations=2)
    following = _advance(state, 'decide', status='iterate', budget_remaining=True)
    assert following.phase == 'generate'
    assert following.generation == 3
    assert following.iterations == 3
    assert following.last_status == 'iterate'


def test_satisfied_goes_to_reporter():
    following = _advance(PipelinePhase(phase='decide', generation=1), 'decide', status='satisfied')
    assert following.phase == 'report'
    assert following.last_status == 'satisfied'


def test_simulate_completion_with_status_settles_the_decision():
    following = _advance(PipelinePhase(phase='simulate'), 'simulate', status='satisfied')
    assert following.phase == 'report'


def test_exhausted_budget_reports_budget_exhausted():
    state = PipelinePhase(phase='decide', generation=4, iterations=4)
    following = _advance(state, 'decide', status='iterate', budget_remaining=False)
    assert following.phase == 'report'
    assert following.last_status == 'budget_exhausted'
    assert following.iterations == 4


def test_report_terminates():
    state = _advance(PipelinePhase(phase='report', last_status='satisfied'), 'report')
    assert state.phase == 'terminated'
    assert state.last_status == 'satisfied'


@pytest.mark.parametrize('phase, event', [
    ('parse', 'simulate'),
    ('generate', 'report'),
    ('terminated', 'terminated'),
])
def test_illegal_transitions_name_both_states(phase, event):
    with pytest.raises(PipelineTransitionError) as info:
        _advance(PipelinePhase(phase=phase), event)
    assert info.value.current == phase
    assert info.value.requested == event
    assert phase in str(info.value)


def test_decide_requires_a_status():
    with pytest.raises(PipelineTransitionError):
        _advance(PipelinePhase(phase='decide'), 'decide')


def test_phase_is_immutable():
    state = PipelinePhase()
    with pytest.raises(Exception):
        state.phase = 'report'
