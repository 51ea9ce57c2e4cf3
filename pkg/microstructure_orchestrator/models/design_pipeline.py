# -*- coding: utf-8 -*-
"""Manager state machine of the design pipeline.

Decision rules, in priority order:
    1. after parse, select the generator
    2. after the generator, select the simulator
    3. simulator reports "iterate" and budget remains: back to the generator
    4. simulator reports "satisfied" (or the budget is spent): select the reporter
    5. after the reporter: TERMINATE
"""

from typing import Literal, Optional

import structlog
from pydantic import BaseModel, ConfigDict, Field

from ..exceptions import PipelineTransitionError

_logger = structlog.get_logger(__name__)

Phase = Literal['parse', 'generate', 'simulate', 'decide', 'report', 'terminated']
Status = Literal['satisfied', 'iterate', 'budget_exhausted', 'error']

PHASES = ('parse', 'generate', 'simulate', 'decide', 'report', 'terminated')


class PipelinePhase(BaseModel):
    model_config = ConfigDict(frozen=True)

    phase: Phase = 'parse'
    generation: int = Field(default=0, ge=0)
    iterations: int = Field(default=0, ge=0, description="decide -> generate transitions")
    last_status: Optional[Status] = None


class PhaseEvent(BaseModel):
    """Completion record of the phase that just ran"""

    model_config = ConfigDict(frozen=True)

    phase: Phase
    status: Optional[Status] = None
    budget_remaining: bool = True


def _decide(state, event):
    status = event.status
    if status == 'iterate' and event.budget_remaining:
        return state.model_copy(update={
            'phase': 'generate',
            'generation': state.generation + 1,
            'iterations': state.iterations + 1,
            'last_status': 'iterate',
        })
    if status == 'iterate':
        status = 'budget_exhausted'
    return state.model_copy(update={'phase': 'report', 'last_status': status})


def step_pipeline(state, event):
    """Next pipeline phase after `event` completes the current one"""
    if event.phase != state.phase or state.phase == 'terminated':
        raise PipelineTransitionError(state.phase, event.phase)

    if state.phase == 'parse':
        following = state.model_copy(update={'phase': 'generate'})
    elif state.phase == 'generate':
        following = state.model_copy(update={'phase': 'simulate'})
    elif state.phase == 'simulate':
        # a simulate completion that already carries a status settles the decision
        following = _decide(state, event) if event.status else state.model_copy(update={'phase': 'decide'})
    elif state.phase == 'decide':
        if event.status is None:
            raise PipelineTransitionError(state.phase, 'decide without status')
        following = _decide(state, event)
    else:
        following = state.model_copy(update={'phase': 'terminated'})

    _logger.debug("pipeline_transition", source=state.phase, target=following.phase,
                  generation=following.generation, status=following.last_status)
    return following
