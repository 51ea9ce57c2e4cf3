# -*- coding: utf-8 -*-
"""One (task, method, seed) design run driven by the pipeline state machine."""

import json
import time
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional

import numpy as np
import structlog
from pydantic import BaseModel, Field

from ..exceptions import SimulationError
from .design_pipeline import PhaseEvent, PipelinePhase, step_pipeline
from .design_simulator import make_evaluator
from .design_task import check_stiffness_feasibility, normalized_deviation, objective_error, objective_satisfied
from .homogenization import SolverConfig
from .microstructure import CONDITIONING_DIM, clamp_coordinates
from .worker_pool import run_parallel

_logger = structlog.get_logger(__name__)

INFEASIBLE_PENALTY = 10.0


class RunSettings(BaseModel):
    resolution: int = Field(default=16, ge=4, description="Voxels per cell edge")
    physics: Literal['fea', 'scaling'] = 'fea'
    eval_workers: int = Field(default=1, ge=1, description="Concurrent candidate evaluations")
    momentum: bool = True
    apply_clamp: bool = Field(default=True, description="Clamp E targets into the printable band")
    stop_when_satisfied: bool = Field(default=True, description="Off: spend the whole budget, for equal-budget comparisons")
    seed_library: Optional[str] = None
    solver: SolverConfig = Field(default_factory=SolverConfig)


class EvalRecord(BaseModel):
    """One simulated candidate; field order is the persisted column order"""

    id: int
    generation: int = Field(ge=0)
    parent_id: Optional[int] = None
    x: List[float]
    clamped: bool = False
    feasible: bool = True
    properties: Dict[str, float] = Field(default_factory=dict)
    per_objective_error: List[float]
    errors: List[float]
    satisfied: List[bool]
    scalar_utility: float
    solver_iterations: int = 0
    error_message: Optional[str] = None

    @property
    def fully_valid(self):
        return self.feasible and all(self.satisfied)

    @property
    def mean_error(self):
        return float(np.mean(self.errors))

    def penalized_errors(self, penalty=INFEASIBLE_PENALTY):
        return [e + (0.0 if self.feasible else penalty) for e in self.errors]


class GenerationStats(BaseModel):
    generation: int
    evaluations: int
    best_utility: Optional[float] = Field(default=None, description="Lowest unit-weight utility in the archive")
    best_mean_error: float
    weights: List[float]
    eta: Optional[float] = None
    satisfied: bool


class RunResult(BaseModel):
    task_id: str
    method: str
    seed: int
    physics: str
    success: bool
    status: str
    iterations: int
    evaluations: int
    final_weights: List[float]
    final_eta: Optional[float] = None
    archive: List[int] = Field(default_factory=list)
    generations: List[GenerationStats] = Field(default_factory=list)
    history: List[EvalRecord] = Field(default_factory=list)
    # excluded from the deterministic record file, written to the timing sidecar
    wall_clock_s: float = 0.0
    plasticity_s: float = 0.0

    def archive_records(self):
        by_id = {record.id: record for record in self.history}
        return [by_id[i] for i in self.archive]

    def to_jsonl(self):
        lines = [json.dumps(dict(record='eval', **r.model_dump(mode='json'))) for r in self.history]
        summary = self.model_dump(mode='json', exclude={'history', 'wall_clock_s', 'plasticity_s'})
        lines.append(json.dumps(dict(record='summary', **summary)))
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_jsonl(cls, text, timing=None):
        history, summary = [], None
        for line in text.splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            kind = row.pop('record')
            if kind == 'eval':
                history.append(EvalRecord.model_validate(row))
            else:
                summary = row
        if summary is None:
            raise ValueError("Run file has no summary record")
        return cls.model_validate(dict(summary, history=history, **(timing or {})))

    def timing(self):
        return {'wall_clock_s': self.wall_clock_s, 'plasticity_s': self.plasticity_s}


@dataclass
class Candidate:
    x: np.ndarray
    parent_id: Optional[int] = None
    clamped: bool = False
    velocity: Optional[np.ndarray] = None


def make_candidate(x, parent_id=None, velocity=None):
    coords, clamped = clamp_coordinates(x)
    return Candidate(x=coords, parent_id=parent_id, clamped=clamped, velocity=velocity)


def scalar_utility(errors, weights, feasible=True, penalty=INFEASIBLE_PENALTY):
    """Weighted error sum f = sum_j w_j e_j, plus a penalty for infeasible geometry"""
    return float(np.dot(weights, errors)) + (0.0 if feasible else penalty)


def build_record(record_id, candidate, props, spec, weights, generation, error_message=None):
    """Score a simulated candidate against the task objectives.

    The satisfied flags fold feasibility in: a disconnected geometry keeps its
    property values and errors but satisfies no objective, so SR, CSR and BPM
    never count it. A failed simulation (props None) scores error 1 everywhere.
    """
    size = len(spec.objectives)
    if props is None:
        signed, errors, satisfied, feasible, values, iterations = [1.0] * size, [1.0] * size, [False] * size, False, {}, 0
    else:
        values = dict(props.values)
        feasible = props.feasible
        signed, errors, satisfied = [], [], []
        for objective in spec.objectives:
            value = props.get(objective.property_id)
            signed.append(normalized_deviation(objective, value))
            errors.append(objective_error(objective, value))
            satisfied.append(feasible and objective_satisfied(objective, value))
        iterations = int(sum(stat.get('iterations', 0) for stat in props.solver_stats))

    return EvalRecord(
        id=record_id, generation=generation, parent_id=candidate.parent_id,
        x=[float(c) for c in candidate.x], clamped=candidate.clamped, feasible=feasible,
        properties=values, per_objective_error=signed, errors=errors, satisfied=satisfied,
        scalar_utility=scalar_utility(errors, weights, feasible), solver_iterations=iterations,
        error_message=error_message,
    )


def evaluate_candidates(candidates, evaluator, spec, weights, generation, first_id, workers=1):
    """Simulate candidates (concurrently when allowed) and return records in candidate order"""

    def _simulate(candidate):
        try:
            return evaluator(candidate.x), None
        except SimulationError as e:
            _logger.warning("candidate_simulation_failed", x=candidate.x.tolist(), error=str(e))
            return None, str(e)

    outcomes = run_parallel(_simulate, candidates, workers=workers)
    records = [build_record(first_id + i, candidate, props, spec, weights, generation, error)
               for i, (candidate, (props, error)) in enumerate(zip(candidates, outcomes))]
    plasticity = sum(props.plasticity_seconds for props, _ in outcomes if props is not None)
    return records, plasticity


@dataclass
class OptimizerState:
    weights: np.ndarray
    rng: np.random.Generator
    eta: Optional[float] = None
    population: List[EvalRecord] = field(default_factory=list)
    history: List[EvalRecord] = field(default_factory=list)
    archive: List[EvalRecord] = field(default_factory=list)
    velocities: Dict[int, np.ndarray] = field(default_factory=dict)
    best_errors: List[List[float]] = field(default_factory=list)
    generation: int = 0


class SearchStrategy:
    """Candidate source driven by a DesignSession"""

    name = 'base'

    def __init__(self, spec, settings, rng, library=None):
        self.spec = spec
        self.settings = settings
        self.rng = rng
        self.library = library
        self.objective_count = len(spec.objectives)
        self.state = OptimizerState(weights=np.ones(self.objective_count), rng=rng)

    @property
    def weights(self):
        return self.state.weights

    @property
    def eta(self):
        return self.state.eta

    @property
    def archive(self):
        return self.state.archive

    @property
    def population_size(self):
        return self.spec.budget.population

    def budget(self):
        """(max generations, max evaluations)"""
        return self.spec.budget.max_generations, self.spec.budget.evaluation_budget()

    def uniform_candidates(self, count):
        return [make_candidate(self.rng.uniform(0.0, 1.0, CONDITIONING_DIM)) for _ in range(count)]

    def initial_candidates(self):
        raise NotImplementedError

    def next_candidates(self, generation):
        raise NotImplementedError

    def integrate(self, records, generation, candidates=()):
        raise NotImplementedError

    def archive_ids(self):
        return [record.id for record in self.state.archive]


class DesignSession:
    """Runs one strategy on one task through parse, generate, simulate, decide and report"""

    def __init__(self, spec, strategy_cls, seed=0, settings=None, evaluator=None, library=None,
                 strategy_options=None):
        self.spec = spec
        self.strategy_cls = strategy_cls
        self.strategy_options = strategy_options or {}
        self.seed = seed
        self.settings = settings or RunSettings()
        self.evaluator = evaluator
        self.library = library
        self.state = 'draft'
        self.error_message = None
        self.pipeline = PipelinePhase()
        self.strategy = None
        self.feasibility = None
        self.history = []
        self.pending = []
        self.generation_stats = []
        self.plasticity_seconds = 0.0
        self.result = None
        self._started = None
        self._logger = _logger.bind(task_id=spec.task_id, method=strategy_cls.name, seed=seed)

    @property
    def method(self):
        return self.strategy_cls.name

    def run(self):
        """Drive the pipeline to TERMINATE and return the RunResult"""
        self._set_state('running')
        try:
            while self.pipeline.phase != 'terminated':
                event = self._execute_phase(self.pipeline.phase)
                self.pipeline = step_pipeline(self.pipeline, event)
        except Exception as e:
            self.error_message = str(e)
            self.pipeline = self.pipeline.model_copy(update={'last_status': 'error'})
            self._set_state('failed')
            raise
        self._set_state('completed')
        return self.result

    def _set_state(self, new_state):
        self.state = new_state
        self._handle_state_change(new_state)

    def _handle_state_change(self, new_state):
        if new_state == 'running':
            self._started = time.perf_counter()
            self._logger.info("design_run_started", physics=self.settings.physics)
        elif new_state == 'completed':
            self._on_run_complete()
        elif new_state == 'failed':
            self._logger.error("design_run_failed", error=self.error_message, phase=self.pipeline.phase)

    def _on_run_complete(self):
        self._logger.info("design_run_completed", success=self.result.success, status=self.result.status,
                          evaluations=self.result.evaluations, iterations=self.result.iterations)

    def _execute_phase(self, phase):
        handlers = {
            'parse': self._execute_parse,
            'generate': self._execute_generate,
            'simulate': self._execute_simulate,
            'decide': self._execute_decide,
            'report': self._execute_report,
        }
        return handlers[phase]()

    def _execute_parse(self):
        self.feasibility = check_stiffness_feasibility(self.spec, apply_clamp=self.settings.apply_clamp)
        self.spec = self.feasibility.spec
        if self.evaluator is None:
            self.evaluator = make_evaluator(self.spec, physics=self.settings.physics,
                                            resolution=self.settings.resolution, solver_config=self.settings.solver)
        self.strategy = self.strategy_cls(self.spec, self.settings, np.random.default_rng(self.seed),
                                          library=self.library, **self.strategy_options)
        return PhaseEvent(phase='parse')

    def _remaining_evaluations(self):
        return self.strategy.budget()[1] - len(self.history)

    def _execute_generate(self):
        generation = self.pipeline.generation
        candidates = (self.strategy.initial_candidates() if generation == 0
                      else self.strategy.next_candidates(generation))
        self.pending = candidates[:max(0, self._remaining_evaluations())]
        return PhaseEvent(phase='generate')

    def _execute_simulate(self):
        generation = self.pipeline.generation
        records, plasticity = evaluate_candidates(
            self.pending, self.evaluator, self.spec, self.strategy.weights, generation,
            first_id=len(self.history), workers=self.settings.eval_workers)
        candidates, self.pending = self.pending, []
        self.history.extend(records)
        self.plasticity_seconds += plasticity
        self.strategy.integrate(records, generation, candidates)
        self._record_generation_stats(generation)
        return PhaseEvent(phase='simulate')

    def _record_generation_stats(self, generation):
        archive = self.strategy.archive
        self.generation_stats.append(GenerationStats(
            generation=generation,
            evaluations=len(self.history),
            best_utility=min((sum(r.errors) for r in archive), default=None),
            best_mean_error=min(r.mean_error for r in self.history) if self.history else 1.0,
            weights=[float(w) for w in self.strategy.weights],
            eta=self.strategy.eta,
            satisfied=any(r.fully_valid for r in self.history),
        ))

    def _execute_decide(self):
        max_generations, _ = self.strategy.budget()
        budget_remaining = self.pipeline.generation < max_generations and self._remaining_evaluations() > 0
        satisfied = any(r.fully_valid for r in self.history)
        stop = satisfied and (self.settings.stop_when_satisfied or not budget_remaining)
        status = 'satisfied' if stop else 'iterate'
        return PhaseEvent(phase='decide', status=status, budget_remaining=budget_remaining)

    def _execute_report(self):
        self.result = RunResult(
            task_id=self.spec.task_id,
            method=self.method,
            seed=self.seed,
            physics=getattr(self.evaluator, 'physics', 'custom'),
            success=any(r.fully_valid for r in self.history),
            status=self.pipeline.last_status or 'satisfied',
            iterations=self.pipeline.iterations,
            evaluations=len(self.history),
            final_weights=[float(w) for w in self.strategy.weights],
            final_eta=self.strategy.eta,
            archive=self.strategy.archive_ids(),
            generations=self.generation_stats,
            history=self.history,
            wall_clock_s=time.perf_counter() - self._started,
            plasticity_s=self.plasticity_seconds,
        )
        return PhaseEvent(phase='report')


def run_design(spec, strategy_cls, seed=0, settings=None, evaluator=None, library=None, **strategy_options):
    return DesignSession(spec, strategy_cls, seed=seed, settings=settings, evaluator=evaluator,
                         library=library, strategy_options=strategy_options).run()
