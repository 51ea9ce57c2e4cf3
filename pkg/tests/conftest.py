# -*- coding: utf-8 -*-
import json

import numpy as np
import pytest

from microstructure_orchestrator.models.design_session import EvalRecord, RunSettings
from microstructure_orchestrator.models.design_simulator import ScalingLawEvaluator
from microstructure_orchestrator.models.design_task import MaterialParams, TaskSpec
from microstructure_orchestrator.models.homogenization import EngineeringConstants, SolverConfig


@pytest.fixture
def copper():
    return MaterialParams(name='copper', young_modulus_base=110000.0, poisson_base=0.34,
                          thermal_conductivity_base=400.0, electrical_conductivity_base=5.96e7,
                          yield_stress_0=70.0)


@pytest.fixture
def poisson_free():
    return MaterialParams(name='laminate base', young_modulus_base=1000.0, poisson_base=0.0,
                          thermal_conductivity_base=1.0, electrical_conductivity_base=1.0)


@pytest.fixture
def make_spec(copper):
    def _make(objectives, material=None, task_id='synthetic', population=6, max_generations=3,
              max_evaluations=None):
        budget = {'population': population, 'max_generations': max_generations}
        if max_evaluations is not None:
            budget['max_evaluations'] = max_evaluations
        return TaskSpec.model_validate({
            'task_id': task_id,
            'material': (material or copper).model_dump(),
            'objectives': objectives,
            'budget': budget,
        })
    return _make


@pytest.fixture
def two_objective_spec(make_spec):
    return make_spec([
        {'property': 'vf', 'kind': 'match_target', 'target': 0.3},
        {'property': 'kappa', 'kind': 'match_target', 'target': 60.0},
    ])


@pytest.fixture
def scaling_settings():
    return RunSettings(resolution=8, physics='scaling')


@pytest.fixture
def scaling_evaluator():
    def _make(spec, resolution=8):
        return ScalingLawEvaluator(spec, resolution=resolution)
    return _make


@pytest.fixture
def tight_solver():
    return SolverConfig(residual_tol=1e-10, ersatz_stiffness=1e-2)


@pytest.fixture
def isotropic_constants():
    def _make(young, poisson):
        shear = young / (2.0 * (1.0 + poisson))
        return EngineeringConstants(Ex=young, Ey=young, Ez=young, Gxy=shear, Gxz=shear, Gyz=shear,
                                    nu_xy=poisson, nu_xz=poisson, nu_yz=poisson)
    return _make


@pytest.fixture
def make_record():
    def _make(record_id, errors, feasible=True, x=(0.5, 0.5, 0.5), generation=0, parent_id=None):
        errors = [float(e) for e in errors]
        return EvalRecord(
            id=record_id, generation=generation, parent_id=parent_id, x=list(x), feasible=feasible,
            per_objective_error=errors, errors=errors,
            satisfied=[feasible and e == 0 for e in errors],
            scalar_utility=float(np.sum(errors)) + (0.0 if feasible else 10.0),
        )
    return _make


@pytest.fixture
def write_task(tmp_path):
    def _write(document, name='task.json'):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding='utf-8')
        return path
    return _write


@pytest.fixture
def task_document():
    return {
        'task_id': 'tiny',
        'name': 'Tiny thermal task',
        'difficulty': 'easy',
        'budget': {'max_generations': 1, 'population': 4},
        'material': {'name': 'copper', 'young_modulus_base': 110000, 'poisson_base': 0.34,
                     'thermal_conductivity_base': 400, 'electrical_conductivity_base': 5.96e7},
        'objectives': [
            {'property': 'kappa', 'kind': 'match_target', 'target': 80},
            {'property': 'vf', 'kind': 'minimize', 'target': 0.4},
        ],
    }
