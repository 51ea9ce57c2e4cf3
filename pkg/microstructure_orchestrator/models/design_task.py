# -*- coding: utf-8 -*-
"""Design task records: task files, objective semantics and target feasibility."""

import json
import math
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

import jsonschema
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic import ValidationError as PydanticValidationError

from ..exceptions import MissingPropertyError, TaskFileError, ZeroTargetError
from ..hooks import data_path

_logger = structlog.get_logger(__name__)

PROPERTY_IDS = ('E', 'G', 'nu', 'kappa', 'sigma', 'vf', 'Wp')
PropertyId = Literal['E', 'G', 'nu', 'kappa', 'sigma', 'vf', 'Wp']
ObjectiveKind = Literal['match_target', 'maximize', 'minimize']

# Parser rule: E_target must lie in [0.05, 0.40] * E_base while nu < 0.45
STIFFNESS_RANGE = (0.05, 0.40)
POISSON_TARGET_LIMIT = 0.45
CONSISTENCY_TOLERANCE = 0.10
BOUNDARY_SLACK = 1e-12


class MaterialParams(BaseModel):
    """Base (fully dense) material the microstructure is printed from"""

    name: str = Field(min_length=1, description="Material name")
    young_modulus_base: float = Field(gt=0, description="Young's modulus of the base material (MPa)")
    shear_modulus_base: float = Field(gt=0, description="Shear modulus of the base material (MPa)")
    poisson_base: float = Field(ge=0, lt=0.5, description="Poisson ratio of the base material")
    thermal_conductivity_base: float = Field(default=0.0, ge=0, description="W/(m K)")
    electrical_conductivity_base: float = Field(default=0.0, ge=0, description="S/m")
    yield_stress_0: float = Field(default=0.0, ge=0, description="Initial yield stress (MPa)")
    reference_strain_eps0: float = Field(default=0.01, gt=0, description="Swift reference strain")
    hardening_exponent_n: float = Field(default=0.1, ge=0, description="Swift hardening exponent")

    @model_validator(mode='before')
    @classmethod
    def _default_shear_modulus(cls, data):
        if isinstance(data, dict) and data.get('shear_modulus_base') is None:
            young = data.get('young_modulus_base')
            poisson = data.get('poisson_base')
            if isinstance(young, (int, float)) and isinstance(poisson, (int, float)):
                data = dict(data, shear_modulus_base=young / (2.0 * (1.0 + poisson)))
        return data

    def scaled(self, factor):
        """Same material with every modulus multiplied by factor"""
        return self.model_copy(update={
            'young_modulus_base': self.young_modulus_base * factor,
            'shear_modulus_base': self.shear_modulus_base * factor,
        })


class ObjectiveSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    property_id: PropertyId = Field(alias='property', description="Property the objective acts on")
    kind: ObjectiveKind = Field(description="Optimization direction")
    target: float = Field(description="Target for match_target, threshold for maximize/minimize")
    tolerance: float = Field(default=0.10, gt=0, lt=1, description="Relative success tolerance")


class Budget(BaseModel):
    max_generations: int = Field(default=10, ge=0)
    population: int = Field(default=20, ge=2)
    max_evaluations: Optional[int] = Field(default=None, ge=1)

    def evaluation_budget(self):
        if self.max_evaluations is not None:
            return self.max_evaluations
        return self.population * (self.max_generations + 1)


class TaskSpec(BaseModel):
    task_id: str = Field(min_length=1)
    name: str = ''
    difficulty: Literal['easy', 'medium', 'hard'] = 'medium'
    seed: int = Field(default=0, ge=0)
    budget: Budget = Field(default_factory=Budget)
    material: MaterialParams
    objectives: List[ObjectiveSpec] = Field(min_length=1)

    @model_validator(mode='after')
    def _check_unique_properties(self):
        seen = set()
        for objective in self.objectives:
            if objective.property_id in seen:
                raise ValueError(f"duplicate objective for property '{objective.property_id}'")
            seen.add(objective.property_id)
        return self

    @property
    def property_ids(self):
        return [objective.property_id for objective in self.objectives]

    def objective(self, property_id):
        for objective in self.objectives:
            if objective.property_id == property_id:
                return objective
        return None

    def to_dict(self):
        return self.model_dump(mode='json', by_alias=True)


class PropertyVector(BaseModel):
    """Effective properties of one simulated geometry"""

    model_config = ConfigDict(frozen=True)

    values: Dict[str, float] = Field(default_factory=dict)
    feasible: bool = True
    solver_stats: List[Dict[str, Union[str, int, float]]] = Field(default_factory=list)
    plasticity_seconds: float = 0.0
    error_message: Optional[str] = None

    def get(self, property_id):
        if property_id not in self.values:
            raise MissingPropertyError(property_id)
        return self.values[property_id]


class StiffnessAdjustment(BaseModel):
    property_id: str
    original_target: float
    adjusted_target: float
    bound: Literal['lower', 'upper']


class FeasibilityReport(BaseModel):
    spec: TaskSpec
    adjustments: List[StiffnessAdjustment] = Field(default_factory=list)
    inconsistencies: List[str] = Field(default_factory=list)

    @property
    def clamped(self):
        return bool(self.adjustments)

    @property
    def consistent(self):
        return not self.inconsistencies


@lru_cache(maxsize=1)
def _task_validator():
    schema = json.loads(data_path('data/task_schema.json').read_text(encoding='utf-8'))
    return jsonschema.Draft202012Validator(schema)


def _schema_field(error):
    parts = [str(part) for part in error.absolute_path]
    if error.validator == 'required' and isinstance(error.instance, dict):
        missing = [name for name in error.validator_value if name not in error.instance]
        if missing:
            parts.append(missing[0])
    return '/'.join(parts) or '<root>'


def task_from_dict(data, path=None):
    """Validate a decoded task document and build the TaskSpec"""
    error = jsonschema.exceptions.best_match(_task_validator().iter_errors(data))
    if error is not None:
        raise TaskFileError(error.message, path=path, field=_schema_field(error))

    try:
        spec = TaskSpec.model_validate(data)
    except PydanticValidationError as e:
        first = e.errors()[0]
        field = '/'.join(str(part) for part in first['loc']) or '<root>'
        raise TaskFileError(first['msg'], path=path, field=field) from e

    for index, objective in enumerate(spec.objectives):
        field = f"objectives/{index}/target"
        if objective.target == 0:
            raise TaskFileError("targets of exactly zero have no relative error", path=path, field=field)
        if objective.property_id == 'nu' and objective.target >= POISSON_TARGET_LIMIT:
            raise TaskFileError(f"Poisson targets must stay below {POISSON_TARGET_LIMIT}", path=path, field=field)
    return spec


def load_task(path):
    """Load and validate a task file"""
    path = Path(path)
    text = path.read_text(encoding='utf-8')
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise TaskFileError(e.msg, path=path, line=e.lineno, column=e.colno) from e

    spec = task_from_dict(data, path=path)
    _logger.info("task_loaded", task_id=spec.task_id, objectives=len(spec.objectives), path=str(path))
    return spec


def check_stiffness_feasibility(spec, apply_clamp=True):
    """Clamp E targets into the printable stiffness band and check E = 2G(1 + nu)"""
    adjustments = []
    objectives = []
    low, high = (bound * spec.material.young_modulus_base for bound in STIFFNESS_RANGE)

    for objective in spec.objectives:
        if objective.property_id == 'E' and objective.kind == 'match_target' and not low <= objective.target <= high:
            bound = 'lower' if objective.target < low else 'upper'
            adjusted = low if bound == 'lower' else high
            adjustments.append(StiffnessAdjustment(
                property_id='E', original_target=objective.target, adjusted_target=adjusted, bound=bound))
            _logger.warning("stiffness_target_clamped", task_id=spec.task_id,
                            original=objective.target, adjusted=adjusted, applied=apply_clamp)
            if apply_clamp:
                objective = objective.model_copy(update={'target': adjusted})
        objectives.append(objective)

    adjusted_spec = spec.model_copy(update={'objectives': objectives})

    inconsistencies = []
    young, shear, poisson = (adjusted_spec.objective(pid) for pid in ('E', 'G', 'nu'))
    if young and shear and poisson:
        implied = 2.0 * shear.target * (1.0 + poisson.target)
        deviation = abs(young.target - implied) / abs(young.target)
        if deviation > CONSISTENCY_TOLERANCE:
            inconsistencies.append(
                f"E={young.target:g} disagrees with 2G(1+nu)={implied:g} ({deviation:.1%} apart)")
            _logger.warning("stiffness_targets_inconsistent", task_id=spec.task_id, deviation=deviation)

    return FeasibilityReport(spec=adjusted_spec, adjustments=adjustments, inconsistencies=inconsistencies)


def signed_error(value, target):
    """Signed deviation (P - T) / T in percent"""
    if target == 0:
        raise ZeroTargetError("Relative error is undefined for a zero target")
    return (value - target) / target * 100.0


def format_signed_error(percent):
    """Render an Err percentage with one decimal and an explicit sign"""
    rounded = round(percent, 1)
    if rounded == 0:
        rounded = 0.0
    return f"{rounded:+.1f}"


def _value(props, property_id):
    if isinstance(props, PropertyVector):
        return props.get(property_id)
    if property_id not in props:
        raise MissingPropertyError(property_id)
    return props[property_id]


def normalized_deviation(objective, value):
    """Signed (P - T) / |T|, the raw per-objective error"""
    return (value - objective.target) / abs(objective.target)


def objective_error(objective, value):
    """Nonnegative relative error; directional objectives score zero once the threshold is met"""
    deviation = normalized_deviation(objective, value)
    if objective.kind == 'maximize':
        return max(0.0, -deviation)
    if objective.kind == 'minimize':
        return max(0.0, deviation)
    return abs(deviation)


def objective_satisfied(objective, value):
    if not math.isfinite(value):
        return False
    target = objective.target
    if objective.kind == 'maximize':
        return value >= target
    if objective.kind == 'minimize':
        return value <= target
    return abs(value - target) <= objective.tolerance * abs(target) + BOUNDARY_SLACK * abs(target)


def satisfied_flags(props, spec):
    return [objective_satisfied(obj, _value(props, obj.property_id)) for obj in spec.objectives]


def relative_errors(props, spec):
    return [objective_error(obj, _value(props, obj.property_id)) for obj in spec.objectives]


def is_fully_valid(props, spec):
    return all(satisfied_flags(props, spec))
