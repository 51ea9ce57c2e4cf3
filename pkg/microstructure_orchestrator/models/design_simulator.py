# -*- coding: utf-8 -*-
"""Simulator stage: geometry -> effective properties, plus the seed-library build."""

import itertools
import math
import time

import numpy as np
import structlog

from ..exceptions import SimulationError
from ..hooks import package_version
from .design_task import MaterialParams, PropertyVector
from .homogenization import SolverConfig, conduction_homogenize, elastic_homogenize, engineering_constants
from .microstructure import LevelSet, SeedEntry, SeedLibrary, connectivity_check, generate, volume_fraction
from .plasticity import plastic_work
from .worker_pool import run_parallel

_logger = structlog.get_logger(__name__)

ELASTIC_PROPERTIES = frozenset({'E', 'G', 'nu', 'Wp'})
CONDUCTION_PROPERTIES = frozenset({'kappa', 'sigma'})
LIBRARY_PROPERTIES = ('E', 'G', 'nu', 'kappa', 'sigma', 'vf')
REFERENCE_MATERIAL = MaterialParams(
    name='unit reference', young_modulus_base=1.0, poisson_base=0.3,
    thermal_conductivity_base=1.0, electrical_conductivity_base=1.0,
)


def simulate_properties(grid, material, property_ids, cfg=None):
    """Run only the simulations the requested properties need"""
    cfg = cfg or SolverConfig()
    wanted = set(property_ids)
    fraction = volume_fraction(grid)
    values = {'vf': fraction}
    stats = []
    plasticity_seconds = 0.0

    feasible = connectivity_check(grid)
    if not feasible:
        _logger.warning("infeasible_geometry", resolution=grid.resolution, vf=fraction)

    if wanted & ELASTIC_PROPERTIES:
        tensor = elastic_homogenize(grid, material, cfg)
        constants = engineering_constants(tensor)
        stats.extend(tensor.solver_stats)
        values.update(E=constants.E_avg, G=constants.G_avg, nu=constants.nu_avg)
        if 'Wp' in wanted:
            started = time.perf_counter()
            values['Wp'] = plastic_work(material, constants, fraction)
            plasticity_seconds = time.perf_counter() - started

    if wanted & CONDUCTION_PROPERTIES:
        # one unit-conductivity solve serves both scalar fields
        unit = conduction_homogenize(grid, 1.0, cfg)
        stats.extend(unit.solver_stats)
        values['kappa'] = unit.k_avg * material.thermal_conductivity_base
        values['sigma'] = unit.k_avg * material.electrical_conductivity_base

    kept = {pid: float(value) for pid, value in values.items() if pid in wanted or pid == 'vf'}
    return PropertyVector(values=kept, feasible=feasible, solver_stats=stats,
                          plasticity_seconds=plasticity_seconds)


def evaluate_properties(grid, spec, cfg=None):
    return simulate_properties(grid, spec.material, spec.property_ids, cfg)


class CandidateEvaluator:
    """Conditioning vector -> geometry -> FEA properties for one task"""

    physics = 'fea'

    def __init__(self, spec, resolution=16, solver_config=None):
        self.spec = spec
        self.resolution = resolution
        self.solver_config = solver_config or SolverConfig()

    def __call__(self, x):
        return self.simulate(generate(x, self.resolution), LevelSet(x))

    def simulate(self, grid, level_set=None):
        return evaluate_properties(grid, self.spec, self.solver_config)


class ScalingLawEvaluator(CandidateEvaluator):
    """Open-cell scaling laws on the generated grid; desk-scale stand-in for FEA"""

    physics = 'scaling'

    def simulate(self, grid, level_set=None):
        material = self.spec.material
        fraction = volume_fraction(grid)
        feasible = connectivity_check(grid)
        # anisotropy in [-1, 1] and cell count from the level set, isotropic without one
        anisotropy = math.log(level_set.weights[0]) / math.log(4.0 / 3.0) if level_set else 0.0
        cells = level_set.cells if level_set else 1

        young = material.young_modulus_base * fraction ** 2 * (1 + 0.15 * anisotropy ** 2) * (1 - 0.05 * (cells - 1))
        shear = material.shear_modulus_base * fraction ** 2 * (1 - 0.15 * anisotropy ** 2) * (1 + 0.05 * (cells - 1))
        poisson = float(np.clip(material.poisson_base + (0.30 - material.poisson_base) * (1 - fraction)
                                + 0.04 * anisotropy, -0.99, 0.49))
        conduction = fraction ** 1.5 * (1 + 0.1 * anisotropy)
        values = {
            'E': young, 'G': shear, 'nu': poisson, 'vf': fraction,
            'kappa': conduction * material.thermal_conductivity_base,
            'sigma': conduction * material.electrical_conductivity_base,
        }

        plasticity_seconds = 0.0
        if 'Wp' in self.spec.property_ids:
            started = time.perf_counter()
            values['Wp'] = plastic_work(material, _IsotropicConstants(young, poisson), fraction) if young > 0 else 0.0
            plasticity_seconds = time.perf_counter() - started

        kept = {pid: float(value) for pid, value in values.items() if pid in self.spec.property_ids or pid == 'vf'}
        return PropertyVector(values=kept, feasible=feasible, plasticity_seconds=plasticity_seconds)


class _IsotropicConstants:
    def __init__(self, young, poisson):
        self.E_avg = young
        self.nu_avg = poisson


EVALUATORS = {
    'fea': CandidateEvaluator,
    'scaling': ScalingLawEvaluator,
}


def make_evaluator(spec, physics='fea', resolution=16, solver_config=None):
    if physics not in EVALUATORS:
        raise ValueError(f"Unknown physics mode '{physics}'")
    return EVALUATORS[physics](spec, resolution=resolution, solver_config=solver_config)


def lattice_points(lattice):
    axis = [(i + 0.5) / lattice for i in range(lattice)]
    return [np.array(point) for point in itertools.product(axis, repeat=3)]


def build_seed_library(resolution=16, lattice=5, solver_config=None, workers=1):
    """Evaluate the generator on a lattice with the unit reference material"""
    cfg = solver_config or SolverConfig()
    reference_shear = REFERENCE_MATERIAL.shear_modulus_base
    provenance = {
        'generator_version': package_version(),
        'resolution': resolution,
        'residual_tol': cfg.residual_tol,
        'ersatz_stiffness': cfg.ersatz_stiffness,
    }

    def _entry(point):
        try:
            props = simulate_properties(generate(point, resolution), REFERENCE_MATERIAL, LIBRARY_PROPERTIES, cfg)
        except SimulationError as e:
            _logger.warning("seed_entry_failed", coords=point.tolist(), error=str(e))
            return SeedEntry(coords=point.tolist(), properties={}, feasible=False, provenance=provenance)
        relative = dict(props.values)
        relative['G'] = relative['G'] / reference_shear
        return SeedEntry(coords=point.tolist(), properties=relative, feasible=props.feasible, provenance=provenance)

    entries = run_parallel(_entry, lattice_points(lattice), workers=workers)
    return SeedLibrary(entries=entries)
