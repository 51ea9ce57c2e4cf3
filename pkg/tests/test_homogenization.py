# -*- coding: utf-8 -*-
import numpy as np
import pytest

from microstructure_orchestrator.exceptions import ConvergenceError, DegenerateMaterialError, SingularTensorError
from microstructure_orchestrator.models.homogenization import (
    SolverConfig, conduction_homogenize, elastic_homogenize, element_conductance, element_stiffness,
    engineering_constants, isotropic_stiffness,
)
from microstructure_orchestrator.models.microstructure import VoxelGrid, generate, volume_fraction


def _laminate(n):
    """Solid in the lower half along z, void above"""
    occupancy = np.zeros((n, n, n), dtype=bool)
    occupancy[:, :, :n // 2] = True
    return VoxelGrid(occupancy)


def test_isotropic_stiffness_entries():
    C = isotropic_stiffness(260.0, 0.3)
    lam = 260.0 * 0.3 / (1.3 * 0.4)
    mu = 100.0
    assert C[0, 0] == pytest.approx(lam + 2 * mu)
    assert C[0, 1] == pytest.approx(lam)
    assert C[3, 3] == pytest.approx(mu)
    assert C[0, 3] == 0.0


def test_isotropic_stiffness_rejects_nonpositive_modulus():
    with pytest.raises(DegenerateMaterialError):
        isotropic_stiffness(0.0, 0.3)


def test_element_matrices_annihilate_rigid_translations():
    h = 0.25
    Ke = element_stiffness(isotropic_stiffness(1.0, 0.3), h)
    assert np.allclose(Ke, Ke.T)
    for axis in range(3):
        translation = np.zeros(24)
        translation[axis::3] = 1.0
        assert np.allclose(Ke @ translation, 0.0, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(Ke) > -1e-12)

    Kc = element_conductance(h)
    assert np.allclose(Kc.sum(axis=1), 0.0, atol=1e-12)


def test_solid_cube_recovers_base_stiffness(copper):
    tensor = elastic_homogenize(VoxelGrid.solid(4), copper)
    base = isotropic_stiffness(copper.young_modulus_base, copper.poisson_base)
    assert np.allclose(tensor.C, base, rtol=1e-4, atol=1e-4 * base.max())
    assert all(stat['iterations'] == 0 for stat in tensor.solver_stats)

    constants = engineering_constants(tensor)
    assert constants.E_avg == pytest.approx(copper.young_modulus_base, rel=1e-4)
    assert constants.nu_avg == pytest.approx(copper.poisson_base, rel=1e-4)
    assert constants.G_avg == pytest.approx(copper.shear_modulus_base, rel=1e-4)


def test_void_cube_is_ersatz_scaled(copper):
    cfg = SolverConfig(ersatz_stiffness=1e-6)
    tensor = elastic_homogenize(VoxelGrid.void(4), copper, cfg)
    base = isotropic_stiffness(copper.young_modulus_base, copper.poisson_base)
    assert np.allclose(tensor.C, 1e-6 * base, rtol=1e-4, atol=1e-4 * 1e-6 * base.max())


def test_solid_cube_conduction(copper):
    tensor = conduction_homogenize(VoxelGrid.solid(4), copper.thermal_conductivity_base)
    assert np.allclose(tensor.K, 400.0 * np.eye(3), rtol=1e-4, atol=1e-3)
    assert tensor.k_avg == pytest.approx(400.0, rel=1e-4)
    assert tensor.scaled(0.5).k_avg == pytest.approx(200.0, rel=1e-4)


def _laminate_checks(n, material, cfg):
    grid = _laminate(n)
    soft = cfg.ersatz_stiffness
    young = material.young_modulus_base

    C = elastic_homogenize(grid, material, cfg).C
    voigt = 0.5 * young + 0.5 * soft * young
    reuss = 1.0 / (0.5 / young + 0.5 / (soft * young))
    assert C[0, 0] == pytest.approx(voigt, rel=0.02)
    assert C[1, 1] == pytest.approx(voigt, rel=0.02)
    assert C[2, 2] == pytest.approx(reuss, rel=0.02)

    conduction = conduction_homogenize(grid, 1.0, cfg)
    assert conduction.K[0, 0] == pytest.approx(0.5 + 0.5 * soft, rel=0.02)
    assert conduction.K[2, 2] == pytest.approx(1.0 / (0.5 + 0.5 / soft), rel=0.02)
    assert all(stat['residual'] <= 1e-6 for stat in conduction.solver_stats)


def test_laminate_bounds_small_grid(poisson_free, tight_solver):
    _laminate_checks(8, poisson_free, tight_solver)


@pytest.mark.slow
def test_laminate_bounds_full_resolution(poisson_free, tight_solver):
    _laminate_checks(32, poisson_free, tight_solver)


def test_gyroid_tensor_is_symmetric_and_converged(copper):
    grid = generate([0.45, 0.6, 0.2], 8)
    tensor = elastic_homogenize(grid, copper)
    assert np.allclose(tensor.C, tensor.C.T)
    assert len(tensor.solver_stats) == 6
    assert all(stat['residual'] <= 1e-6 for stat in tensor.solver_stats)
    assert np.all(np.linalg.eigvalsh(tensor.C) > 0)


def test_concurrent_load_cases_match_sequential(copper):
    grid = generate([0.55, 0.3, 0.5], 8)
    sequential = elastic_homogenize(grid, copper, SolverConfig(workers=1))
    concurrent = elastic_homogenize(grid, copper, SolverConfig(workers=3))
    assert np.allclose(sequential.C, concurrent.C, rtol=1e-12, atol=0.0)


def test_iteration_cap_raises_convergence_error(copper):
    grid = generate([0.45, 0.6, 0.2], 8)
    with pytest.raises(ConvergenceError) as info:
        elastic_homogenize(grid, copper, SolverConfig(max_iterations=1, residual_tol=1e-12))
    assert info.value.residual > 1e-12


def test_conduction_rejects_nonpositive_base():
    with pytest.raises(DegenerateMaterialError):
        conduction_homogenize(VoxelGrid.solid(4), 0.0)


def test_engineering_constants_rejects_singular_tensor():
    C = isotropic_stiffness(1.0, 0.3)
    C[5, :] = 0.0
    C[:, 5] = 0.0
    with pytest.raises(SingularTensorError):
        engineering_constants(C)


def test_field_dump_writes_headers(tmp_path):
    cfg = SolverConfig(dump_dir=str(tmp_path))
    conduction_homogenize(generate([0.5, 0.5, 0.5], 6), 1.0, cfg)
    dumps = sorted(tmp_path.glob('conduction_case*.voxf'))
    assert len(dumps) == 3
    payload = dumps[0].read_bytes()
    assert payload[:4] == b'VOXF'
    assert len(payload) == 16 + 8 * 6 ** 3


def _two_phase_fraction(grid, soft):
    solid = volume_fraction(grid)
    return solid + (1.0 - solid) * soft


def test_gyroid_stiffness_below_voigt_bound(copper, tight_solver):
    grid = generate([0.45, 0.6, 0.2], 8)
    C = elastic_homogenize(grid, copper, tight_solver).C
    base = isotropic_stiffness(copper.young_modulus_base, copper.poisson_base)
    voigt = _two_phase_fraction(grid, tight_solver.ersatz_stiffness) * base
    assert np.linalg.eigvalsh(voigt - C).min() >= -1e-8 * base.max()
    assert np.linalg.eigvalsh(C).min() > 0


def test_stiffness_is_linear_in_base_modulus(copper, tight_solver):
    grid = generate([0.5, 0.4, 0.5], 8)
    stiffer = copper.model_copy(update={'young_modulus_base': 3.0 * copper.young_modulus_base})
    C = elastic_homogenize(grid, copper, tight_solver).C
    C3 = elastic_homogenize(grid, stiffer, tight_solver).C
    assert np.allclose(C3, 3.0 * C, rtol=1e-8, atol=1e-8 * np.abs(C3).max())


def test_balanced_gyroid_has_cubic_symmetry(copper, tight_solver):
    grid = generate([0.45, 0.5, 0.1], 8)
    C = elastic_homogenize(grid, copper, tight_solver).C
    scale = np.abs(C).max()
    normal, shear = np.diag(C)[:3], np.diag(C)[3:]
    assert np.ptp(normal) <= 1e-6 * scale
    assert np.ptp(shear) <= 1e-6 * scale
    assert C[0, 1] == pytest.approx(C[1, 2], abs=1e-6 * scale)
    assert C[0, 1] == pytest.approx(C[0, 2], abs=1e-6 * scale)


@pytest.mark.parametrize('x', [[0.45, 0.6, 0.2], [0.7, 0.1, 0.9], [0.3, 0.9, 0.5]])
def test_conductivity_within_two_phase_bounds(x, tight_solver):
    grid = generate(x, 8)
    soft = tight_solver.ersatz_stiffness
    solid = volume_fraction(grid)
    arithmetic = solid + (1.0 - solid) * soft
    harmonic = 1.0 / (solid + (1.0 - solid) / soft)
    K = conduction_homogenize(grid, 1.0, tight_solver).K
    for axis in range(3):
        assert harmonic * (1.0 - 1e-8) <= K[axis, axis] <= arithmetic * (1.0 + 1e-8)
