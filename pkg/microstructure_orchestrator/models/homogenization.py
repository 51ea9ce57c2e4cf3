# -*- coding: utf-8 -*-
"""Periodic voxel homogenization of elastic stiffness and scalar conductivity.

Each voxel is a trilinear 8-node hexahedron (2x2x2 Gauss integration) on a
periodic lattice of n^3 nodes. Cell problems are solved matrix-free with
Jacobi-preconditioned CG; void voxels carry an ersatz fraction of the base
stiffness so every grid yields a nonsingular system. Voigt order is
(xx, yy, zz, yz, zx, xy) with engineering shear strains.
"""

import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Literal, Optional

import numpy as np
import structlog
from pydantic import BaseModel, Field
from scipy.sparse.linalg import LinearOperator, cg

from ..exceptions import ConvergenceError, DegenerateMaterialError, SimulationError, SingularTensorError
from .worker_pool import run_parallel

_logger = structlog.get_logger(__name__)

# local node order of the hexahedron, matching the shape-function derivatives below
NODE_OFFSETS = np.array([
    [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
    [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
])
GAUSS_POINTS = (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0))
SINGULAR_CONDITION = 1e14
VOXF_MAGIC = b'VOXF'
_VOXF_HEADER = struct.Struct('<4sIII')


class SolverConfig(BaseModel):
    max_iterations: int = Field(default=20000, ge=1, description="PCG iteration cap per load case")
    residual_tol: float = Field(default=1e-6, gt=0, description="Relative residual ||r|| / ||b||")
    ersatz_stiffness: float = Field(default=1e-6, gt=0, lt=1, description="Void stiffness relative to base")
    preconditioner: Literal['jacobi'] = 'jacobi'
    workers: int = Field(default=1, ge=1, description="Concurrent load cases")
    dump_dir: Optional[str] = Field(default=None, description="Write fluctuation fields here when set")


@dataclass(frozen=True)
class ElasticTensor:
    C: np.ndarray
    solver_stats: List[Dict] = field(default_factory=list)


@dataclass(frozen=True)
class ConductionTensor:
    K: np.ndarray
    solver_stats: List[Dict] = field(default_factory=list)

    @property
    def k_avg(self):
        return float(np.trace(self.K)) / 3.0

    def scaled(self, factor):
        return ConductionTensor(K=self.K * factor, solver_stats=self.solver_stats)


@dataclass(frozen=True)
class EngineeringConstants:
    Ex: float
    Ey: float
    Ez: float
    Gxy: float
    Gxz: float
    Gyz: float
    nu_xy: float
    nu_xz: float
    nu_yz: float
    condition_number: float = 1.0

    @property
    def E_avg(self):
        return (self.Ex + self.Ey + self.Ez) / 3.0

    @property
    def G_avg(self):
        return (self.Gxy + self.Gxz + self.Gyz) / 3.0

    @property
    def nu_avg(self):
        return (self.nu_xy + self.nu_xz + self.nu_yz) / 3.0


def isotropic_stiffness(young, poisson):
    """6x6 Voigt stiffness of an isotropic solid"""
    if young <= 0:
        raise DegenerateMaterialError(f"Young's modulus must be positive, got {young}")
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    mu = young / (2.0 * (1.0 + poisson))
    C = np.zeros((6, 6))
    C[:3, :3] = lam
    C[np.arange(3), np.arange(3)] = lam + 2.0 * mu
    C[np.arange(3, 6), np.arange(3, 6)] = mu
    return C


def _shape_gradients(xi1, xi2, xi3, h):
    """Physical gradients (3 x 8) of the trilinear shape functions and det J"""
    d_shape = 0.125 * np.array([
        [-(1 - xi2) * (1 - xi3), (1 - xi2) * (1 - xi3), (1 + xi2) * (1 - xi3), -(1 + xi2) * (1 - xi3),
         -(1 - xi2) * (1 + xi3), (1 - xi2) * (1 + xi3), (1 + xi2) * (1 + xi3), -(1 + xi2) * (1 + xi3)],
        [-(1 - xi1) * (1 - xi3), -(1 + xi1) * (1 - xi3), (1 + xi1) * (1 - xi3), (1 - xi1) * (1 - xi3),
         -(1 - xi1) * (1 + xi3), -(1 + xi1) * (1 + xi3), (1 + xi1) * (1 + xi3), (1 - xi1) * (1 + xi3)],
        [-(1 - xi1) * (1 - xi2), -(1 + xi1) * (1 - xi2), -(1 + xi1) * (1 + xi2), -(1 - xi1) * (1 + xi2),
         (1 - xi1) * (1 - xi2), (1 + xi1) * (1 - xi2), (1 + xi1) * (1 + xi2), (1 - xi1) * (1 + xi2)],
    ])
    coordinates = (NODE_OFFSETS - 0.5) * h
    jacobian = d_shape @ coordinates
    return np.linalg.solve(jacobian, d_shape), np.linalg.det(jacobian)


def element_stiffness(C, h):
    """24x24 hexahedral stiffness for Voigt stiffness C on a cube of edge h"""
    Ke = np.zeros((24, 24))
    for xi1 in GAUSS_POINTS:
        for xi2 in GAUSS_POINTS:
            for xi3 in GAUSS_POINTS:
                grad, det = _shape_gradients(xi1, xi2, xi3, h)
                B = np.zeros((6, 24))
                for a in range(8):
                    B[0, 3 * a] = B[4, 3 * a + 2] = B[5, 3 * a + 1] = grad[0, a]
                    B[1, 3 * a + 1] = B[3, 3 * a + 2] = B[5, 3 * a] = grad[1, a]
                    B[2, 3 * a + 2] = B[3, 3 * a + 1] = B[4, 3 * a] = grad[2, a]
                Ke += B.T @ C @ B * det
    return 0.5 * (Ke + Ke.T)


def element_conductance(h):
    """8x8 hexahedral conductance for unit isotropic conductivity"""
    Ke = np.zeros((8, 8))
    for xi1 in GAUSS_POINTS:
        for xi2 in GAUSS_POINTS:
            for xi3 in GAUSS_POINTS:
                grad, det = _shape_gradients(xi1, xi2, xi3, h)
                Ke += grad.T @ grad * det
    return 0.5 * (Ke + Ke.T)


def unit_strain(case):
    """Tensor strain of the Voigt unit macroscopic strain `case`"""
    strain = np.zeros((3, 3))
    if case < 3:
        strain[case, case] = 1.0
    else:
        i, j = {3: (1, 2), 4: (2, 0), 5: (0, 1)}[case]
        strain[i, j] = strain[j, i] = 0.5
    return strain


@lru_cache(maxsize=8)
def _element_nodes(n):
    """Global node ids (n^3 x 8) of every element; element id = i + n*j + n^2*k"""
    axis = np.arange(n)
    i, j, k = (a.ravel(order='F') for a in np.meshgrid(axis, axis, axis, indexing='ij'))
    nodes = np.empty((n ** 3, 8), dtype=np.int64)
    for a, (di, dj, dk) in enumerate(NODE_OFFSETS):
        nodes[:, a] = (i + di) % n + n * ((j + dj) % n) + n * n * ((k + dk) % n)
    nodes.setflags(write=False)
    return nodes


class PeriodicCellProblem:
    """Matrix-free periodic operator sum_e rho_e * Ke on a voxel grid.

    Node 0 is pinned to remove the rigid translations of the periodic cell.
    """

    def __init__(self, grid, Ke, dofs_per_node, cfg, physics):
        self.n = grid.resolution
        self.Ke = Ke
        self.cfg = cfg
        self.physics = physics
        self.dofs_per_node = dofs_per_node
        self.ndof = dofs_per_node * self.n ** 3
        nodes = _element_nodes(self.n)
        self.edof = (nodes[:, :, None] * dofs_per_node + np.arange(dofs_per_node)).reshape(len(nodes), -1)
        self.rho = np.where(grid.occupancy.ravel(order='F'), 1.0, cfg.ersatz_stiffness)
        self.free = np.arange(dofs_per_node, self.ndof)
        diagonal = np.bincount(self.edof.ravel(), weights=(self.rho[:, None] * np.diag(Ke)[None, :]).ravel(),
                               minlength=self.ndof)
        self.inverse_diagonal = 1.0 / diagonal[self.free]

    def apply(self, u):
        forces = (u[self.edof] @ self.Ke) * self.rho[:, None]
        return np.bincount(self.edof.ravel(), weights=forces.ravel(), minlength=self.ndof)

    def load(self, u0):
        """Assembled right-hand side for the element-local affine field u0"""
        forces = np.outer(self.rho, self.Ke @ u0)
        return np.bincount(self.edof.ravel(), weights=forces.ravel(), minlength=self.ndof)

    def _expand(self, reduced):
        full = np.zeros(self.ndof)
        full[self.free] = reduced
        return full

    def solve(self, u0, case):
        b = self.load(u0)[self.free]
        reference = np.linalg.norm(self.rho) * np.linalg.norm(self.Ke @ u0)
        b_norm = np.linalg.norm(b)
        if b_norm <= 1e-10 * reference:
            stats = {'physics': self.physics, 'case': case, 'iterations': 0, 'residual': 0.0}
            return np.zeros(self.ndof), stats

        nfree = len(self.free)
        operator = LinearOperator((nfree, nfree), matvec=lambda x: self.apply(self._expand(x))[self.free],
                                  dtype=float)
        preconditioner = LinearOperator((nfree, nfree), matvec=lambda r: self.inverse_diagonal * r, dtype=float)
        iterations = [0]

        def _count(_xk):
            iterations[0] += 1

        solution, info = cg(operator, b, rtol=self.cfg.residual_tol, atol=0.0, maxiter=self.cfg.max_iterations,
                            M=preconditioner, callback=_count)
        residual = float(np.linalg.norm(b - operator.matvec(solution)) / b_norm)
        if info != 0:
            raise ConvergenceError(f"{self.physics} load case {case} did not converge",
                                   iterations=iterations[0], residual=residual)

        stats = {'physics': self.physics, 'case': case, 'iterations': iterations[0], 'residual': residual}
        _logger.debug("cell_problem_solved", **stats)
        return self._expand(solution), stats

    def energy(self, u0_m, chi_m, u0_p, chi_p):
        """sum_e rho_e (u0_m - chi_m)^T Ke (u0_p - chi_p) over all elements"""
        d_m = u0_m[None, :] - chi_m[self.edof]
        d_p = u0_p[None, :] - chi_p[self.edof]
        return float(np.sum(self.rho * np.sum((d_m @ self.Ke) * d_p, axis=1)))

    def dump(self, fields_by_case):
        if not self.cfg.dump_dir:
            return
        target = Path(self.cfg.dump_dir)
        target.mkdir(parents=True, exist_ok=True)
        for case, chi in fields_by_case.items():
            header = _VOXF_HEADER.pack(VOXF_MAGIC, 1, self.n, self.dofs_per_node)
            # x-fastest node ordering, components interleaved per node
            payload = np.asarray(chi, dtype='<f8').tobytes()
            (target / f"{self.physics}_case{case}.voxf").write_bytes(header + payload)


def _affine_displacements(h):
    coordinates = NODE_OFFSETS * h
    return [(coordinates @ unit_strain(case).T).ravel() for case in range(6)]


def elastic_homogenize(grid, material, cfg=None):
    """Homogenized 6x6 stiffness of the periodic grid"""
    cfg = cfg or SolverConfig()
    if material.young_modulus_base <= 0:
        raise DegenerateMaterialError(f"Base Young's modulus must be positive, got {material.young_modulus_base}")

    h = 1.0 / grid.resolution
    base = isotropic_stiffness(material.young_modulus_base, material.poisson_base)
    problem = PeriodicCellProblem(grid, element_stiffness(base, h), 3, cfg, 'elastic')
    u0 = _affine_displacements(h)

    solved = run_parallel(lambda case: problem.solve(u0[case], case), range(6), workers=cfg.workers)
    chi = [field_ for field_, _ in solved]
    stats = [stat for _, stat in solved]
    problem.dump(dict(enumerate(chi)))

    C = np.empty((6, 6))
    for m in range(6):
        for p in range(m, 6):
            C[m, p] = C[p, m] = problem.energy(u0[m], chi[m], u0[p], chi[p])
    return ElasticTensor(C=_validated_stiffness(C), solver_stats=stats)


def _validated_stiffness(C):
    scale = np.abs(C).max()
    if not np.all(np.isfinite(C)) or scale == 0:
        raise SimulationError("Homogenized stiffness is not finite")
    asymmetry = np.abs(C - C.T).max()
    if asymmetry > 1e-8 * scale:
        raise SimulationError(f"Homogenized stiffness is not symmetric ({asymmetry:.3e})")
    C = 0.5 * (C + C.T)
    smallest = np.linalg.eigvalsh(C).min()
    if smallest < -1e-8 * scale:
        raise SimulationError(f"Homogenized stiffness is not positive semidefinite ({smallest:.3e})")
    return C


def engineering_constants(tensor):
    """Engineering moduli from the compliance S = C^-1"""
    C = tensor.C if isinstance(tensor, ElasticTensor) else np.asarray(tensor, dtype=float)
    condition = float(np.linalg.cond(C))
    if not np.isfinite(condition) or condition > SINGULAR_CONDITION:
        raise SingularTensorError(condition)
    try:
        S = np.linalg.inv(C)
    except np.linalg.LinAlgError as e:
        raise SingularTensorError(float('inf')) from e

    return EngineeringConstants(
        Ex=1.0 / S[0, 0], Ey=1.0 / S[1, 1], Ez=1.0 / S[2, 2],
        Gyz=1.0 / S[3, 3], Gxz=1.0 / S[4, 4], Gxy=1.0 / S[5, 5],
        nu_xy=-S[0, 1] / S[0, 0], nu_xz=-S[0, 2] / S[0, 0], nu_yz=-S[1, 2] / S[1, 1],
        condition_number=condition,
    )


def conduction_homogenize(grid, base_conductivity, cfg=None):
    """Homogenized 3x3 conductivity of the periodic grid"""
    cfg = cfg or SolverConfig()
    if base_conductivity <= 0:
        raise DegenerateMaterialError(f"Base conductivity must be positive, got {base_conductivity}")

    h = 1.0 / grid.resolution
    problem = PeriodicCellProblem(grid, element_conductance(h), 1, cfg, 'conduction')
    u0 = [NODE_OFFSETS[:, axis] * h for axis in range(3)]

    solved = run_parallel(lambda axis: problem.solve(u0[axis].astype(float), axis), range(3), workers=cfg.workers)
    chi = [field_ for field_, _ in solved]
    stats = [stat for _, stat in solved]
    problem.dump(dict(enumerate(chi)))

    K = np.empty((3, 3))
    for m in range(3):
        for p in range(m, 3):
            K[m, p] = K[p, m] = problem.energy(u0[m].astype(float), chi[m], u0[p].astype(float), chi[p])
    return ConductionTensor(K=K * base_conductivity, solver_stats=stats)
