# -*- coding: utf-8 -*-
"""Simulation-aware evolutionary search.

Each generation has three steps:
    perception   local WLS gradient of the scalar utility around every parent
    action       signed, normalized gradient step plus Gaussian exploration
    integration  Pareto survivor selection, elite archive, weight and step-size adaptation
"""

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
import structlog
from pydantic import BaseModel, Field, model_validator

from .design_session import SearchStrategy, make_candidate, run_design, scalar_utility
from .microstructure import CONDITIONING_DIM, retrieve_seeds
from .pareto import ObjectivePoint, crowding_distance, dominates, select

_logger = structlog.get_logger(__name__)


class SaesConfig(BaseModel):
    population: int = Field(default=20, ge=2)
    archive_capacity: int = Field(default=50, ge=1)
    max_generations: int = Field(default=10, ge=0)
    window_M: int = Field(default=5, ge=2, description="Nearest neighbors used by the local fit")
    temporal_decay_lambda: float = Field(default=0.5, ge=0)
    outlier_mad_threshold: float = Field(default=2.5, gt=0)
    base_step_eta: float = Field(default=0.1, gt=0)
    noise_beta: float = Field(default=0.05, ge=0)
    momentum: float = Field(default=0.3, ge=0, lt=1)
    use_momentum: bool = True
    use_gradient: bool = Field(default=True, description="Off: the directed step takes a random unit direction")
    adapt_weights: bool = Field(default=True, description="Off: scalarization weights stay uniform")
    noise_follows_step: bool = Field(default=True, description="Scale the exploration noise by eta / base_step_eta")
    stagnation_window: int = Field(default=3, ge=1)
    weight_min: float = Field(default=0.1, gt=0)
    weight_max: float = Field(default=2.0, gt=0)
    stagnation_delta: float = 0.25
    fast_convergence_delta: float = -0.10
    stagnation_threshold: float = Field(default=1e-3, gt=0)
    fast_convergence_threshold: float = Field(default=0.05, gt=0)
    ridge_scale: float = Field(default=1e-8, gt=0)
    eta_min: float = Field(default=0.01, gt=0)
    eta_max: float = Field(default=0.3, gt=0)
    eta_growth: float = Field(default=1.2, gt=1)
    eta_shrink: float = Field(default=0.5, gt=0, lt=1)
    success_target: float = Field(default=0.2, gt=0, lt=1)
    duplicate_radius: float = Field(default=1e-6, ge=0)
    duplicate_perturbation: float = Field(default=0.05, ge=0)
    seed_fraction: float = Field(default=0.5, ge=0, le=1)

    @model_validator(mode='after')
    def _check_bounds(self):
        if self.weight_min >= self.weight_max:
            raise ValueError("weight_min must be below weight_max")
        if self.eta_min > self.eta_max:
            raise ValueError("eta_min must not exceed eta_max")
        return self


@dataclass
class GradientEstimate:
    g: np.ndarray
    neighbor_count: int
    condition_flag: Literal['ok', 'rank_deficient_ridge', 'insufficient_neighbors']

    @property
    def usable(self):
        return self.condition_flag != 'insufficient_neighbors'


@dataclass
class UpdateProposal:
    x: np.ndarray
    step: np.ndarray
    clamped: bool


def temporal_weight(t_j, now, decay):
    if now <= 0:
        return 1.0
    return math.exp(-decay * (now - t_j) / now)


def neighbor_weights(points, times, x_k, now, cfg):
    """Spatial proximity times temporal freshness for every neighbor"""
    squared = np.sum((points - x_k) ** 2, axis=1)
    temporal = np.array([temporal_weight(t, now, cfg.temporal_decay_lambda) for t in times])
    return temporal / (1.0 + squared)


def mad_filter(values, threshold):
    """Mask of values within threshold * MAD of the median; all kept when MAD is zero"""
    median = np.median(values)
    deviation = np.abs(values - median)
    mad = np.median(deviation)
    if mad == 0:
        return np.ones(len(values), dtype=bool)
    return deviation <= threshold * mad


def _y_value(record, y_field):
    return float(y_field(record)) if callable(y_field) else float(getattr(record, y_field))


def estimate_gradient(history, x_k, y_field, cfg, now=None):
    """WLS gradient of y around x_k from the M nearest evaluated designs"""
    x_k = np.asarray(x_k, dtype=float)
    dim = len(x_k)
    if not history:
        return GradientEstimate(np.zeros(dim), 0, 'insufficient_neighbors')

    points = np.array([record.x for record in history], dtype=float)
    values = np.array([_y_value(record, y_field) for record in history])
    times = np.array([record.generation for record in history])
    now = int(times.max()) if now is None else now

    order = np.argsort(np.sum((points - x_k) ** 2, axis=1), kind='stable')[:cfg.window_M]
    points, values, times = points[order], values[order], times[order]

    keep = mad_filter(values, cfg.outlier_mad_threshold)
    if keep.sum() < dim + 1:
        # the filter never leaves the fit underdetermined
        keep = np.ones(len(values), dtype=bool)
    points, values, times = points[keep], values[keep], times[keep]
    count = len(values)
    if count < 2:
        return GradientEstimate(np.zeros(dim), count, 'insufficient_neighbors')

    weights = neighbor_weights(points, times, x_k, now, cfg)
    design = np.insert(points - x_k, 0, 1.0, axis=1)
    normal = design.T @ (design * weights[:, None])

    if np.linalg.matrix_rank(normal) < dim + 1:
        ridge = cfg.ridge_scale * np.trace(normal) / dim
        coefficients = np.linalg.solve(normal + ridge * np.eye(dim + 1), design.T @ (weights * values))
        flag = 'rank_deficient_ridge'
    else:
        root = np.sqrt(weights)
        coefficients = np.linalg.lstsq(design * root[:, None], values * root, rcond=None)[0]
        flag = 'ok'

    gradient = coefficients[1:]
    if not np.all(np.isfinite(gradient)):
        return GradientEstimate(np.zeros(dim), count, 'insufficient_neighbors')
    return GradientEstimate(gradient, count, flag)


def propose_update(x_k, gradient, y_k, y_tgt, eta, cfg, rng, velocity=None):
    """x' = x_k + v + beta * xi with v = momentum * v_parent + eta * sgn(y_tgt - y_k) * g / |g|

    With noise_follows_step, beta is scaled by eta / base_step_eta, so the
    exploration shrinks together with the step once offspring stop improving.
    """
    x_k = np.asarray(x_k, dtype=float)
    dim = len(x_k)
    norm = float(np.linalg.norm(gradient.g))
    if not cfg.use_gradient:
        direction = rng.standard_normal(dim)
        directed = eta * direction / np.linalg.norm(direction)
    elif gradient.usable and norm > 0:
        directed = eta * np.sign(y_tgt - y_k) * gradient.g / norm
    else:
        directed = np.zeros(dim)

    if cfg.use_momentum and velocity is not None:
        step = cfg.momentum * velocity + directed
    else:
        step = directed

    beta = cfg.noise_beta * (eta / cfg.base_step_eta if cfg.noise_follows_step else 1.0)
    noise = beta * rng.standard_normal(dim)
    candidate = make_candidate(x_k + step + noise)
    return UpdateProposal(x=candidate.x, step=step, clamped=candidate.clamped)


def update_weights(weights, gammas, cfg, best_errors=None):
    """Boost stagnant objectives, relax fast-converging ones, clip to the weight range"""
    updated = np.array(weights, dtype=float)
    for j, gamma in enumerate(gammas):
        if gamma is None:
            continue
        solved = best_errors is not None and best_errors[j] == 0
        if abs(gamma) < cfg.stagnation_threshold and not solved:
            updated[j] = updated[j] * (1.0 + cfg.stagnation_delta)
        elif gamma > cfg.fast_convergence_threshold:
            updated[j] = updated[j] * (1.0 + cfg.fast_convergence_delta)
    return np.clip(updated, cfg.weight_min, cfg.weight_max)


def detect_stagnation(best_history, cfg):
    """Relative improvement of the best error over the stagnation window, None if too short"""
    if len(best_history) < cfg.stagnation_window + 1:
        return None
    start, now = best_history[-1 - cfg.stagnation_window], best_history[-1]
    if start == now:
        return 0.0
    return (start - now) / (abs(start) + 1e-9)


def unit_utility(record):
    return sum(record.errors)


def _error_point(record):
    return ObjectivePoint(id=record.id, values=tuple(record.errors))


def archive_insert(archive, record, cfg):
    """Elite archive of feasible, mutually non-dominated records (returns a new list)"""
    if not record.feasible:
        return list(archive)

    incoming = _error_point(record)
    members = [_error_point(r) for r in archive]
    if any(dominates(member, incoming) or member.values == incoming.values for member in members):
        return list(archive)

    kept = [r for r, member in zip(archive, members) if not dominates(incoming, member)]
    kept.append(record)

    while len(kept) > cfg.archive_capacity:
        distances = crowding_distance([_error_point(r) for r in kept])
        protected = min(kept, key=lambda r: (unit_utility(r), r.id)).id
        victim = min((r for r in kept if r.id != protected), key=lambda r: (distances[r.id], -r.id))
        kept = [r for r in kept if r.id != victim.id]
    return kept


class ArchiveMixin:
    """Elite archive bookkeeping shared by every strategy"""

    archive_capacity = 50

    def update_archive(self, records):
        cfg = SaesConfig(archive_capacity=self.archive_capacity)
        for record in records:
            self.state.archive = archive_insert(self.state.archive, record, cfg)


class SaesStrategy(ArchiveMixin, SearchStrategy):
    name = 'saes'
    # config overrides of the ablation variants
    variant = {}

    def __init__(self, spec, settings, rng, library=None, config=None):
        super().__init__(spec, settings, rng, library=library)
        if config is None:
            config = SaesConfig(population=spec.budget.population, max_generations=spec.budget.max_generations,
                                use_momentum=settings.momentum)
        self.config = config.model_copy(update=self.variant)
        self.archive_capacity = self.config.archive_capacity
        self.state.eta = self.config.base_step_eta

    def utility(self, record):
        """Scalar utility under the current weights"""
        return scalar_utility(record.errors, self.state.weights, record.feasible)

    def initial_candidates(self):
        seeds = []
        if self.library is not None:
            count = int(self.config.population * self.config.seed_fraction)
            seeds = [make_candidate(x) for x in retrieve_seeds(self.spec, self.library, count)]
        return seeds + self.uniform_candidates(self.config.population - len(seeds))

    def next_candidates(self, generation):
        cfg = self.config
        candidates = []
        for parent in self.state.population:
            if cfg.use_gradient:
                estimate = estimate_gradient(self.state.history, parent.x, self.utility, cfg, now=generation)
            else:
                estimate = GradientEstimate(np.zeros(CONDITIONING_DIM), 0, 'insufficient_neighbors')
            proposal = propose_update(parent.x, estimate, self.utility(parent), 0.0, self.state.eta, cfg,
                                      self.rng, velocity=self.state.velocities.get(parent.id))
            candidate = make_candidate(self._separate_duplicate(proposal.x), parent_id=parent.id,
                                       velocity=proposal.step)
            candidate.clamped = candidate.clamped or proposal.clamped
            candidates.append(candidate)
        return candidates

    def _separate_duplicate(self, x):
        cfg = self.config
        if not self.state.history:
            return x
        points = np.array([record.x for record in self.state.history])
        if np.min(np.linalg.norm(points - x, axis=1)) > cfg.duplicate_radius:
            return x
        return x + self.rng.uniform(-cfg.duplicate_perturbation, cfg.duplicate_perturbation, CONDITIONING_DIM)

    def integrate(self, records, generation, candidates=()):
        state = self.state
        state.history.extend(records)
        for record, candidate in zip(records, candidates):
            if candidate.velocity is not None:
                state.velocities[record.id] = candidate.velocity

        parents = {parent.id: parent for parent in state.population}
        offspring = [r for r in records if r.parent_id in parents]
        if offspring:
            improved = sum(1 for r in offspring if self.utility(r) < self.utility(parents[r.parent_id]))
            self._adapt_step(improved / len(offspring))

        merged = state.population + records
        survivors = select([ObjectivePoint(id=r.id, values=tuple(r.penalized_errors())) for r in merged],
                           self.config.population)
        by_id = {r.id: r for r in merged}
        state.population = [by_id[i] for i in survivors]

        self.update_archive(records)
        state.best_errors.append([min(r.errors[j] for r in state.history) for j in range(self.objective_count)])
        if self.config.adapt_weights:
            gammas = [detect_stagnation([best[j] for best in state.best_errors], self.config)
                      for j in range(self.objective_count)]
            state.weights = update_weights(state.weights, gammas, self.config, best_errors=state.best_errors[-1])
        state.generation = generation
        _logger.debug("saes_generation_integrated", generation=generation, eta=state.eta,
                      weights=[round(float(w), 6) for w in state.weights], archive=len(state.archive))

    def _adapt_step(self, success_ratio):
        cfg = self.config
        eta = self.state.eta
        if success_ratio > cfg.success_target:
            eta *= cfg.eta_growth
        elif success_ratio < cfg.success_target:
            eta *= cfg.eta_shrink
        self.state.eta = float(np.clip(eta, cfg.eta_min, cfg.eta_max))


class SaesNoGradientStrategy(SaesStrategy):
    """Ablation: random unit directions replace the local gradient"""

    name = 'saes_nograd'
    variant = {'use_gradient': False}


class SaesFixedWeightStrategy(SaesStrategy):
    """Ablation: uniform scalarization weights throughout the run"""

    name = 'saes_noweight'
    variant = {'adapt_weights': False}


def run(spec, settings=None, evaluator=None, seed=0, library=None, config=None):
    return run_design(spec, SaesStrategy, seed=seed, settings=settings, evaluator=evaluator, library=library,
                      config=config)
