# -*- coding: utf-8 -*-
"""Comparison optimizers sharing the evaluator and budget: NSGA-II, random search, one-shot."""

from typing import Optional

import numpy as np
import structlog
from pydantic import BaseModel, Field, model_validator

from .design_session import SearchStrategy, make_candidate, run_design
from .microstructure import CONDITIONING_DIM, retrieve_seeds
from .pareto import ObjectivePoint, crowding_distance, front_ranks, non_dominated_sort, select
from .saes import ArchiveMixin

_logger = structlog.get_logger(__name__)

LOWER, UPPER = 0.0, 1.0
SBX_MIN_GAP = 1e-14
CENTER = (0.5, 0.5, 0.5)


class Nsga2Config(BaseModel):
    population: int = Field(default=20, ge=2)
    max_generations: int = Field(default=10, ge=0)
    sbx_eta: float = Field(default=15.0, gt=0, description="SBX distribution index")
    mutation_eta: float = Field(default=20.0, gt=0, description="Polynomial mutation distribution index")
    crossover_prob: float = Field(default=0.9, ge=0, le=1)
    mutation_prob: Optional[float] = Field(default=None, ge=0, le=1, description="Per coordinate, 1/d when unset")

    @model_validator(mode='after')
    def _default_mutation_prob(self):
        if self.mutation_prob is None:
            self.mutation_prob = 1.0 / CONDITIONING_DIM
        return self


def _sbx_spread(rng_value, spread, eta):
    alpha = 2.0 - spread ** (-(eta + 1.0))
    if rng_value <= 1.0 / alpha:
        return (rng_value * alpha) ** (1.0 / (eta + 1.0))
    return (1.0 / (2.0 - rng_value * alpha)) ** (1.0 / (eta + 1.0))


def sbx_crossover(p1, p2, cfg, rng):
    """Bounded simulated binary crossover on [0, 1]; the lower child takes the lower side"""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise ValueError(f"Parents differ in dimension: {p1.shape} vs {p2.shape}")

    c1, c2 = p1.copy(), p2.copy()
    if rng.random() > cfg.crossover_prob:
        return c1, c2

    for i in range(len(p1)):
        if rng.random() > 0.5 or abs(p1[i] - p2[i]) < SBX_MIN_GAP:
            continue
        y1, y2 = min(p1[i], p2[i]), max(p1[i], p2[i])
        u = rng.random()
        gap = y2 - y1
        low = _sbx_spread(u, 1.0 + 2.0 * (y1 - LOWER) / gap, cfg.sbx_eta)
        high = _sbx_spread(u, 1.0 + 2.0 * (UPPER - y2) / gap, cfg.sbx_eta)
        c1[i] = np.clip(0.5 * ((y1 + y2) - low * gap), LOWER, UPPER)
        c2[i] = np.clip(0.5 * ((y1 + y2) + high * gap), LOWER, UPPER)
    return c1, c2


def polynomial_mutation(x, cfg, rng):
    """Bounded polynomial mutation, each coordinate with probability mutation_prob"""
    y = np.array(x, dtype=float)
    power = 1.0 / (cfg.mutation_eta + 1.0)
    span = UPPER - LOWER
    for i in range(len(y)):
        if rng.random() >= cfg.mutation_prob:
            continue
        below = (y[i] - LOWER) / span
        above = (UPPER - y[i]) / span
        r = rng.random()
        if r < 0.5:
            value = 2.0 * r + (1.0 - 2.0 * r) * (1.0 - below) ** (cfg.mutation_eta + 1.0)
            delta = value ** power - 1.0
        else:
            value = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * (1.0 - above) ** (cfg.mutation_eta + 1.0)
            delta = 1.0 - value ** power
        y[i] = np.clip(y[i] + delta * span, LOWER, UPPER)
    return y


def _error_points(records):
    return [ObjectivePoint(id=r.id, values=tuple(r.penalized_errors())) for r in records]


class Nsga2Strategy(ArchiveMixin, SearchStrategy):
    """Generational NSGA-II without gradient guidance or weight adaptation"""

    name = 'nsga2'

    def __init__(self, spec, settings, rng, library=None, config=None):
        super().__init__(spec, settings, rng, library=library)
        self.config = config or Nsga2Config(population=spec.budget.population,
                                            max_generations=spec.budget.max_generations)

    def initial_candidates(self):
        return self.uniform_candidates(self.config.population)

    def _tournament_order(self):
        points = _error_points(self.state.population)
        ranks = front_ranks(points)
        crowding = {}
        by_id = {p.id: p for p in points}
        for front in non_dominated_sort(points):
            crowding.update(crowding_distance([by_id[i] for i in front]))
        return lambda record: (ranks[record.id], -crowding[record.id], record.id)

    def _tournament(self, key):
        population = self.state.population
        first, second = self.rng.integers(len(population), size=2)
        return min(population[first], population[second], key=key)

    def next_candidates(self, generation):
        key = self._tournament_order()
        children = []
        while len(children) < self.config.population:
            mother, father = self._tournament(key), self._tournament(key)
            for child in sbx_crossover(mother.x, father.x, self.config, self.rng):
                children.append(make_candidate(polynomial_mutation(child, self.config, self.rng),
                                               parent_id=mother.id))
        return children[:self.config.population]

    def integrate(self, records, generation, candidates=()):
        state = self.state
        state.history.extend(records)
        merged = state.population + records
        by_id = {r.id: r for r in merged}
        state.population = [by_id[i] for i in select(_error_points(merged), self.config.population)]
        self.update_archive(records)
        state.generation = generation
        _logger.debug("nsga2_generation_integrated", generation=generation, archive=len(state.archive))


class RandomSearchStrategy(ArchiveMixin, SearchStrategy):
    """Uniform samples of the conditioning box, one population per generation"""

    name = 'random'

    def initial_candidates(self):
        return self.uniform_candidates(self.population_size)

    def next_candidates(self, generation):
        return self.uniform_candidates(self.population_size)

    def integrate(self, records, generation, candidates=()):
        self.state.history.extend(records)
        self.update_archive(records)
        self.state.generation = generation


class OneShotStrategy(ArchiveMixin, SearchStrategy):
    """Best retrieval seed (or the box center), generated and evaluated once"""

    name = 'oneshot'

    def budget(self):
        return 0, 1

    def initial_candidates(self):
        seeds = retrieve_seeds(self.spec, self.library, 1) if self.library is not None else []
        return [make_candidate(seeds[0] if seeds else np.array(CENTER))]

    def next_candidates(self, generation):
        return []

    def integrate(self, records, generation, candidates=()):
        self.state.history.extend(records)
        self.update_archive(records)


def nsga2_run(spec, settings=None, evaluator=None, seed=0, library=None, config=None):
    return run_design(spec, Nsga2Strategy, seed=seed, settings=settings, evaluator=evaluator, library=library,
                      config=config)


def random_search_run(spec, settings=None, evaluator=None, seed=0, library=None):
    return run_design(spec, RandomSearchStrategy, seed=seed, settings=settings, evaluator=evaluator,
                      library=library)


def one_shot_run(spec, settings=None, evaluator=None, seed=0, library=None):
    return run_design(spec, OneShotStrategy, seed=seed, settings=settings, evaluator=evaluator, library=library)
