# -*- coding: utf-8 -*-
"""Pareto dominance, non-dominated sorting, crowding distance and survivor selection."""

from dataclasses import dataclass
from typing import Hashable, Tuple

import numpy as np

DIRECTIONS = ('minimize', 'maximize')


@dataclass(frozen=True)
class ObjectivePoint:
    id: Hashable
    values: Tuple[float, ...]
    directions: Tuple[str, ...] = ()

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        directions = tuple(self.directions) or ('minimize',) * len(values)
        if len(directions) != len(values):
            raise ValueError(f"Point {self.id!r}: {len(values)} values but {len(directions)} directions")
        if any(direction not in DIRECTIONS for direction in directions):
            raise ValueError(f"Point {self.id!r}: directions must be one of {DIRECTIONS}")
        if not all(np.isfinite(values)):
            raise ValueError(f"Point {self.id!r} has non-finite objective values")
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'directions', directions)

    def oriented(self):
        """Values turned into minimization form"""
        return np.array([v if d == 'minimize' else -v for v, d in zip(self.values, self.directions)])


def minimizing(points_values, ids=None):
    """ObjectivePoints for plain minimization rows"""
    ids = range(len(points_values)) if ids is None else ids
    return [ObjectivePoint(id=i, values=tuple(values)) for i, values in zip(ids, points_values)]


def dominates(a, b):
    if a.directions != b.directions:
        raise ValueError(f"Cannot compare {a.id!r} and {b.id!r}: objective dimensions differ")
    va, vb = a.oriented(), b.oriented()
    return bool(np.all(va <= vb) and np.any(va < vb))


def _dominance_matrix(points):
    values = np.array([p.oriented() for p in points])
    no_worse = np.all(values[:, None, :] <= values[None, :, :], axis=2)
    better = np.any(values[:, None, :] < values[None, :, :], axis=2)
    return no_worse & better


def non_dominated_sort(points):
    """Fronts of ids, best first; members keep their input order"""
    if not points:
        return []
    dims = {p.directions for p in points}
    if len(dims) != 1:
        raise ValueError("All points must share the same objective directions")

    dominated_by = _dominance_matrix(points)
    counts = dominated_by.sum(axis=0)
    current = [i for i in range(len(points)) if counts[i] == 0]
    fronts = []
    while current:
        fronts.append([points[i].id for i in current])
        following = []
        for i in current:
            for j in np.flatnonzero(dominated_by[i]):
                counts[j] -= 1
                if counts[j] == 0:
                    following.append(j)
        current = sorted(following)
    return fronts


def crowding_distance(front):
    """Deb's crowding distance per id"""
    size = len(front)
    if size <= 2:
        return {p.id: float('inf') for p in front}

    values = np.array([p.values for p in front])
    distance = np.zeros(size)
    for m in range(values.shape[1]):
        order = sorted(range(size), key=lambda i: (values[i, m], _sort_key(front[i].id)))
        distance[order[0]] = distance[order[-1]] = np.inf
        span = values[order[-1], m] - values[order[0], m]
        if span == 0:
            continue
        for position in range(1, size - 1):
            distance[order[position]] += (values[order[position + 1], m] - values[order[position - 1], m]) / span
    return {p.id: float(d) for p, d in zip(front, distance)}


def _sort_key(identifier):
    return (type(identifier).__name__, identifier)


def select(points, n):
    """n survivors by front rank, then descending crowding distance, then id"""
    if n >= len(points):
        n = len(points)
    by_id = {p.id: p for p in points}
    survivors = []
    for front in non_dominated_sort(points):
        members = [by_id[i] for i in front]
        distances = crowding_distance(members)
        ranked = sorted(front, key=lambda i: (-distances[i], _sort_key(i)))
        if len(survivors) + len(front) <= n:
            survivors.extend(ranked)
        else:
            survivors.extend(ranked[:n - len(survivors)])
        if len(survivors) >= n:
            break
    return survivors


def front_ranks(points):
    """Map id -> 1-based front rank"""
    return {i: rank for rank, front in enumerate(non_dominated_sort(points), start=1) for i in front}
