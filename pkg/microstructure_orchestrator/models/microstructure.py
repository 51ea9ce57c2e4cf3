# -*- coding: utf-8 -*-
"""Geometry generation: conditioning vectors, gyroid voxel grids and the seed library."""

import json
import math
import struct
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field
from scipy import ndimage, optimize

from ..exceptions import ValidationError
from ..hooks import package_version

_logger = structlog.get_logger(__name__)

CONDITIONING_DIM = 3
MIN_RESOLUTION = 4
ANISOTROPY_BASE = 4.0 / 3.0
VOXG_MAGIC = b'VOXG'
VOXG_VERSION = 1
_HEADER = struct.Struct('<4sIII')
AMPLITUDE_SAMPLES = 24
AMPLITUDE_MARGIN = 1e-6


def clamp_coordinates(x):
    """Project x onto the unit box; returns (coords, clamped)"""
    coords = np.asarray(x, dtype=float).reshape(-1)
    if coords.shape != (CONDITIONING_DIM,):
        raise ValidationError(f"Conditioning vector must have {CONDITIONING_DIM} coordinates, got {coords.size}")
    if not np.all(np.isfinite(coords)):
        raise ValidationError("Conditioning vector contains non-finite coordinates")
    clipped = np.clip(coords, 0.0, 1.0)
    return clipped, bool(np.any(clipped != coords))


def _weighted_gyroid(weights, px, py, pz, cells=1):
    k = 2.0 * math.pi * cells
    sx, cx = np.sin(k * px), np.cos(k * px)
    sy, cy = np.sin(k * py), np.cos(k * py)
    sz, cz = np.sin(k * pz), np.cos(k * pz)
    a, b, c = weights
    return a * sx * cy + b * sy * cz + c * sz * cx


@lru_cache(maxsize=256)
def gyroid_amplitude(weights):
    """max g over the torus; g is odd, so min g = -max g"""
    axis = np.arange(AMPLITUDE_SAMPLES) / AMPLITUDE_SAMPLES
    px, py, pz = np.meshgrid(axis, axis, axis, indexing='ij')
    field = _weighted_gyroid(weights, px, py, pz)
    start = np.unravel_index(int(np.argmax(field)), field.shape)
    refined = optimize.minimize(
        lambda p: -_weighted_gyroid(weights, p[0], p[1], p[2]),
        x0=axis[list(start)], method='Nelder-Mead', options={'xatol': 1e-10, 'fatol': 1e-14, 'maxiter': 4000},
    )
    return max(float(field.max()), float(-refined.fun))


class LevelSet:
    """Weighted gyroid g(p) with f cells per edge; solid where g(p) <= tau.

    tau spans [-A, A] affinely in coords[0], A being the field amplitude, so the
    volume fraction sweeps the whole of [0, 1] without saturated stretches.
    """

    def __init__(self, x):
        coords, self.clamped = clamp_coordinates(x)
        self.coords = coords
        stretch = ANISOTROPY_BASE ** (2.0 * coords[1] - 1.0)
        self.weights = np.array([stretch, 1.0, 1.0 / stretch])
        self.cells = 1 + min(2, int(math.floor(3.0 * coords[2])))
        self.amplitude = gyroid_amplitude(tuple(float(w) for w in self.weights))
        self.tau = (2.0 * coords[0] - 1.0) * self.amplitude * (1.0 + AMPLITUDE_MARGIN)

    def __call__(self, px, py, pz):
        return _weighted_gyroid(self.weights, px, py, pz, self.cells)


class VoxelGrid:
    """Immutable periodic n x n x n occupancy field, indexed [x, y, z]"""

    def __init__(self, occupancy, clamped=False):
        occupancy = np.array(occupancy, dtype=bool)
        if occupancy.ndim != 3 or len(set(occupancy.shape)) != 1:
            raise ValidationError(f"Voxel grids must be cubic, got shape {occupancy.shape}")
        if occupancy.shape[0] < MIN_RESOLUTION:
            raise ValidationError(f"Voxel grids need resolution >= {MIN_RESOLUTION}")
        occupancy.setflags(write=False)
        self.occupancy = occupancy
        self.clamped = clamped

    @property
    def resolution(self):
        return self.occupancy.shape[0]

    def __eq__(self, other):
        return isinstance(other, VoxelGrid) and np.array_equal(self.occupancy, other.occupancy)

    def __hash__(self):
        return hash(self.occupancy.tobytes())

    def __repr__(self):
        return f"VoxelGrid(n={self.resolution}, vf={volume_fraction(self):.4f})"

    @classmethod
    def solid(cls, resolution):
        return cls(np.ones((resolution,) * 3, dtype=bool))

    @classmethod
    def void(cls, resolution):
        return cls(np.zeros((resolution,) * 3, dtype=bool))

    def to_bytes(self):
        n = self.resolution
        bits = np.packbits(self.occupancy.ravel(order='F').astype(np.uint8), bitorder='little')
        return _HEADER.pack(VOXG_MAGIC, VOXG_VERSION, n, 0) + bits.tobytes()

    @classmethod
    def from_bytes(cls, payload):
        if len(payload) < _HEADER.size:
            raise ValidationError("Truncated voxel grid header")
        magic, version, n, _reserved = _HEADER.unpack_from(payload)
        if magic != VOXG_MAGIC or version != VOXG_VERSION:
            raise ValidationError(f"Not a version {VOXG_VERSION} voxel grid file")
        count = n ** 3
        body = np.frombuffer(payload, dtype=np.uint8, offset=_HEADER.size)
        if body.size * 8 < count:
            raise ValidationError(f"Voxel grid body holds {body.size * 8} bits, expected {count}")
        bits = np.unpackbits(body, count=count, bitorder='little').astype(bool)
        return cls(bits.reshape((n, n, n), order='F'))

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes())


def voxel_centers(resolution):
    axis = (np.arange(resolution) + 0.5) / resolution
    return np.meshgrid(axis, axis, axis, indexing='ij')


def generate(x, resolution):
    """Deterministic gyroid microstructure for conditioning vector x"""
    if resolution < MIN_RESOLUTION:
        raise ValidationError(f"resolution must be >= {MIN_RESOLUTION}, got {resolution}")
    level_set = LevelSet(x)
    if level_set.clamped:
        _logger.debug("conditioning_clamped", coords=[float(c) for c in np.asarray(x, dtype=float).ravel()])
    px, py, pz = voxel_centers(resolution)
    return VoxelGrid(level_set(px, py, pz) <= level_set.tau, clamped=level_set.clamped)


def volume_fraction(grid):
    return float(np.count_nonzero(grid.occupancy)) / grid.occupancy.size


def connectivity_check(grid):
    """True iff the solid phase is one 6-connected component on the 3-torus"""
    structure = ndimage.generate_binary_structure(3, 1)
    labels, count = ndimage.label(grid.occupancy, structure=structure)
    if count == 0:
        return False
    if count == 1:
        return True

    parent = list(range(count + 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for axis in range(3):
        first = np.take(labels, 0, axis=axis)
        last = np.take(labels, -1, axis=axis)
        touching = (first > 0) & (last > 0)
        for a, b in zip(first[touching], last[touching]):
            root_a, root_b = find(int(a)), find(int(b))
            if root_a != root_b:
                parent[root_b] = root_a

    return len({find(label) for label in range(1, count + 1)}) == 1


class SeedEntry(BaseModel):
    coords: List[float] = Field(min_length=CONDITIONING_DIM, max_length=CONDITIONING_DIM)
    # E, G, kappa, sigma relative to the base material; nu and vf absolute
    properties: Dict[str, float]
    feasible: bool = True
    provenance: Dict[str, Union[str, int, float]] = Field(default_factory=dict)

    def scaled_properties(self, material):
        scale = {
            'E': material.young_modulus_base,
            'G': material.shear_modulus_base,
            'kappa': material.thermal_conductivity_base,
            'sigma': material.electrical_conductivity_base,
        }
        return {pid: value * scale.get(pid, 1.0) for pid, value in self.properties.items()}


class SeedLibrary(BaseModel):
    entries: List[SeedEntry] = Field(default_factory=list)

    def is_stale(self, entry):
        return entry.provenance.get('generator_version') != package_version()

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.model_dump(mode='json'), indent=1, sort_keys=True) + '\n',
                        encoding='utf-8')

    @classmethod
    def load(cls, path):
        return cls.model_validate(json.loads(Path(path).read_text(encoding='utf-8')))


def seed_distance(entry_properties, spec):
    """Sum of squared tolerance-normalized deviations over match_target objectives"""
    total = 0.0
    for objective in spec.objectives:
        if objective.kind != 'match_target' or objective.property_id not in entry_properties:
            continue
        scale = objective.tolerance * abs(objective.target)
        total += ((entry_properties[objective.property_id] - objective.target) / scale) ** 2
    return total


def retrieve_seeds(spec, library, k):
    """The k library conditioning vectors closest to the task targets"""
    if k <= 0 or not library.entries:
        return []

    ranked = []
    stale = 0
    for index, entry in enumerate(library.entries):
        if library.is_stale(entry):
            stale += 1
            continue
        if not entry.feasible:
            continue
        ranked.append((seed_distance(entry.scaled_properties(spec.material), spec), index))
    if stale:
        _logger.warning("stale_seed_entries_skipped", count=stale, generator_version=package_version())

    ranked.sort()
    return [np.array(library.entries[index].coords, dtype=float) for _, index in ranked[:k]]
