# -*- coding: utf-8 -*-
"""Small-strain J2 plasticity with Swift isotropic hardening at a material point."""

from dataclasses import dataclass, field

import numpy as np
import structlog

from ..exceptions import DegenerateMaterialError, PlasticityError, ReturnMappingFault

_logger = structlog.get_logger(__name__)

NEWTON_TOLERANCE = 1e-8
NEWTON_MAX_ITERATIONS = 100
RAMP_STEPS = 20
RAMP_STRAIN = 0.05
IDENTITY = np.eye(3)


def _zero_tensor():
    return np.zeros((3, 3))


@dataclass(frozen=True)
class PlasticState:
    stress: np.ndarray = field(default_factory=_zero_tensor)
    eq_plastic_strain: float = 0.0
    plastic_work: float = 0.0


def deviator(tensor):
    return tensor - np.trace(tensor) / 3.0 * IDENTITY


def von_mises(stress):
    s = deviator(stress)
    return float(np.sqrt(1.5 * np.sum(s * s)))


def yield_stress(material, eq_plastic_strain):
    """Swift law sigma_y0 * (1 + eps_p / eps0)^n"""
    ratio = 1.0 + eq_plastic_strain / material.reference_strain_eps0
    return material.yield_stress_0 * ratio ** material.hardening_exponent_n


def hardening_modulus(material, eq_plastic_strain):
    n = material.hardening_exponent_n
    if n == 0:
        return 0.0
    ratio = 1.0 + eq_plastic_strain / material.reference_strain_eps0
    return material.yield_stress_0 * n / material.reference_strain_eps0 * ratio ** (n - 1.0)


def elastic_moduli(elastic):
    """Isotropic (G, K) from axis-averaged engineering constants"""
    young, poisson = elastic.E_avg, elastic.nu_avg
    if young <= 0 or not -1.0 < poisson < 0.5:
        raise DegenerateMaterialError(f"Invalid elastic constants E={young}, nu={poisson}")
    return young / (2.0 * (1.0 + poisson)), young / (3.0 * (1.0 - 2.0 * poisson))


def radial_return(state, strain_increment, material, elastic):
    """Return-mapping update of `state` under a total strain increment"""
    shear, bulk = elastic_moduli(elastic)
    increment = np.asarray(strain_increment, dtype=float)

    trial = state.stress + 2.0 * shear * deviator(increment) + bulk * np.trace(increment) * IDENTITY
    trial_deviator = deviator(trial)
    q_trial = von_mises(trial)
    eq_plastic = state.eq_plastic_strain

    if q_trial - yield_stress(material, eq_plastic) <= 0.0:
        return PlasticState(stress=trial, eq_plastic_strain=eq_plastic, plastic_work=state.plastic_work)

    gamma = 0.0
    residual = q_trial - yield_stress(material, eq_plastic)
    for iteration in range(1, NEWTON_MAX_ITERATIONS + 1):
        residual = q_trial - 3.0 * shear * gamma - yield_stress(material, eq_plastic + gamma)
        slope = -3.0 * shear - hardening_modulus(material, eq_plastic + gamma)
        step = -residual / slope
        gamma += step
        if abs(step) < NEWTON_TOLERANCE:
            break
    else:
        raise PlasticityError(NEWTON_MAX_ITERATIONS, abs(residual))

    if gamma < 0.0:
        raise ReturnMappingFault(f"Negative plastic increment {gamma:.3e}")

    scale = 1.0 - 3.0 * shear * gamma / q_trial
    stress = scale * trial_deviator + np.trace(trial) / 3.0 * IDENTITY
    work = 0.5 * (yield_stress(material, eq_plastic) + yield_stress(material, eq_plastic + gamma)) * gamma
    _logger.debug("return_mapping", iterations=iteration, increment=gamma)
    return PlasticState(stress=stress, eq_plastic_strain=eq_plastic + gamma,
                        plastic_work=state.plastic_work + work)


def uniaxial_strain_path(material, elastic, steps=RAMP_STEPS, max_strain=RAMP_STRAIN):
    """States along a monotonic uniaxial-strain ramp eps_11: 0 -> max_strain"""
    increment = np.zeros((3, 3))
    increment[0, 0] = max_strain / steps
    states = [PlasticState()]
    for _ in range(steps):
        states.append(radial_return(states[-1], increment, material, elastic))
    return states


def plastic_work(material, elastic, volume_fraction, steps=RAMP_STEPS, max_strain=RAMP_STRAIN):
    """W_p (MJ/m^3) of the ramp with a yield stress scaled by the solid fraction"""
    if material.yield_stress_0 <= 0 or volume_fraction <= 0:
        return 0.0
    effective = material.model_copy(update={'yield_stress_0': material.yield_stress_0 * volume_fraction})
    return uniaxial_strain_path(effective, elastic, steps=steps, max_strain=max_strain)[-1].plastic_work
