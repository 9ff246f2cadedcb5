"""Temperature-dependent junction physics.

Critical current follows the Ambegaokar-Baratoff relation with a BCS-type
interpolated gap. Junction critical currents are specified at a reference
temperature (4.2 K by default) and rescaled to any operating temperature,
so the millikelvin increase of Ic falls out of the gap model rather than
being an input.

All functions accept floats or numpy arrays and return the same shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .constants import (
    BCS_GAP_RATIO,
    E_CHARGE,
    GAP_INTERP_COEFF,
    KB,
    PHI0,
    T_REF_DEFAULT,
    TC_NB_FILM,
)


class PhysicsDomainError(ValueError):
    """Argument outside the physical domain of a model function."""


@dataclass(frozen=True)
class MaterialParams:
    tc: float = TC_NB_FILM
    gap0: float | None = None  # J; defaults to the BCS weak-coupling value

    def __post_init__(self):
        if not self.tc > 0:
            raise PhysicsDomainError(f"tc must be positive, got {self.tc}")
        if self.gap0 is None:
            object.__setattr__(self, "gap0", BCS_GAP_RATIO * KB * self.tc)
        if not self.gap0 > 0:
            raise PhysicsDomainError(f"gap0 must be positive, got {self.gap0}")


@dataclass(frozen=True)
class JunctionParams:
    ic_ref: float
    rn: float
    r_shunt: float
    cap: float = 0.0
    material: MaterialParams = field(default_factory=MaterialParams)
    t_ref: float = T_REF_DEFAULT
    anneal_factor: float = 1.0

    def __post_init__(self):
        if not self.ic_ref > 0:
            raise PhysicsDomainError("ic_ref must be positive")
        if not self.rn > 0 or not self.r_shunt > 0:
            raise PhysicsDomainError("rn and r_shunt must be positive")
        if self.cap < 0:
            raise PhysicsDomainError("cap must be non-negative")
        if not 0 < self.anneal_factor <= 1:
            raise PhysicsDomainError("anneal_factor must lie in (0, 1]")
        if not 0 <= self.t_ref < self.material.tc:
            raise PhysicsDomainError("t_ref must lie in [0, tc)")


def _check_domain(t, tc):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise PhysicsDomainError("temperature must be non-negative")
    if not tc > 0:
        raise PhysicsDomainError("tc must be positive")
    return t


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _gap_ratio(t: np.ndarray, tc: float) -> np.ndarray:
    below = (t > 0) & (t < tc)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        arg = GAP_INTERP_COEFF * np.sqrt(np.where(below, tc / np.where(below, t, 1.0) - 1.0, 0.0))
        r = np.tanh(arg)
    return np.where(t <= 0, 1.0, np.where(t >= tc, 0.0, r))


def gap_ratio(t, tc: float):
    """Delta(T)/Delta(0); exactly 1 at T=0 and 0 for T >= Tc."""
    t = _check_domain(t, tc)
    return _out(_gap_ratio(t, tc))


def _ic_ratio(t: np.ndarray, tc: float) -> np.ndarray:
    g = _gap_ratio(t, tc)
    below = (t > 0) & (t < tc)
    safe_t = np.where(below, t, 1.0)
    with np.errstate(over="ignore"):
        r = g * np.tanh(BCS_GAP_RATIO * tc / (2.0 * safe_t) * g)
    return np.where(t <= 0, 1.0, np.where(t >= tc, 0.0, r))


def ic_ratio(t, tc: float):
    """Ic(T)/Ic(0) from the Ambegaokar-Baratoff relation with BCS gap."""
    t = _check_domain(t, tc)
    return _out(_ic_ratio(t, tc))


def ic_scale(t, tc: float, t_ref: float = T_REF_DEFAULT):
    """Ic(T)/Ic(t_ref): the factor applied to a reference-temperature Ic."""
    t = _check_domain(t, tc)
    ref = _ic_ratio(np.asarray(t_ref, dtype=float), tc)
    if not ref > 0:
        raise PhysicsDomainError("reference temperature must be below tc")
    return _out(_ic_ratio(t, tc) / ref)


def ic_at(t, j: JunctionParams):
    """Critical current (A) of junction ``j`` at temperature ``t``."""
    return _out(j.anneal_factor * j.ic_ref * np.asarray(ic_scale(t, j.material.tc, j.t_ref)))


def ab_critical_current(t, rn: float, m: MaterialParams):
    """Ambegaokar-Baratoff critical current (A) for normal resistance ``rn``."""
    if not rn > 0:
        raise PhysicsDomainError("rn must be positive")
    t = _check_domain(t, m.tc)
    delta = m.gap0 * _gap_ratio(t, m.tc)
    prefactor = math.pi * delta / (2.0 * E_CHARGE * rn)
    safe_t = np.where(t > 0, t, 1.0)
    with np.errstate(over="ignore"):
        th = np.where(t > 0, np.tanh(delta / (2.0 * KB * safe_t)), 1.0)
    return _out(prefactor * th)


def johnson_sigma(r: float, t, dt: float):
    """Per-step std-dev (A) of the white Johnson current noise of resistor ``r``."""
    if not r > 0 or not dt > 0:
        raise PhysicsDomainError("r and dt must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise PhysicsDomainError("temperature must be non-negative")
    return _out(np.sqrt(4.0 * KB * t / (r * dt)))


def josephson_energy(ic: float) -> float:
    return PHI0 * ic / (2.0 * math.pi)


def escape_barrier_over_kt(i_norm, ic: float, t: float):
    """Washboard barrier height over kB*T at normalized bias ``i_norm``.

    Returns 0 once the bias reaches the critical current.
    """
    if not ic > 0 or not t > 0:
        raise PhysicsDomainError("ic and t must be positive")
    i = np.asarray(i_norm, dtype=float)
    if np.any(i < 0):
        raise PhysicsDomainError("normalized bias must be non-negative")
    ic_ = np.clip(i, 0.0, 1.0)
    du = 2.0 * josephson_energy(ic) * (np.sqrt(1.0 - ic_ * ic_) - ic_ * np.arccos(ic_))
    du = np.where(i >= 1.0, 0.0, np.maximum(du, 0.0))
    kt = KB * t
    if kt == 0.0:  # t so small that kB*T underflows
        return _out(np.where(du > 0, np.inf, 0.0))
    return _out(du / kt)


def anneal(j: JunctionParams, factor: float) -> JunctionParams:
    """Return ``j`` with its Ic scaled by ``factor``; R and C are untouched."""
    if not 0 < factor <= 1:
        raise PhysicsDomainError(f"anneal factor must lie in (0, 1], got {factor}")
    return replace(j, anneal_factor=j.anneal_factor * factor)
