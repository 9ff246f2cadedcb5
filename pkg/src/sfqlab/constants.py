"""Fixed physical constants (CODATA 2018 exact / recommended values, SI)."""

from dataclasses import dataclass
import math


@dataclass(frozen=True)
class PhysicalConstants:
    phi0: float = 2.067833848e-15  # Wb
    kB: float = 1.380649e-23  # J/K
    e: float = 1.602176634e-19  # C


CONSTANTS = PhysicalConstants()

PHI0 = CONSTANTS.phi0
KB = CONSTANTS.kB
E_CHARGE = CONSTANTS.e
PHI0_2PI = PHI0 / (2 * math.pi)

# BCS weak-coupling ratio Delta(0) / (kB Tc)
BCS_GAP_RATIO = 1.76
# coefficient inside the tanh of the gap interpolation
GAP_INTERP_COEFF = 1.74

T_REF_DEFAULT = 4.2
TC_NB_FILM = 8.5
PROCESS_MIN_IC = 10e-6
