"""Temperature- and bias-dependent error model, and error accounting."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
import math

from ..constants import T_REF_DEFAULT, TC_NB_FILM
from ..netlist.library import CellSpec
from ..physics import escape_barrier_over_kt, ic_scale

TAU_VULN = 5e-12
F_ATTEMPT = 100e9
P_FLOOR = 1e-15


@lru_cache(maxsize=4096)
def _ratio(t: float, tc: float) -> float:
    return float(ic_scale(t, tc, T_REF_DEFAULT))


@dataclass(frozen=True)
class ErrorModel:
    """Operating point of a behavioral run.

    ``bias_scale`` is the shared bias beta. Every junction Ic is scaled by
    ``r * anneal_factor``, where r = Ic(T)/Ic(4.2 K); the bias a cell sees
    relative to its junctions is beta_eff = beta / (r * anneal_factor).
    ``windows`` enables the deterministic out-of-window failures, ``thermal``
    the stochastic escape errors. ``edge_shift`` applies each cell's measured
    kappa on top of the pure Ic scaling.
    """

    temperature: float = T_REF_DEFAULT
    bias_scale: float = 1.0
    anneal_factor: float = 1.0
    tc: float = TC_NB_FILM
    tau_vuln: float = TAU_VULN
    f_attempt: float = F_ATTEMPT
    windows: bool = True
    thermal: bool = True
    edge_shift: bool = False

    def __post_init__(self):
        if not self.bias_scale > 0:
            raise ValueError("bias_scale must be positive")
        if not 0 < self.anneal_factor <= 1:
            raise ValueError("anneal_factor must lie in (0, 1]")
        if not 0 <= self.temperature < self.tc:
            raise ValueError("temperature must lie in [0, tc)")
        if self.tau_vuln < 0 or self.f_attempt < 0:
            raise ValueError("tau_vuln and f_attempt must be non-negative")

    @classmethod
    def off(cls, **kw) -> "ErrorModel":
        return cls(windows=False, thermal=False, **kw)

    def at(self, **kw) -> "ErrorModel":
        return replace(self, **kw)

    @property
    def ic_ratio_ref(self) -> float:
        """r(T) = ic_ratio(T) / ic_ratio(4.2 K)."""
        return _ratio(self.temperature, self.tc)

    @property
    def ic_factor(self) -> float:
        return self.ic_ratio_ref * self.anneal_factor

    @property
    def beta_eff(self) -> float:
        return self.bias_scale / self.ic_factor

    def edges(self, window: tuple[float, float], spec: CellSpec) -> tuple[float, float]:
        """Passing beta interval of a cell whose 4.2 K window is ``window``."""
        c = self.ic_factor
        lo, hi = c * window[0], c * window[1]
        if self.edge_shift:
            lo += (c - 1) * spec.kappa[0]
            hi += (c - 1) * spec.kappa[1]
        return lo, hi

    def window_status(self, window: tuple[float, float], spec: CellSpec) -> int:
        """-1 below the window, 0 inside, +1 above."""
        if not self.windows:
            return 0
        lo, hi = self.edges(window, spec)
        if self.bias_scale < lo:
            return -1
        if self.bias_scale > hi:
            return 1
        return 0

    def storage_error_rate(self, spec: CellSpec) -> float:
        """Probability of a thermally activated error per cell operation."""
        if not self.thermal or self.temperature <= 0:
            return 0.0
        i = self.beta_eff * spec.i_nom
        barrier = float(escape_barrier_over_kt(min(i, 1.0), spec.escape_ic * self.ic_factor, self.temperature))
        p = min(1.0, self.tau_vuln * self.f_attempt * math.exp(-barrier))
        return 0.0 if p < P_FLOOR else p


@dataclass(frozen=True)
class ErrorStats:
    trials: int = 0
    failures: int = 0
    missing_pulses: int = 0
    extraneous_pulses: int = 0

    def __post_init__(self):
        if not 0 <= self.failures <= self.trials:
            raise ValueError("failures must lie in [0, trials]")

    @property
    def error_rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    def __add__(self, other: "ErrorStats") -> "ErrorStats":
        return ErrorStats(
            self.trials + other.trials,
            self.failures + other.failures,
            self.missing_pulses + other.missing_pulses,
            self.extraneous_pulses + other.extraneous_pulses,
        )

    def as_dict(self) -> dict:
        return {
            "trials": self.trials,
            "failures": self.failures,
            "missing_pulses": self.missing_pulses,
            "extraneous_pulses": self.extraneous_pulses,
            "error_rate": self.error_rate,
        }
