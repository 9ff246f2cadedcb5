"""Analog process-monitor fitters: critical current from IV sweeps, inductance
from SQUID voltage-flux modulation, plus synthetic curve generators."""

from __future__ import annotations

import csv
from dataclasses import dataclass
import io

import numpy as np
from scipy.signal import find_peaks

from ..constants import PHI0, T_REF_DEFAULT
from ..physics import MaterialParams, ab_critical_current, ic_scale

V_THRESHOLD = 10e-6  # per series junction


class FitError(ValueError):
    pass


class NoSwitchError(FitError):
    pass


class InsufficientDataError(FitError):
    pass


def _monotone(x: np.ndarray, y: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError(f"{what}: x and y must be equal-length 1-D arrays")
    if len(x) < 2:
        raise ValueError(f"{what}: need at least two samples")
    d = np.diff(x)
    if np.all(d > 0):
        return x, y
    if np.all(d < 0):
        return x[::-1].copy(), y[::-1].copy()
    raise ValueError(f"{what}: sample grid must be strictly monotone")


@dataclass(frozen=True)
class IVCurve:
    current: np.ndarray  # A
    voltage: np.ndarray  # V
    n_series: int = 1

    def __post_init__(self):
        i, v = _monotone(np.asarray(self.current, float), np.asarray(self.voltage, float), "IV curve")
        object.__setattr__(self, "current", i)
        object.__setattr__(self, "voltage", v)
        if self.n_series < 1:
            raise ValueError("n_series must be >= 1")


@dataclass(frozen=True)
class VPhiCurve:
    coil_current: np.ndarray  # A
    voltage: np.ndarray  # V

    def __post_init__(self):
        i, v = _monotone(np.asarray(self.coil_current, float), np.asarray(self.voltage, float), "V-phi curve")
        object.__setattr__(self, "coil_current", i)
        object.__setattr__(self, "voltage", v)


def icrn_product(t: float = T_REF_DEFAULT, tc: float = 8.5) -> float:
    """Ic*Rn (V) of a junction at temperature ``t``."""
    return float(ab_critical_current(t, 1.0, MaterialParams(tc=tc)))


def synthesize_iv(ic: float, n_series: int = 10, r: float | None = None, i_max: float | None = None, points: int = 2001, noise: float = 0.0, seed: int = 0) -> IVCurve:
    """Overdamped RSJ array: V = n R sqrt(I^2 - Ic^2) above Ic, 0 below.

    ``r`` defaults to the normal resistance implied by the Ic*Rn product.
    """
    r = icrn_product() / ic if r is None else r
    i = np.linspace(0.0, i_max if i_max is not None else 2.0 * ic, points)
    v = n_series * r * np.sqrt(np.clip(i * i - ic * ic, 0.0, None))
    if noise:
        v = v + np.random.default_rng(seed).normal(0.0, noise, v.shape)
    return IVCurve(i, v, n_series)


def extract_ic(iv: IVCurve, v_threshold: float = V_THRESHOLD) -> float:
    """Smallest current at which the array voltage exceeds ``v_threshold`` per
    series junction, interpolated linearly between samples."""
    if not v_threshold > 0:
        raise ValueError("v_threshold must be positive")
    thr = v_threshold * iv.n_series
    v = np.abs(iv.voltage)
    above = np.flatnonzero(v > thr)
    if len(above) == 0:
        raise NoSwitchError(f"voltage never exceeds {thr * 1e6:.3g} uV")
    k = int(above[0])
    if k == 0:
        return float(iv.current[0])
    i0, i1, v0, v1 = iv.current[k - 1], iv.current[k], v[k - 1], v[k]
    return float(i0 + (thr - v0) * (i1 - i0) / (v1 - v0))


def synthesize_vphi(inductance: float, periods: float = 4.0, points_per_period: int = 50, amplitude: float = 20e-6, offset: float = 100e-6, phase: float = 0.3, noise: float = 0.0, seed: int = 0) -> VPhiCurve:
    """Sinusoidal SQUID modulation versus injected current; period Phi0 / L."""
    period = PHI0 / inductance
    n = max(int(round(periods * points_per_period)), 2)
    i = np.linspace(0.0, periods * period, n)
    v = offset + amplitude * np.cos(2 * np.pi * i / period + phase)
    if noise:
        v = v + np.random.default_rng(seed).normal(0.0, noise, v.shape)
    return VPhiCurve(i, v)


def _refine(x: np.ndarray, y: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Vertex of the parabola through each extremum and its neighbours."""
    k = k[(k > 0) & (k < len(y) - 1)]
    y0, y1, y2 = y[k - 1], y[k], y[k + 1]
    den = y0 - 2 * y1 + y2
    shift = np.where(den != 0, 0.5 * (y0 - y2) / np.where(den != 0, den, 1.0), 0.0)
    step = x[k + 1] - x[k]
    return x[k] + shift * step


def modulation_period(vphi: VPhiCurve, min_periods: float = 2.0) -> float:
    """Mean period (A) from the spacing of alternating maxima and minima.

    The curve must span at least ``min_periods`` of that period."""
    v = vphi.voltage
    x = vphi.coil_current
    span = float(np.max(v) - np.min(v))
    if span <= 0:
        raise InsufficientDataError("flat curve has no modulation")
    hi, _ = find_peaks(v, prominence=0.5 * span)
    lo, _ = find_peaks(-v, prominence=0.5 * span)
    ext = np.sort(np.concatenate([_refine(x, v, hi), _refine(x, -v, lo)]))
    if len(ext) < 2:
        raise InsufficientDataError("fewer than two modulation extrema found")
    period = 2.0 * float(ext[-1] - ext[0]) / (len(ext) - 1)
    covered = abs(float(x[-1] - x[0])) / period
    if covered < min_periods:
        raise InsufficientDataError(f"curve covers {covered:.2f} modulation periods; need at least {min_periods:g}")
    return period


def extract_inductance(vphi: VPhiCurve) -> float:
    """L = Phi0 / (modulation period in injected current)."""
    return PHI0 / modulation_period(vphi)


def solve_three_inductances(l_ab: float, l_bc: float, l_ac: float) -> tuple[float, float, float]:
    """Individual inductances from the three pairwise series values of a
    structure with an inside lead: l_ab = L1 + L2, l_bc = L2 + L3, l_ac = L1 + L3."""
    l1 = 0.5 * (l_ab + l_ac - l_bc)
    l2 = 0.5 * (l_ab + l_bc - l_ac)
    l3 = 0.5 * (l_bc + l_ac - l_ab)
    return l1, l2, l3


def read_two_column_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Two numeric columns; a non-numeric first row is taken as a header."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError("empty CSV")
    try:
        [float(c) for c in rows[0][:2]]
    except ValueError:
        rows = rows[1:]
    xs, ys = [], []
    for n, r in enumerate(rows, start=1):
        if len(r) < 2:
            raise ValueError(f"row {n}: expected two columns")
        try:
            xs.append(float(r[0]))
            ys.append(float(r[1]))
        except ValueError:
            raise ValueError(f"row {n}: non-numeric value") from None
    return np.asarray(xs), np.asarray(ys)


def write_two_column_csv(x, y, header=("x", "y")) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for a, b in zip(x, y):
        w.writerow([repr(float(a)), repr(float(b))])
    return buf.getvalue()


def ic_temperature_series(ic_ref: float, temperatures, n_series: int = 10, tc: float = 8.5) -> list[float]:
    """Extracted Ic of a synthetic array at each temperature (Ic follows the Ic(T) law)."""
    out = []
    for t in temperatures:
        ic = ic_ref * float(ic_scale(t, tc))
        out.append(extract_ic(synthesize_iv(ic, n_series)))
    return out


__all__ = [
    "FitError",
    "IVCurve",
    "InsufficientDataError",
    "NoSwitchError",
    "VPhiCurve",
    "extract_ic",
    "extract_inductance",
    "ic_temperature_series",
    "modulation_period",
    "read_two_column_csv",
    "solve_three_inductances",
    "synthesize_iv",
    "synthesize_vphi",
    "write_two_column_csv",
]
