"""Bias-margin protocol harness, test patterns and process-monitor fitters."""

from .margins import (
    AnnealResult,
    Criterion,
    MarginReport,
    PointResult,
    SweepSeries,
    adr_grid,
    anneal_whatif,
    cancelling_anneal_factor,
    find_margins,
    normalize_series,
    sweep_temperature,
)
from .patterns import Expect, Outcome, TestPattern, dmx_rotation_pattern, null_pattern, pattern_for, pc_pattern
from .pcm import IVCurve, VPhiCurve, extract_ic, extract_inductance, synthesize_iv, synthesize_vphi
from .targets import AnalogTarget, BehavioralTarget, SyntheticTarget

__all__ = [
    "AnalogTarget",
    "AnnealResult",
    "BehavioralTarget",
    "Criterion",
    "Expect",
    "IVCurve",
    "MarginReport",
    "Outcome",
    "SyntheticTarget",
    "PointResult",
    "SweepSeries",
    "TestPattern",
    "VPhiCurve",
    "adr_grid",
    "anneal_whatif",
    "cancelling_anneal_factor",
    "dmx_rotation_pattern",
    "extract_ic",
    "extract_inductance",
    "find_margins",
    "normalize_series",
    "null_pattern",
    "pattern_for",
    "pc_pattern",
    "sweep_temperature",
    "synthesize_iv",
    "synthesize_vphi",
]
