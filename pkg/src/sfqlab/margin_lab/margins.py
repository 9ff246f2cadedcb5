"""Bias-margin search, temperature sweeps and annealing what-ifs.

A bias point passes when its error rate (failing trials / trials) is below
the criterion's maximum. Each trial has its own seed derived from the master
seed, the bias value and the trial index, so results do not depend on the
order or the process in which points are evaluated.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import json
import math

import numpy as np

from ..physics import ic_scale
from ..rng import derive_seed
from .patterns import TestPattern

SCHEMA_VERSION = 1
COARSE_STEP = 0.01
RESOLUTION = 0.0025
DEFAULT_RANGE = (0.5, 2.0)


@dataclass(frozen=True)
class Criterion:
    max_error_rate: float = 0.10
    trials: int = 100
    early_stop: bool = False

    def __post_init__(self):
        if not 0 < self.max_error_rate <= 1:
            raise ValueError("max_error_rate must lie in (0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def passes(self, failures: int) -> bool:
        return failures / self.trials < self.max_error_rate

    @property
    def fail_threshold(self) -> int:
        """Fewest failures out of ``trials`` that fail a point."""
        k = math.ceil(self.max_error_rate * self.trials - 1e-9)
        while k > 0 and not self.passes(k - 1):
            k -= 1
        while self.passes(k):
            k += 1
        return k


@dataclass(frozen=True)
class PointResult:
    beta: float
    failures: int
    trials: int
    missing: int
    extraneous: int

    @property
    def error_rate(self) -> float:
        return self.failures / self.trials


@dataclass(frozen=True)
class MarginReport:
    temperature: float
    criterion: Criterion
    seed: int
    points: tuple[PointResult, ...]  # sorted by beta
    interval: tuple[float, float] | None
    sweep_range: tuple[float, float]
    target: dict = field(default_factory=dict)
    pattern: str = ""

    @property
    def functional(self) -> bool:
        return self.interval is not None

    @property
    def center(self) -> float | None:
        return None if self.interval is None else 0.5 * (self.interval[0] + self.interval[1])

    @property
    def width(self) -> float:
        return 0.0 if self.interval is None else self.interval[1] - self.interval[0]

    @property
    def half_width_pct(self) -> float:
        """Margin as +/- percent of the center."""
        return 0.0 if self.interval is None else 100.0 * self.width / (2.0 * self.center)

    @property
    def bias_grid(self) -> list[float]:
        return [p.beta for p in self.points]

    @property
    def error_rates(self) -> list[float]:
        return [p.error_rate for p in self.points]

    def in_margin(self, beta: float) -> bool:
        return self.interval is not None and self.interval[0] <= beta <= self.interval[1]

    def to_dict(self) -> dict:
        return {
            "schema": "sfqlab.margin_report",
            "schema_version": SCHEMA_VERSION,
            "temperature_K": self.temperature,
            "seed": self.seed,
            "criterion": {"max_error_rate": self.criterion.max_error_rate, "trials": self.criterion.trials, "early_stop": self.criterion.early_stop},
            "pattern": self.pattern,
            "target": self.target,
            "sweep_range": list(self.sweep_range),
            "functional": self.functional,
            "interval": None if self.interval is None else list(self.interval),
            "center": self.center,
            "width": self.width,
            "half_width_pct": self.half_width_pct,
            "points": [
                {
                    "bias_scale": p.beta,
                    "error_rate": p.error_rate,
                    "failures": p.failures,
                    "trials": p.trials,
                    "missing_pulses": p.missing,
                    "extraneous_pulses": p.extraneous,
                    "in_margin": self.in_margin(p.beta),
                }
                for p in self.points
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def csv_rows(self) -> list[list]:
        return [
            [self.temperature, p.beta, p.error_rate, int(self.in_margin(p.beta)), _num(self.center), self.width]
            for p in self.points
        ]

    def to_csv(self) -> str:
        return _csv([CSV_HEADER] + self.csv_rows())


CSV_HEADER = ["temperature_K", "bias_scale", "error_rate", "in_margin", "center", "width"]


def _num(x):
    return "" if x is None else x


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _key(beta: float) -> int:
    return int(round(beta * 1e6))


def trial_seeds(seed: int, beta: float, trials: int) -> list[int]:
    return [derive_seed(seed, _key(beta), k) for k in range(trials)]


EARLY_BLOCK = 10


def evaluate_point(target, pattern: TestPattern, beta: float, temperature: float, criterion: Criterion, seed: int) -> PointResult:
    """Run the criterion's trials at ``beta``.

    With ``early_stop`` the trials run in blocks and stop once the pass/fail
    decision can no longer change; ``trials`` then records how many ran.
    """
    seeds = trial_seeds(seed, beta, criterion.trials)
    if not criterion.early_stop:
        outcomes = target.run_trials(pattern, beta, temperature, seeds)
    else:
        need = criterion.fail_threshold
        outcomes = []
        fails = 0
        for k in range(0, len(seeds), EARLY_BLOCK):
            block = target.run_trials(pattern, beta, temperature, seeds[k : k + EARLY_BLOCK])
            outcomes += block
            fails += sum(not o.passed for o in block)
            if fails >= need or fails + len(seeds) - len(outcomes) < need:
                break
    fails = sum(not o.passed for o in outcomes)
    return PointResult(beta, fails, len(outcomes), sum(o.missing for o in outcomes), sum(o.extraneous for o in outcomes))


def _eval_many(args):
    target, pattern, betas, temperature, criterion, seed = args
    return [evaluate_point(target, pattern, b, temperature, criterion, seed) for b in betas]


class _Evaluator:
    def __init__(self, target, pattern, temperature, criterion, seed, jobs: int = 1, pool=None):
        self.args = (target, pattern, temperature, criterion, seed)
        self.jobs = max(1, int(jobs))
        self.pool = pool
        self.cache: dict[int, PointResult] = {}

    def many(self, betas) -> list[PointResult]:
        todo = sorted({_key(b): b for b in betas if _key(b) not in self.cache}.values())
        if todo:
            target, pattern, temperature, criterion, seed = self.args
            if self.jobs > 1 and len(todo) > 1:
                chunks = [todo[i :: self.jobs] for i in range(self.jobs)]
                work = [(target, pattern, c, temperature, criterion, seed) for c in chunks if c]
                if self.pool is not None:
                    parts = list(self.pool.map(_eval_many, work))
                else:
                    with ProcessPoolExecutor(self.jobs) as ex:
                        parts = list(ex.map(_eval_many, work))
                results = [r for part in parts for r in part]
            else:
                results = _eval_many((target, pattern, todo, temperature, criterion, seed))
            for r in results:
                self.cache[_key(r.beta)] = r
        return [self.cache[_key(b)] for b in betas]

    def one(self, beta: float) -> PointResult:
        return self.many([beta])[0]


def _grid(lo: float, hi: float, step: float) -> list[float]:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + k * step, 10) for k in range(n + 1)]


def _runs(passing: list[bool]) -> list[tuple[int, int]]:
    runs, start = [], None
    for i, ok in enumerate(passing + [False]):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            runs.append((start, i - 1))
            start = None
    return runs


def _bisect(ev: _Evaluator, inside: float, outside: float, criterion: Criterion, resolution: float) -> float:
    """Edge between a passing and a failing bias; ties go to the passing side."""
    while abs(outside - inside) > resolution:
        mid = round(0.5 * (inside + outside), 10)
        if criterion.passes(ev.one(mid).failures):
            inside = mid
        else:
            outside = mid
    return inside


def find_margins(
    target,
    pattern: TestPattern,
    temperature: float,
    criterion: Criterion | None = None,
    seed: int = 0,
    sweep_range: tuple[float, float] = DEFAULT_RANGE,
    step: float = COARSE_STEP,
    resolution: float = RESOLUTION,
    jobs: int = 1,
    pool=None,
) -> MarginReport:
    """Bias margin of ``target`` under ``pattern`` at ``temperature``.

    Coarse sweep in ``step`` increments over ``sweep_range``, then bisection
    of both edges to ``resolution``. The interval is the passing run that
    contains beta = 1, else the widest passing run (lowest first on ties),
    else None (non-functional).
    """
    criterion = criterion or Criterion()
    pattern.check_ports(target.ports)
    lo, hi = sweep_range
    if not 0 < lo < hi:
        raise ValueError("sweep_range must satisfy 0 < lo < hi")
    ev = _Evaluator(target, pattern, temperature, criterion, seed, jobs, pool)
    grid = _grid(lo, hi, step)
    coarse = ev.many(grid)
    passing = [criterion.passes(p.failures) for p in coarse]
    runs = _runs(passing)
    interval = None
    if runs:
        chosen = [r for r in runs if grid[r[0]] <= 1.0 <= grid[r[1]]]
        if not chosen:
            width = max(grid[b] - grid[a] for a, b in runs)
            chosen = [r for r in runs if grid[r[1]] - grid[r[0]] == width]
        a, b = chosen[0]
        lo_edge = grid[a] if a == 0 else _bisect(ev, grid[a], grid[a - 1], criterion, resolution)
        hi_edge = grid[b] if b == len(grid) - 1 else _bisect(ev, grid[b], grid[b + 1], criterion, resolution)
        interval = (lo_edge, hi_edge)
    points = tuple(sorted(ev.cache.values(), key=lambda p: p.beta))
    return MarginReport(
        temperature=temperature,
        criterion=criterion,
        seed=seed,
        points=points,
        interval=interval,
        sweep_range=(lo, hi),
        target=target.describe(),
        pattern=pattern.name,
    )


def adr_grid(tmin: float = 0.1, tmax: float = 4.2, tstep: float = 0.1) -> list[float]:
    n = int(round((tmax - tmin) / tstep))
    return [round(tmin + k * tstep, 10) for k in range(n + 1)]


def normalize_series(values) -> list[float]:
    """Divide by the maximum so the largest value becomes 1."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise ValueError("empty series")
    m = float(np.max(v))
    if not m > 0:
        raise ValueError("series has no positive value")
    return [float(x) for x in v / m]


@dataclass(frozen=True)
class SweepSeries:
    temperatures: tuple[float, ...]
    reports: tuple[MarginReport, ...]

    @property
    def centers(self) -> list[float | None]:
        return [r.center for r in self.reports]

    @property
    def widths(self) -> list[float]:
        return [r.width for r in self.reports]

    @property
    def normalized_centers(self) -> list[float | None]:
        vals = [c for c in self.centers if c is not None]
        if not vals:
            return [None] * len(self.reports)
        m = max(vals)
        return [None if c is None else c / m for c in self.centers]

    def center_ratio(self, t_cold: float, t_warm: float) -> float | None:
        c = dict(zip(self.temperatures, self.centers))
        if c.get(t_cold) is None or c.get(t_warm) is None:
            return None
        return c[t_cold] / c[t_warm]

    def to_dict(self) -> dict:
        return {
            "schema": "sfqlab.sweep_series",
            "schema_version": SCHEMA_VERSION,
            "temperatures_K": list(self.temperatures),
            "center": self.centers,
            "normalized_center": self.normalized_centers,
            "width": self.widths,
            "half_width_pct": [r.half_width_pct for r in self.reports],
            "reports": [r.to_dict() for r in self.reports],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def summary_csv(self) -> str:
        """One row per temperature."""
        rows = [["temperature_K", "center", "normalized_center", "width", "half_width_pct", "lo", "hi"]]
        for t, r, nc in zip(self.temperatures, self.reports, self.normalized_centers):
            lo, hi = r.interval if r.interval else ("", "")
            rows.append([t, _num(r.center), _num(nc), r.width, r.half_width_pct, lo, hi])
        return _csv(rows)

    def to_csv(self) -> str:
        """Every evaluated point of every temperature."""
        rows = [CSV_HEADER]
        for r in self.reports:
            rows += r.csv_rows()
        return _csv(rows)


def sweep_temperature(
    target,
    pattern: TestPattern,
    t_list=None,
    criterion: Criterion | None = None,
    seed: int = 0,
    jobs: int = 1,
    **kw,
) -> SweepSeries:
    t_list = list(adr_grid() if t_list is None else t_list)
    if not t_list:
        raise ValueError("t_list must be non-empty")
    if any(b <= a for a, b in zip(t_list, t_list[1:])):
        raise ValueError("t_list must be ascending")
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            reports = [find_margins(target, pattern, t, criterion, seed, jobs=jobs, pool=pool, **kw) for t in t_list]
    else:
        reports = [find_margins(target, pattern, t, criterion, seed, **kw) for t in t_list]
    return SweepSeries(tuple(t_list), tuple(reports))


@dataclass(frozen=True)
class AnnealResult:
    factor: float
    before: MarginReport
    after: MarginReport

    def to_dict(self) -> dict:
        return {
            "schema": "sfqlab.anneal_whatif",
            "schema_version": SCHEMA_VERSION,
            "factor": self.factor,
            "before": self.before.to_dict(),
            "after": self.after.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def anneal_whatif(target, factor: float, pattern: TestPattern, temperature: float, criterion: Criterion | None = None, seed: int = 0, **kw) -> AnnealResult:
    """Margins before and after scaling every junction Ic by ``factor``."""
    if not 0 < factor <= 1:
        raise ValueError("anneal factor must lie in (0, 1]")
    before = find_margins(target, pattern, temperature, criterion, seed, **kw)
    after = find_margins(target.annealed(factor), pattern, temperature, criterion, seed, **kw)
    return AnnealResult(factor, before, after)


def cancelling_anneal_factor(temperature: float, tc: float = 8.5) -> float:
    """The factor 1/r(T) that returns every Ic to its 4.2 K value."""
    return 1.0 / float(ic_scale(temperature, tc))
