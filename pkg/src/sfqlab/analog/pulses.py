"""SFQ pulse events: the PulseTrain container and detection from phase traces."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
import io
import math
from typing import Iterable, Mapping

import numpy as np

from ..constants import PHI0
from .solver import TransientResult


@dataclass(frozen=True)
class PulseTrain:
    """Port name -> strictly increasing event times (s)."""

    events: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for port, times in self.events.items():
            t = tuple(float(x) for x in times)
            if any(b <= a for a, b in zip(t, t[1:])):
                raise ValueError(f"event times for {port!r} are not strictly increasing")
            clean[port] = t
        object.__setattr__(self, "events", clean)

    @classmethod
    def from_unsorted(cls, events: Mapping[str, Iterable[float]]) -> "PulseTrain":
        return cls({p: tuple(sorted(ts)) for p, ts in events.items()})

    @property
    def ports(self) -> tuple[str, ...]:
        return tuple(self.events)

    def __getitem__(self, port: str) -> tuple[float, ...]:
        return self.events.get(port, ())

    def count(self, port: str) -> int:
        return len(self.events.get(port, ()))

    def counts(self) -> dict[str, int]:
        return {p: len(t) for p, t in self.events.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["port", "time"])
        rows = sorted((t, p) for p, ts in self.events.items() for t in ts)
        for t, p in rows:
            w.writerow([p, repr(t)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PulseTrain":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip().lower() for c in rows[0]] != ["port", "time"]:
            raise ValueError("pulse CSV must start with a 'port,time' header")
        events: dict[str, list[float]] = {}
        for i, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"line {i}: expected port,time")
            events.setdefault(row[0].strip(), []).append(float(row[1]))
        return cls.from_unsorted(events)


def _crossings(phase: np.ndarray, time: np.ndarray) -> list[float]:
    """Times of new upward crossings of pi + 2 pi k, linearly interpolated."""
    level = np.floor((phase - math.pi) / (2 * math.pi))
    best = level[0]
    out = []
    for i in np.flatnonzero(np.diff(level) > 0) + 1:
        while level[i] > best:
            best += 1
            target = math.pi + 2 * math.pi * best
            p0, p1 = phase[i - 1], phase[i]
            f = (target - p0) / (p1 - p0) if p1 != p0 else 1.0
            out.append(float(time[i - 1] + min(max(f, 0.0), 1.0) * (time[i] - time[i - 1])))
    return out


def detect_pulses(tr: TransientResult, ports: Iterable[str] | Mapping[str, str | int] | None = None) -> PulseTrain:
    """One event per 2 pi phase advance of each port's readout junction.

    ``ports`` may name declared circuit ports, junctions, or map port names to
    junctions; by default every port with a readout junction is reported.
    """
    if ports is None:
        refs = dict(tr.port_junctions)
    elif isinstance(ports, Mapping):
        refs = {p: tr.junction(j) for p, j in ports.items()}
    else:
        refs = {}
        for p in ports:
            if p in tr.port_junctions:
                refs[p] = tr.port_junctions[p]
            else:
                try:
                    refs[p] = tr.junction(p)
                except KeyError:
                    raise KeyError(f"unknown port {p!r}") from None
    events = {}
    for p, k in refs.items():
        times = _crossings(tr.phases[:, k], tr.time)
        # interpolation can tie two crossings inside one step
        uniq = []
        for t in times:
            uniq.append(t if not uniq or t > uniq[-1] else np.nextafter(uniq[-1], np.inf))
        events[p] = tuple(uniq)
    return PulseTrain(events)


def flux_between(tr: TransientResult, junction: str | int, t0: float, t1: float) -> float:
    """Integral of the junction voltage over [t0, t1] (Wb)."""
    k = tr.junction(junction)
    t = tr.time
    mask = (t >= t0) & (t <= t1)
    if mask.sum() < 2:
        return 0.0
    return float(np.trapezoid(tr.junction_volts[mask, k], t[mask]))


def pulse_area_check(tr: TransientResult, junction: str | int, start: int = 0, slips: int = 1) -> float:
    """Voltage integral over ``slips`` consecutive slips beginning with slip ``start``.

    The window runs from halfway between the previous slip (or the trace
    start) and the first included slip, to halfway between the last included
    slip and the next one (or the trace end).
    """
    k = tr.junction(junction)
    times = _crossings(tr.phases[:, k], tr.time)
    if not times:
        raise ValueError(f"junction {tr.junction_names[k]!r} has no slips")
    if start < 0 or slips < 1 or start + slips > len(times):
        raise ValueError(f"slip range [{start}, {start + slips}) outside the {len(times)} recorded slips")
    first, last = times[start], times[start + slips - 1]
    t0 = 0.5 * (times[start - 1] + first) if start > 0 else float(tr.time[0])
    nxt = start + slips
    t1 = 0.5 * (last + times[nxt]) if nxt < len(times) else float(tr.time[-1])
    return flux_between(tr, k, t0, t1)


def flux_quanta(flux: float) -> float:
    return flux / PHI0
