"""Static checks on flattened circuits. Findings are diagnostics, never exceptions."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from ..constants import PROCESS_MIN_IC
from .flatten import FlatCircuit

DANGLING_NODE = "dangling-node"
LOW_IC = "below-process-floor"
FLOATING_BIAS = "floating-bias"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    subject: str
    message: str
    severity: str = "warning"

    def __str__(self):
        return f"{self.severity}: {self.code}: {self.message}"


def _terminal_counts(fc: FlatCircuit) -> Counter:
    counts: Counter = Counter()
    for group in (fc.junctions, fc.inductors, fc.resistors, fc.capacitors, fc.sources):
        for el in group:
            counts[el.a] += 1
            counts[el.b] += 1
    return counts


def validate(fc: FlatCircuit, ic_floor: float = PROCESS_MIN_IC) -> list[Diagnostic]:
    """Dangling nodes, junctions below the process Ic floor, floating bias sources."""
    out: list[Diagnostic] = []
    counts = _terminal_counts(fc)
    ports = {ref.node for ref in fc.port_map.values()}
    for i, name in enumerate(fc.nodes[1:], start=1):
        if counts[i] < 2 and i not in ports:
            out.append(Diagnostic(DANGLING_NODE, name, f"node {name!r} touches {counts[i]} element terminal(s)", "error"))
    for j in fc.junctions:
        if j.params.ic_ref < ic_floor * (1 - 1e-9):
            out.append(
                Diagnostic(
                    LOW_IC,
                    j.name,
                    f"junction {j.name!r} has Ic {j.params.ic_ref * 1e6:.3g} uA, below the {ic_floor * 1e6:.3g} uA process floor",
                )
            )
    # a bias source must feed a node that something else also touches,
    # and must return through ground
    for k in fc.bias_sources:
        s = fc.sources[k]
        if 0 not in (s.a, s.b):
            out.append(Diagnostic(FLOATING_BIAS, s.name, f"bias source {s.name!r} has no ground return", "error"))
            continue
        live = s.b if s.a == 0 else s.a
        if live == 0 or counts[live] < 2:
            out.append(Diagnostic(FLOATING_BIAS, s.name, f"bias source {s.name!r} drives nothing", "error"))
    return out
