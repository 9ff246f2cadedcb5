"""Behavioral windows of library cells, measured by analog simulation.

Each cell kind has a small bench: converters and buffer stages drive the cell
under test, receivers count its outputs. Only the cell under test has its
bias scaled by beta; the bench cells stay at nominal bias. The window is the
contiguous beta range around 1 where every readout junction records exactly
the expected number of slips. Measuring it again with all Ic scaled by r
(by lowering the temperature) gives the edge shift coefficients kappa.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import math

import numpy as np

from ..netlist.builders import DRIVE_FLUX, PICKUPS, toggle_waveform
from ..netlist.flatten import FlatCircuit, flatten
from ..netlist.grammar import CURRENT_SOURCE, INSTANCE, Element, Netlist
from ..netlist.library import CellLibrary, CellSpec, default_library
from ..physics import escape_barrier_over_kt, ic_scale
from .solver import SolverConfig, SolverError, transient

T_REF = 4.2
T_COLD = 0.1
SPACING = 200e-12
SPAN = (0.1, 2.0)


@dataclass(frozen=True)
class Bench:
    kind: str
    instances: tuple[tuple[str, str, tuple[str, ...]], ...]  # (name, subckt, nodes)
    drives: dict[str, tuple[float, ...]]  # converter input node -> toggle times (s)
    expected: dict[str, int]  # junction -> slip count
    delay_from: str  # junction whose slip starts the delay measurement
    t_stop: float
    delay_slip: int = 0  # which slip of delay_from causes the first output

    def netlist(self, lib: CellLibrary) -> Netlist:
        n = Netlist(title=f"{self.kind} calibration bench", subckt_defs=lib.netlist.subckt_defs, model_defs=lib.netlist.model_defs)
        for name, sub, nodes in self.instances:
            n.elements.append(Element(INSTANCE, name, nodes, subckt=sub))
        amp = DRIVE_FLUX / PICKUPS["sd1"]
        for node, times in self.drives.items():
            n.elements.append(Element(CURRENT_SOURCE, f"i{node}", ("0", node), waveform=toggle_waveform(times, amp)))
        return n


def _times(*idx: int) -> tuple[float, ...]:
    return tuple(50e-12 + SPACING * i for i in idx)


def _stop(n_slots: int) -> float:
    return 50e-12 + SPACING * n_slots + 100e-12


def bench(kind: str, lib: CellLibrary | None = None) -> Bench:
    lib = lib or default_library()
    ro = lib.readouts
    dut = f"xdut.{ro[kind]}"
    sink = f"xr.{ro['sfqdc']}"

    def chain_bench(n_in: int, n_out: int) -> Bench:
        inst = (("xd", "dcsfq", ("a", "a1")), ("xb", "jtl", ("a1", "a2")), ("xdut", kind, ("a2", "b1")))
        inst += (("xo", "jtl", ("b1", "b2")), ("xr", "sfqdc", ("b2",)))
        return Bench(kind, inst, {"a": _times(*range(n_in))}, {dut: n_out, sink: n_out}, "xb.b2", _stop(n_in))

    if kind == "jtl":
        return chain_bench(3, 3)
    if kind == "tff":
        return replace(chain_bench(7, 3), delay_slip=1)
    if kind == "dcsfq":
        inst = (("xdut", "dcsfq", ("a", "a1")), ("xo", "jtl", ("a1", "a2")), ("xr", "sfqdc", ("a2",)))
        return Bench(kind, inst, {"a": _times(0, 1, 2)}, {dut: 3, sink: 3}, "xdut.b1", _stop(3))
    if kind == "sfqdc":
        inst = (("xd", "dcsfq", ("a", "a1")), ("xb", "jtl", ("a1", "a2")), ("xdut", "sfqdc", ("a2",)))
        return Bench(kind, inst, {"a": _times(0, 1, 2)}, {dut: 3}, "xb.b2", _stop(3))
    if kind == "split":
        inst = (("xd", "dcsfq", ("a", "a1")), ("xb", "jtl", ("a1", "a2")), ("xdut", "split", ("a2", "b1", "c1")))
        inst += (("xo", "jtl", ("b1", "b2")), ("xr", "sfqdc", ("b2",)), ("xo2", "jtl", ("c1", "c2")), ("xr2", "sfqdc", ("c2",)))
        exp = {dut: 3, sink: 3, f"xr2.{ro['sfqdc']}": 3}
        return Bench(kind, inst, {"a": _times(0, 1, 2)}, exp, "xb.b2", _stop(3))
    if kind == "merge":
        inst = (("xd", "dcsfq", ("a", "a1")), ("xb", "jtl", ("a1", "a2")))
        inst += (("xd2", "dcsfq", ("c", "c1")), ("xb2", "jtl", ("c1", "c2")))
        inst += (("xdut", "merge", ("a2", "c2", "b1")), ("xo", "jtl", ("b1", "b2")), ("xr", "sfqdc", ("b2",)))
        drives = {"a": _times(0, 2, 4), "c": _times(1, 3)}
        return Bench(kind, inst, drives, {dut: 5, sink: 5}, "xb.b2", _stop(5))
    if kind == "dff":
        # data, clock (out), clock (empty), data, data (stored twice), clock (out)
        inst = (("xd", "dcsfq", ("a", "a1")), ("xb", "jtl", ("a1", "a2")))
        inst += (("xd2", "dcsfq", ("c", "c1")), ("xb2", "jtl", ("c1", "c2")))
        inst += (("xdut", "dff", ("a2", "c2", "b1")), ("xo", "jtl", ("b1", "b2")), ("xr", "sfqdc", ("b2",)))
        drives = {"a": _times(0, 3, 4), "c": _times(1, 2, 5)}
        return Bench(kind, inst, drives, {dut: 2, sink: 2}, "xb2.b2", _stop(6))
    if kind == "ndro":
        # set, read, read, reset, read, set, set, read, read -> four outputs
        inst = tuple(
            x
            for port, node in (("s", "s"), ("r", "r"), ("t", "t"))
            for x in ((f"xd{port}", "dcsfq", (node, f"{node}1")), (f"xb{port}", "jtl", (f"{node}1", f"{node}2")))
        )
        inst += (("xdut", "ndro", ("s2", "r2", "t2", "b1")), ("xo", "jtl", ("b1", "b2")), ("xr", "sfqdc", ("b2",)))
        drives = {"s": _times(0, 5, 6), "r": _times(3), "t": _times(1, 2, 4, 7, 8)}
        return Bench(kind, inst, drives, {dut: 4, sink: 4}, "xbt.b2", _stop(9))
    raise KeyError(f"no calibration bench for {kind!r}")


def _converter(source_name: str) -> bool:
    return source_name.startswith(("xd", "xr")) and not source_name.startswith("xdut.")


def _scale_bench_bias(fc: FlatCircuit, beta: float) -> FlatCircuit:
    """Undo the global bias scale on the bench converters."""
    sources = tuple(
        replace(s, waveform=s.waveform.scaled(1.0 / beta)) if s.is_bias and _converter(s.name) else s
        for s in fc.sources
    )
    return replace(fc, sources=sources)


def run_bench(b: Bench, beta: float, temperature: float = T_REF, lib: CellLibrary | None = None, dt: float = 0.1e-12):
    lib = lib or default_library()
    fc = _scale_bench_bias(flatten(b.netlist(lib), lib), beta)
    cfg = SolverConfig(t_stop=b.t_stop, dt=dt, bias_scale=beta, temperature=temperature)
    return transient(fc, cfg)


def passes(b: Bench, beta: float, temperature: float = T_REF, lib: CellLibrary | None = None) -> bool:
    try:
        tr = run_bench(b, beta, temperature, lib)
    except SolverError:
        return False
    final = dict(zip(tr.junction_names, tr.final_slips))
    return all(int(final[j]) == n for j, n in b.expected.items())


def _edge(b, inside: float, outside: float, temperature, lib, resolution: float) -> float:
    """Bisect between a passing and a failing beta; returns the last passing value."""
    while abs(outside - inside) > resolution:
        mid = 0.5 * (inside + outside)
        if passes(b, mid, temperature, lib):
            inside = mid
        else:
            outside = mid
    return inside


def measure_window(
    kind: str,
    temperature: float = T_REF,
    lib: CellLibrary | None = None,
    step: float = 0.02,
    resolution: float = 0.0025,
    span: tuple[float, float] = SPAN,
    center: float | None = None,
) -> tuple[float, float]:
    """Contiguous passing beta interval around ``center`` (default: Ic scale at ``temperature``)."""
    lib = lib or default_library()
    b = bench(kind, lib)
    c = center if center is not None else ic_scale(temperature, 8.5, T_REF)
    if not passes(b, c, temperature, lib):
        c = 1.0
        if not passes(b, c, temperature, lib):
            raise RuntimeError(f"{kind}: bench fails at nominal bias")
    edges = []
    for direction, limit in ((-1, span[0]), (1, span[1])):
        inside = c
        while True:
            trial = inside + direction * step
            if (direction < 0 and trial < limit) or (direction > 0 and trial > limit):
                edges.append(limit)
                break
            if passes(b, trial, temperature, lib):
                inside = trial
            else:
                edges.append(_edge(b, inside, trial, temperature, lib, resolution))
                break
    return edges[0], edges[1]


def measure_delay(kind: str, lib: CellLibrary | None = None) -> float:
    lib = lib or default_library()
    b = bench(kind, lib)
    tr = run_bench(b, 1.0, T_REF, lib)
    dut = next(j for j in b.expected if j.startswith("xdut."))

    def slip_time(name, n=0):
        s = tr.slips[:, tr.junction(name)]
        idx = np.flatnonzero(np.diff(s) > 0)
        return tr.time[idx[n] + 1] if len(idx) > n else math.nan

    if kind == "dcsfq":
        start = tr.time[int(np.searchsorted(tr.time, 50e-12))]
    else:
        start = slip_time(b.delay_from, b.delay_slip)
    return float(slip_time(dut) - start)


def measure_escape_junction(kind: str, lib: CellLibrary | None = None) -> tuple[float, float]:
    """(|sin phi|, 4.2 K Ic) of the cell junction with the lowest escape barrier at beta = 1."""
    lib = lib or default_library()
    b = bench(kind, lib)
    quiet = replace(b, drives={}, t_stop=40e-12)
    fc = _scale_bench_bias(flatten(quiet.netlist(lib), lib), 1.0)
    tr = transient(fc, SolverConfig(t_stop=quiet.t_stop, temperature=T_REF))
    best = None
    for k, name in enumerate(tr.junction_names):
        if not name.startswith("xdut."):
            continue
        i = min(abs(math.sin(tr.phases[-1, k])), 1.0)
        ic = fc.junctions[k].params.ic_ref
        barrier = float(escape_barrier_over_kt(i, ic, T_REF))
        if best is None or barrier < best[0]:
            best = (barrier, i, ic)
    return best[1], best[2]


def calibrate(kinds=None, lib: CellLibrary | None = None, t_cold: float = T_COLD, progress=None) -> dict[str, CellSpec]:
    """Measure window, kappa and delay for each kind."""
    lib = lib or default_library()
    r = ic_scale(t_cold, 8.5, T_REF)
    out = {}
    for kind in kinds or lib.kinds:
        w_ref = measure_window(kind, T_REF, lib)
        w_cold = measure_window(kind, t_cold, lib)
        # an edge pinned at the sweep limit was never reached; it carries no shift information
        kappa = tuple(
            0.0 if w in SPAN or c in SPAN else (c - r * w) / (r - 1) for c, w in zip(w_cold, w_ref)
        )
        delay = measure_delay(kind, lib)
        i_nom, escape_ic = measure_escape_junction(kind, lib)
        out[kind] = CellSpec(
            kind=kind, delay=max(delay, 1e-12), window=w_ref, kappa=kappa, i_nom=round(i_nom, 3), escape_ic=escape_ic
        )
        if progress:
            progress(kind, w_ref, w_cold, delay)
    return out


def recalibrate_library(path=None, kinds=None, progress=None) -> str:
    """Calibrate every annotated cell and rewrite the library's ``.behav`` lines."""
    from ..netlist.library import library_path, load_library

    path = path or library_path()
    with open(path) as fh:
        lib = load_library(fh.read())
    specs = calibrate(kinds or tuple(k for k in lib.kinds if k in lib.readouts), lib, progress=progress)
    text = lib.with_specs(specs).text_with_specs()
    with open(path, "w") as fh:
        fh.write(text)
    return text


if __name__ == "__main__":
    recalibrate_library(progress=lambda k, w, c, d: print(k, w, c, f"{d * 1e12:.1f}ps", flush=True))
