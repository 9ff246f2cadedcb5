"""Generators for the test circuits, wired from library cells.

Every generated netlist declares its external ports with ``.port``. Input
ports sit on a DCSFQ input node (an analog run drives them with current
pulses, see :func:`attach_stimulus`); output ports sit on the input node of an
SFQDC and name its readout junction, so analog pulse detection and the
behavioral simulator observe the same event.
"""

from __future__ import annotations

from .grammar import CURRENT_SOURCE, INSTANCE, Directive, Element, Netlist, Waveform
from .library import CellLibrary, default_library

PICKUPS = {"sd1": 50e-12, "sd2": 80e-12}
# pickup flux per input pulse; 100 uA through the 50 pH sd1 coil
DRIVE_FLUX = 5e-15
TOGGLE_RISE = 10e-12
TOGGLE_WIDTH = 50e-12

CIRCUIT_KINDS = ("sd_chain", "divider4", "d2f", "ndro_switch", "dmx", "prog_counter")


class CircuitParamError(ValueError):
    pass


class _Wiring:
    def __init__(self, title: str, lib: CellLibrary):
        self.lib = lib
        self.n = Netlist(title=title)
        self._net = 0
        self.counts: dict[str, int] = {}

    def net(self, hint: str = "n") -> str:
        self._net += 1
        return f"{hint}{self._net}"

    def cell(self, kind: str, *nodes: str, name: str | None = None, **params) -> str:
        idx = self.counts.get(kind, 0) + 1
        self.counts[kind] = idx
        name = name or f"x{kind}{idx}"
        self.n.elements.append(Element(INSTANCE, name, tuple(nodes), subckt=kind, params=dict(params)))
        return name

    def input(self, port: str, pickup: float = PICKUPS["sd1"]) -> str:
        """DCSFQ converter fed from external port ``port``; returns its SFQ output net."""
        out = self.net()
        self.cell("dcsfq", port, out, name=f"xin_{port}", lpick=pickup)
        self.n.directives.append(Directive("port", (port, port)))
        return out

    def output(self, port: str, node: str):
        inst = self.cell("sfqdc", node, name=f"xout_{port}")
        readout = self.lib.readouts["sfqdc"]
        self.n.directives.append(Directive("port", (port, node), {"junction": f"{inst}.{readout}"}))

    def fanout(self, src: str, count: int, hint: str) -> list[str]:
        """Binary SPLIT tree from ``src`` to ``count`` nets."""
        if count == 1:
            return [src]
        a, b = self.net(hint), self.net(hint)
        self.cell("split", src, a, b)
        left = (count + 1) // 2
        return self.fanout(a, left, hint) + self.fanout(b, count - left, hint)


def _shift_register(w: _Wiring, n: int, data: str, clock: str) -> list[tuple[str, str, str]]:
    """Serial-in parallel-out register of DFF stages mirrored by NDROs.

    Each clock resets every NDRO and shifts the DFF chain; a DFF emitting on
    the clock sets the NDRO of its stage and passes the bit to the next DFF,
    so after a clock NDRO k holds the bit that DFF k released. Returns
    (ndro name, set net, reset net) per stage, stage 1 first; the caller
    places the NDROs with their read and output nets.
    """
    clocks = w.fanout(clock, 2 * n, "clk")
    ndros = []
    d = data
    for k in range(1, n + 1):
        q = w.net("q")
        w.cell("dff", d, clocks[2 * k - 2], q, name=f"xsr_dff{k}")
        if k < n:
            nxt, s = w.net("d"), w.net("s")
            w.cell("split", q, nxt, s)
            d = nxt
        else:
            s = q
        ndros.append((f"xsr_ndro{k}", s, clocks[2 * k - 1]))
    return ndros


def build_circuit(kind: str, lib: CellLibrary | None = None, **params) -> Netlist:
    """Return the netlist for circuit ``kind``.

    kinds and parameters:
      sd_chain(stages=1, pickup="sd1")   DCSFQ -> JTL x stages -> SFQDC
      divider4()                          DCSFQ -> JTL -> TFF -> TFF -> SFQDC
      d2f()                               data/clock DCSFQs -> DFF -> SPLIT -> two SFQDCs
      ndro_switch()                       set/reset/input DCSFQs, NDRO gate, SFQDC monitors
      dmx(n_out=4)                        NDRO shift register routing input to out1..outN
      prog_counter(n_bits=8)              NDRO shift register preloading a TFF chain
    """
    lib = lib or default_library()
    fn = _BUILDERS.get(kind)
    if fn is None:
        raise CircuitParamError(f"unknown circuit kind {kind!r}; expected one of {', '.join(CIRCUIT_KINDS)}")
    return fn(lib, **params)


def _sd_chain(lib, stages: int = 1, pickup: str | float = "sd1") -> Netlist:
    if not isinstance(stages, int) or stages < 1:
        raise CircuitParamError("sd_chain needs stages >= 1")
    lp = PICKUPS.get(pickup, pickup) if isinstance(pickup, str) else float(pickup)
    if isinstance(lp, str) or not lp > 0:
        raise CircuitParamError(f"unknown pickup {pickup!r}")
    w = _Wiring(f"sd_chain stages={stages} pickup={pickup}", lib)
    node = w.input("input", lp)
    for _ in range(stages):
        nxt = w.net()
        w.cell("jtl", node, nxt)
        node = nxt
    w.output("out", node)
    return w.n


def _divider4(lib) -> Netlist:
    w = _Wiring("divider4", lib)
    a = w.input("input")
    b, c, d = w.net(), w.net(), w.net()
    w.cell("jtl", a, b)
    w.cell("tff", b, c)
    w.cell("tff", c, d)
    w.output("out", d)
    return w.n


def _d2f(lib) -> Netlist:
    w = _Wiring("d2f", lib)
    d = w.input("data")
    c = w.input("clock")
    q, qa, qb = w.net(), w.net(), w.net()
    w.cell("dff", d, c, q)
    w.cell("split", q, qa, qb)
    w.output("out1", qa)
    w.output("out2", qb)
    return w.n


def _ndro_switch(lib) -> Netlist:
    w = _Wiring("ndro_switch", lib)
    s0 = w.input("set")
    r0 = w.input("reset")
    i0 = w.input("input")
    s1, r1, ia, ib, q = w.net(), w.net(), w.net(), w.net(), w.net()
    w.cell("jtl", s0, s1)
    w.cell("jtl", r0, r1)
    w.cell("split", i0, ia, ib)
    w.cell("ndro", s1, r1, ia, q)
    w.output("out", q)
    w.output("through", ib)
    return w.n


def _dmx(lib, n_out: int = 4) -> Netlist:
    if not isinstance(n_out, int) or n_out < 2:
        raise CircuitParamError("dmx needs n_out >= 2")
    w = _Wiring(f"dmx n_out={n_out}", lib)
    data = w.input("serial_data")
    clock = w.input("serial_clock")
    inp = w.input("input")
    stages = _shift_register(w, n_out, data, clock)
    reads = w.fanout(inp, n_out, "rd")
    for k, ((name, s, rst), rd) in enumerate(zip(stages, reads), start=1):
        q = w.net("o")
        w.cell("ndro", s, rst, rd, q, name=name)
        w.output(f"out{k}", q)
    return w.n


def _prog_counter(lib, n_bits: int = 8) -> Netlist:
    if not isinstance(n_bits, int) or not 1 <= n_bits <= 16:
        raise CircuitParamError("prog_counter needs 1 <= n_bits <= 16")
    w = _Wiring(f"prog_counter n_bits={n_bits}", lib)
    data = w.input("serial_data")
    clock = w.input("serial_clock")
    load = w.input("load")
    clk_in = w.input("clock_in")
    stages = _shift_register(w, n_bits, data, clock)
    loads = w.fanout(load, n_bits + 1, "ld")
    gate_read, carry = w.net("g"), w.net("c")
    w.cell("split", clk_in, gate_read, carry)
    for k, ((name, s, rst), ld) in enumerate(zip(stages, loads), start=1):
        pre, t_in, t_out = w.net("p"), w.net("t"), w.net("c")
        w.cell("ndro", s, rst, ld, pre, name=name)
        w.cell("merge", pre, carry, t_in)
        w.cell("tff", t_in, t_out, name=f"xcnt_tff{k}")
        carry = t_out
    stop_gate, stop_out, gate_out = w.net("st"), w.net("st"), w.net("o")
    w.cell("split", carry, stop_gate, stop_out)
    w.cell("ndro", loads[-1], stop_gate, gate_read, gate_out, name="xgate")
    w.output("out", gate_out)
    w.output("stop", stop_out)
    return w.n


_BUILDERS = {
    "sd_chain": _sd_chain,
    "divider4": _divider4,
    "d2f": _d2f,
    "ndro_switch": _ndro_switch,
    "dmx": _dmx,
    "prog_counter": _prog_counter,
}


def toggle_waveform(times, amplitude: float, rise: float = TOGGLE_RISE, width: float = TOGGLE_WIDTH) -> Waveform:
    """Current pulse per input toggle: the rising edge launches the SFQ pulse,
    the falling edge resets the converter's pickup loop."""
    pts = [0.0, 0.0]
    for t in sorted(times):
        pts += [t, 0.0, t + rise, amplitude, t + rise + width, amplitude, t + 2 * rise + width, 0.0]
    return Waveform("pwl", tuple(pts))


def attach_stimulus(n: Netlist, stimuli: dict, lib: CellLibrary | None = None) -> Netlist:
    """Copy of ``n`` with a pulse source on each driven input port.

    The drive amplitude follows each converter's pickup inductance so that
    every input couples the same flux.
    """
    lib = lib or default_library()
    ports = n.port_decls
    out = Netlist(
        title=n.title,
        elements=list(n.elements),
        subckt_defs=n.subckt_defs,
        model_defs=n.model_defs,
        directives=list(n.directives),
    )
    pickups = {}
    default_lp = lib.subckt("dcsfq").params.get("lpick", PICKUPS["sd1"])
    for el in n.elements:
        if el.kind == INSTANCE and el.subckt == "dcsfq":
            pickups[el.nodes[0]] = float(el.params.get("lpick", default_lp))
    for port, times in stimuli.items():
        if port not in ports:
            raise KeyError(f"unknown port {port!r}")
        node = ports[port].args[1]
        if node not in pickups:
            raise KeyError(f"port {port!r} is not a converter input")
        if len(times):
            amp = DRIVE_FLUX / pickups[node]
            out.elements.append(Element(CURRENT_SOURCE, f"istim_{port}", ("0", node), waveform=toggle_waveform(times, amp)))
    return out


def stimulus_span(times) -> float:
    """Time needed after the last toggle for the converter to settle."""
    return (max(times) if len(times) else 0.0) + 2 * TOGGLE_RISE + TOGGLE_WIDTH + 100e-12


def min_toggle_spacing() -> float:
    return 2 * TOGGLE_RISE + TOGGLE_WIDTH + 30e-12


__all__ = [
    "CIRCUIT_KINDS",
    "CircuitParamError",
    "PICKUPS",
    "attach_stimulus",
    "build_circuit",
    "toggle_waveform",
]
