"""Behavioral circuits: library cell instances wired by pulse connections."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..netlist.builders import build_circuit
from ..netlist.grammar import INSTANCE, Netlist
from ..netlist.library import KIND_PORTS, CellLibrary, CellSpec, default_library
from ..rng import stream

# stream-id namespace for window jitter draws
JITTER_STREAM = 0x4A17


class WiringError(ValueError):
    pass


@dataclass(frozen=True)
class Instance:
    name: str
    spec: CellSpec
    window: tuple[float, float]  # realized 4.2 K window after jitter

    @property
    def kind(self) -> str:
        return self.spec.kind


@dataclass(frozen=True)
class BehavioralCircuit:
    """Cells plus pulse wiring.

    ``fanout[(i, out_port)]`` lists the (instance, input port) pairs a pulse
    from output ``out_port`` of instance ``i`` reaches. ``inputs`` maps an
    external port to the cell inputs it drives; ``outputs`` maps an external
    port to the instance whose operations it observes (an SFQDC) or to an
    (instance, output port) pair whose emissions it observes.
    """

    instances: tuple[Instance, ...]
    fanout: dict[tuple[int, str], tuple[tuple[int, str], ...]]
    inputs: dict[str, tuple[tuple[int, str], ...]]
    outputs: dict[str, tuple[int, str | None]]
    title: str = ""
    jitter_seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def ports(self) -> tuple[str, ...]:
        return tuple(self.inputs) + tuple(self.outputs)

    def index(self, name: str) -> int:
        for i, inst in enumerate(self.instances):
            if inst.name == name:
                return i
        raise KeyError(f"no instance {name!r}")

    def count(self, kind: str | None = None) -> int:
        return sum(1 for x in self.instances if kind is None or x.kind == kind)

    def with_windows(self, windows) -> "BehavioralCircuit":
        inst = tuple(Instance(x.name, x.spec, tuple(w)) for x, w in zip(self.instances, windows))
        return BehavioralCircuit(inst, self.fanout, self.inputs, self.outputs, self.title, self.jitter_seed, self.meta)

    def with_specs(self, specs: dict[str, CellSpec]) -> "BehavioralCircuit":
        """Replace specs per kind; realized windows are reset to the new nominal ones."""
        inst = tuple(
            Instance(x.name, specs[x.kind], specs[x.kind].window) if x.kind in specs else x for x in self.instances
        )
        return BehavioralCircuit(inst, self.fanout, self.inputs, self.outputs, self.title, None, self.meta)


def realize_windows(specs: list[CellSpec], seed: int | None, sigma: float | None = None) -> list[tuple[float, float]]:
    """Per-instance windows: each edge moves by N(0, (sigma * width)^2), one stream per instance."""
    out = []
    for i, spec in enumerate(specs):
        lo, hi = spec.window
        s = spec.window_jitter_sigma if sigma is None else sigma
        if seed is None or s == 0:
            out.append((lo, hi))
            continue
        d_lo, d_hi = stream(seed, JITTER_STREAM, i).normal(0.0, s * (hi - lo), 2)
        out.append((max(lo + d_lo, 1e-6), hi + d_hi))
    return out


def elaborate(
    n: Netlist,
    lib: CellLibrary | None = None,
    jitter_seed: int | None = None,
    jitter: float | None = None,
    specs: dict[str, CellSpec] | None = None,
) -> BehavioralCircuit:
    """Map the top-level cell instances of ``n`` to a behavioral circuit.

    Wires are the netlist nodes: every node must have exactly one driver (a
    cell output or a declared input port) when any cell input sits on it.
    ``jitter_seed`` None means nominal windows; ``jitter`` overrides every
    spec's jitter sigma.
    """
    lib = lib or default_library()
    specs = {**lib.specs, **(specs or {})}
    cells = [el for el in n.elements if el.kind == INSTANCE]
    drivers: dict[str, list] = {}
    sinks: dict[str, list] = {}
    instances_spec = []
    for i, el in enumerate(cells):
        if el.subckt not in KIND_PORTS:
            raise WiringError(f"instance {el.name!r}: {el.subckt!r} is not a library cell kind")
        if el.subckt not in specs:
            raise WiringError(f"instance {el.name!r}: cell {el.subckt!r} has no behavioral spec")
        sub = lib.subckt(el.subckt)
        if len(el.nodes) != len(sub.ports):
            raise WiringError(f"instance {el.name!r} connects {len(el.nodes)} nodes, {el.subckt!r} has {len(sub.ports)}")
        ins, outs = KIND_PORTS[el.subckt]
        for port, node in zip(sub.ports, el.nodes):
            if port in outs:
                drivers.setdefault(node, []).append((i, port))
            elif port in ins:
                sinks.setdefault(node, []).append((i, port))
        instances_spec.append(specs[el.subckt])

    port_decls = n.port_decls
    inputs: dict[str, tuple] = {}
    outputs: dict[str, tuple] = {}
    names = [el.name for el in cells]
    for pname, d in port_decls.items():
        node = d.args[1]
        if node in drivers or "junction" in d.kwargs:
            # observed port: prefer an SFQDC on the node, else the driver's emissions
            monitor = [i for i, p in sinks.get(node, []) if cells[i].subckt == "sfqdc"]
            if "junction" in d.kwargs:
                inst = d.kwargs["junction"].rsplit(".", 1)[0]
                if inst in names:
                    monitor = [names.index(inst)]
            if monitor:
                outputs[pname] = (monitor[0], None)
            elif node in drivers:
                outputs[pname] = drivers[node][0]
            else:
                raise WiringError(f"output port {pname!r} observes nothing")
        else:
            if node not in sinks:
                raise WiringError(f"input port {pname!r} drives no cell")
            inputs[pname] = tuple(sinks[node])
            drivers.setdefault(node, []).append(("port", pname))

    for node, s in sinks.items():
        d = drivers.get(node, [])
        for i, p in s:
            if len(d) != 1:
                what = "no source" if not d else f"{len(d)} sources"
                raise WiringError(f"input {names[i]}.{p} on node {node!r} has {what}")
    fanout: dict[tuple[int, str], tuple] = {}
    for node, d in drivers.items():
        (src,) = d if len(d) == 1 else (None,)
        if src is None or src[0] == "port":
            if src is None:
                raise WiringError(f"node {node!r} has {len(d)} drivers")
            continue
        fanout[src] = tuple(sinks.get(node, ()))

    windows = realize_windows(instances_spec, jitter_seed, jitter)
    inst = tuple(Instance(el.name, sp, w) for el, sp, w in zip(cells, instances_spec, windows))
    return BehavioralCircuit(inst, fanout, inputs, outputs, n.title, jitter_seed)


def behavioral_circuit(kind: str, lib: CellLibrary | None = None, jitter_seed: int | None = None, jitter: float | None = None, **params) -> BehavioralCircuit:
    """Generated circuit ``kind`` elaborated for behavioral simulation."""
    lib = lib or default_library()
    bc = elaborate(build_circuit(kind, lib, **params), lib, jitter_seed, jitter)
    return BehavioralCircuit(bc.instances, bc.fanout, bc.inputs, bc.outputs, bc.title, jitter_seed, {"kind": kind, **params})
