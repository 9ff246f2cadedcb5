"""Hierarchical expansion of a Netlist into a flat element graph."""

from __future__ import annotations

from dataclasses import dataclass, field
import math

from ..constants import E_CHARGE, T_REF_DEFAULT, TC_NB_FILM
from ..physics import JunctionParams, MaterialParams, ic_ratio
from .grammar import (
    CAPACITOR,
    CURRENT_SOURCE,
    GROUND,
    INDUCTOR,
    INSTANCE,
    JUNCTION,
    RESISTOR,
    Directive,
    Element,
    ModelDef,
    Netlist,
    NetlistError,
    NetlistReferenceError,
    Waveform,
)


class CycleError(NetlistError):
    pass


@dataclass(frozen=True)
class FlatJunction:
    name: str
    a: int
    b: int
    params: JunctionParams
    model: str
    area: float


@dataclass(frozen=True)
class FlatTwoTerminal:
    name: str
    a: int
    b: int
    value: float  # H, Ohm or F


@dataclass(frozen=True)
class FlatSource:
    name: str
    a: int
    b: int
    waveform: Waveform
    is_bias: bool


@dataclass(frozen=True)
class PortRef:
    node: int
    junction: int | None = None  # index into FlatCircuit.junctions


@dataclass(frozen=True)
class FlatCircuit:
    """Flat circuit. Node 0 is ground; element terminals index ``nodes``."""

    nodes: tuple[str, ...] = (GROUND,)
    junctions: tuple[FlatJunction, ...] = ()
    inductors: tuple[FlatTwoTerminal, ...] = ()
    resistors: tuple[FlatTwoTerminal, ...] = ()
    capacitors: tuple[FlatTwoTerminal, ...] = ()
    sources: tuple[FlatSource, ...] = ()
    port_map: dict[str, PortRef] = field(default_factory=dict)
    models: dict[str, ModelDef] = field(default_factory=dict)
    instances: dict[str, str] = field(default_factory=dict)  # instance path -> subckt name
    temperature: float | None = None
    tran: tuple[float, float] | None = None

    @property
    def bias_sources(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.sources) if s.is_bias)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def node_index(self, name: str) -> int:
        try:
            return self.nodes.index(name.lower())
        except ValueError:
            raise KeyError(f"no node {name!r}") from None

    def junction_index(self, name: str) -> int:
        name = name.lower()
        for i, j in enumerate(self.junctions):
            if j.name == name:
                return i
        raise KeyError(f"no junction {name!r}")

    def junctions_in(self, instance: str) -> list[int]:
        prefix = instance.lower() + "."
        return [i for i, j in enumerate(self.junctions) if j.name.startswith(prefix)]

    def with_junctions(self, junctions) -> "FlatCircuit":
        return _replace(self, junctions=tuple(junctions))

    def to_netlist(self) -> Netlist:
        n = Netlist(model_defs=dict(self.models))
        name = self.nodes
        for j in self.junctions:
            n.elements.append(Element(JUNCTION, j.name, (name[j.a], name[j.b]), model=j.model, area=j.area))
        for kind, group in ((INDUCTOR, self.inductors), (RESISTOR, self.resistors), (CAPACITOR, self.capacitors)):
            for e in group:
                n.elements.append(Element(kind, e.name, (name[e.a], name[e.b]), value=e.value))
        for s in self.sources:
            n.elements.append(Element(CURRENT_SOURCE, s.name, (name[s.a], name[s.b]), waveform=s.waveform))
        for port, ref in self.port_map.items():
            kw = {"junction": self.junctions[ref.junction].name} if ref.junction is not None else {}
            n.directives.append(Directive("port", (port, name[ref.node]), kw))
        if self.temperature is not None:
            n.directives.append(Directive("temp", (repr(self.temperature),)))
        if self.tran is not None:
            n.directives.append(Directive("tran", tuple(repr(v) for v in self.tran)))
        return n


def _replace(fc: FlatCircuit, **kw) -> FlatCircuit:
    from dataclasses import replace

    return replace(fc, **kw)


def junction_params(model: ModelDef, area: float) -> JunctionParams:
    p = model.params
    tc = p.get("tc", TC_NB_FILM)
    material = MaterialParams(tc=tc)
    ic_ref = p["icrit"] * area
    if "rn" in p:
        rn = p["rn"] / area
    else:
        # Ambegaokar-Baratoff: Ic(0)*Rn = pi*Delta(0)/2e
        ic0 = ic_ref / ic_ratio(T_REF_DEFAULT, tc)
        rn = math.pi * material.gap0 / (2 * E_CHARGE * ic0)
    return JunctionParams(
        ic_ref=ic_ref,
        rn=rn,
        r_shunt=p["rsh"] / area,
        cap=p.get("cap", 0.0) * area,
        material=material,
    )


class _Builder:
    def __init__(self, top: Netlist, lib):
        self.top = top
        self.lib = lib
        self.nodes: list[str] = [GROUND]
        self.index: dict[str, int] = {GROUND: 0}
        self.junctions: list[FlatJunction] = []
        self.two: dict[str, list[FlatTwoTerminal]] = {INDUCTOR: [], RESISTOR: [], CAPACITOR: []}
        self.sources: list[FlatSource] = []
        self.models: dict[str, ModelDef] = {}
        self.instances: dict[str, str] = {}

    def subckt(self, name: str, line) -> Netlist:
        if name in self.top.subckt_defs:
            return self.top.subckt_defs[name]
        if self.lib is not None and name in self.lib.netlist.subckt_defs:
            return self.lib.netlist.subckt_defs[name]
        raise NetlistReferenceError(f"undefined subcircuit {name!r}", name, line)

    def model(self, name: str, line) -> ModelDef:
        if name in self.top.model_defs:
            return self.top.model_defs[name]
        if self.lib is not None and name in self.lib.netlist.model_defs:
            return self.lib.netlist.model_defs[name]
        raise NetlistReferenceError(f"undefined model {name!r}", name, line)

    def node(self, name: str) -> int:
        if name not in self.index:
            self.index[name] = len(self.nodes)
            self.nodes.append(name)
        return self.index[name]

    def expand(self, scope: Netlist, prefix: str, node_map: dict[str, str], params: dict, stack: tuple):
        def resolve_node(n: str) -> str:
            if n == GROUND:
                return GROUND
            return node_map.get(n, prefix + n)

        def resolve_value(v, el):
            if isinstance(v, str):
                if v not in params:
                    raise NetlistReferenceError(f"undefined parameter {v!r}", v, el.line)
                return float(params[v])
            return v

        for el in scope.elements:
            name = prefix + el.name
            nodes = tuple(resolve_node(n) for n in el.nodes)
            if el.kind == INSTANCE:
                if el.subckt in stack:
                    raise CycleError(f"recursive subcircuit definition: {' -> '.join(stack + (el.subckt,))}")
                sub = self.subckt(el.subckt, el.line)
                if len(nodes) != len(sub.ports):
                    raise NetlistReferenceError(
                        f"instance {el.name!r} connects {len(nodes)} nodes, {el.subckt!r} has {len(sub.ports)} ports",
                        el.subckt,
                        el.line,
                    )
                sub_params = dict(sub.params)
                for k, v in el.params.items():
                    sub_params[k] = resolve_value(v, el)
                self.instances[name] = el.subckt
                self.expand(sub, name + ".", dict(zip(sub.ports, nodes)), sub_params, stack + (el.subckt,))
                continue
            a, b = self.node(nodes[0]), self.node(nodes[1])
            if el.kind == JUNCTION:
                model = self.model(el.model, el.line)
                self.models[model.name] = model
                area = resolve_value(el.area, el)
                self.junctions.append(FlatJunction(name, a, b, junction_params(model, area), model.name, area))
            elif el.kind == CURRENT_SOURCE:
                base = el.name
                self.sources.append(FlatSource(name, a, b, el.waveform, base.startswith("ib")))
            else:
                value = resolve_value(el.value, el)
                if not value > 0:
                    raise NetlistError(f"{name}: value must be positive")
                self.two[el.kind].append(FlatTwoTerminal(name, a, b, value))


def flatten(n: Netlist, lib=None) -> FlatCircuit:
    """Expand all subcircuit instances of ``n`` (resolving names in ``lib`` too)."""
    b = _Builder(n, lib)
    b.expand(n, "", {}, {}, ())
    port_map = {}
    jindex = {j.name: i for i, j in enumerate(b.junctions)}
    for d in n.directive("port"):
        pname, node = d.args
        if node not in b.index:
            raise NetlistReferenceError(f"port {pname!r} refers to unknown node {node!r}", node, d.line)
        junction = None
        if "junction" in d.kwargs:
            jn = d.kwargs["junction"]
            if jn not in jindex:
                raise NetlistReferenceError(f"port {pname!r} refers to unknown junction {jn!r}", jn, d.line)
            junction = jindex[jn]
        port_map[pname] = PortRef(b.index[node], junction)
    return FlatCircuit(
        nodes=tuple(b.nodes),
        junctions=tuple(b.junctions),
        inductors=tuple(b.two[INDUCTOR]),
        resistors=tuple(b.two[RESISTOR]),
        capacitors=tuple(b.two[CAPACITOR]),
        sources=tuple(b.sources),
        port_map=port_map,
        models=b.models,
        instances=b.instances,
        temperature=n.temperature,
        tran=n.tran,
    )
