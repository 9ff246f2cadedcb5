"""The shipped SFQ cell library and its behavioral annotations."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .flatten import flatten
from .grammar import INSTANCE, Element, Netlist, NetlistError, parse, parse_number

# behavioral input and output ports per cell kind; they match the subcircuit ports
KIND_PORTS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "dcsfq": (("in",), ("out",)),
    "sfqdc": (("in",), ()),
    "jtl": (("in",), ("out",)),
    "split": (("in",), ("outa", "outb")),
    "merge": (("ina", "inb"), ("out",)),
    "tff": (("in",), ("out",)),
    "dff": (("d", "clk"), ("out",)),
    "ndro": (("set", "reset", "read"), ("out",)),
}
CELL_KINDS = tuple(KIND_PORTS)
STORAGE_KINDS = frozenset({"tff", "dff", "ndro"})

DEFAULT_JITTER = 0.02
DEFAULT_I_NOM = 0.75


@dataclass(frozen=True)
class CellSpec:
    """Behavioral abstraction of one cell kind.

    ``window`` is the operating bias window at 4.2 K. ``kappa`` is the part of
    each edge's shift that does not follow the junction Ic: at Ic scale r the
    edge moves to ``r*edge + (r-1)*kappa``. With kappa = (0, 0) windows scale
    exactly with Ic. ``i_nom`` and ``escape_ic`` describe the junction most
    exposed to thermal escape: its normalized current at beta = 1 and its
    4.2 K critical current.
    """

    kind: str
    delay: float
    window: tuple[float, float]
    window_jitter_sigma: float = DEFAULT_JITTER
    kappa: tuple[float, float] = (0.0, 0.0)
    i_nom: float = DEFAULT_I_NOM
    escape_ic: float = 10e-6

    def __post_init__(self):
        if self.kind not in KIND_PORTS:
            raise ValueError(f"unknown cell kind {self.kind!r}")
        lo, hi = self.window
        if not 0 < lo < 1 < hi:
            raise ValueError(f"{self.kind}: window must satisfy 0 < lo < 1 < hi, got {self.window}")
        if not self.delay > 0:
            raise ValueError(f"{self.kind}: delay must be positive")
        if self.window_jitter_sigma < 0:
            raise ValueError("window_jitter_sigma must be non-negative")
        if not 0 < self.i_nom < 1:
            raise ValueError(f"{self.kind}: i_nom must lie in (0, 1)")
        if not self.escape_ic > 0:
            raise ValueError(f"{self.kind}: escape_ic must be positive")

    @property
    def inputs(self) -> tuple[str, ...]:
        return KIND_PORTS[self.kind][0]

    @property
    def outputs(self) -> tuple[str, ...]:
        return KIND_PORTS[self.kind][1]

    def window_at(self, r: float) -> tuple[float, float]:
        """Operating window when every junction Ic is scaled by ``r``."""
        lo, hi = self.window
        return r * lo + (r - 1) * self.kappa[0], r * hi + (r - 1) * self.kappa[1]


@dataclass(frozen=True)
class CellLibrary:
    netlist: Netlist
    specs: dict[str, CellSpec] = field(default_factory=dict)
    readouts: dict[str, str] = field(default_factory=dict)
    source: str = ""

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(k for k in CELL_KINDS if k in self.netlist.subckt_defs)

    def spec(self, kind: str) -> CellSpec:
        try:
            return self.specs[kind]
        except KeyError:
            raise KeyError(f"cell {kind!r} has no calibrated behavioral spec") from None

    def subckt(self, kind: str) -> Netlist:
        return self.netlist.subckt_defs[kind]

    def with_specs(self, specs: dict[str, CellSpec]) -> "CellLibrary":
        return replace(self, specs={**self.specs, **specs})

    def text_with_specs(self) -> str:
        """Library source with each ``.behav`` line rewritten from ``specs``."""
        out = []
        current = None
        for line in self.source.splitlines():
            head = line.strip().lower()
            if head.startswith(".subckt"):
                current = head.split()[1]
            if head.startswith(".behav") and current in self.specs:
                line = behav_line(self.specs[current], self.readouts.get(current))
            out.append(line)
        return "\n".join(out) + "\n"


def behav_line(spec: CellSpec, readout: str | None) -> str:
    parts = [f".behav kind={spec.kind}"]
    if readout:
        parts.append(f"readout={readout}")
    parts += [
        f"lo={spec.window[0]:.4f}",
        f"hi={spec.window[1]:.4f}",
        f"kappa_lo={spec.kappa[0]:.4f}",
        f"kappa_hi={spec.kappa[1]:.4f}",
        f"delay={spec.delay * 1e12:.2f}p",
    ]
    if spec.i_nom != DEFAULT_I_NOM:
        parts.append(f"i_nom={spec.i_nom:g}")
    parts.append(f"escape_ic={spec.escape_ic * 1e6:g}u")
    if spec.window_jitter_sigma != DEFAULT_JITTER:
        parts.append(f"jitter={spec.window_jitter_sigma:g}")
    return " ".join(parts)


def cell_ic_min(n: Netlist, kind: str) -> float:
    sub = n.subckt_defs[kind]
    top = Netlist(model_defs=n.model_defs, subckt_defs=n.subckt_defs)
    top.elements.append(Element(INSTANCE, "xcell", tuple(f"p{i}" for i in range(len(sub.ports))), subckt=kind))
    fc = flatten(top)
    if not fc.bias_sources:
        raise NetlistError(f"cell {kind!r} has no bias source")
    return min(j.params.ic_ref for j in fc.junctions)


def load_library(text: str) -> CellLibrary:
    n = parse(text)
    specs, readouts = {}, {}
    for kind in CELL_KINDS:
        if kind not in n.subckt_defs:
            continue
        b = n.subckt_defs[kind].behav
        if b is None:
            continue
        if b.get("kind", kind) != kind:
            raise NetlistError(f"subckt {kind!r} annotated as {b['kind']!r}")
        if "readout" in b:
            readouts[kind] = b["readout"]
        if "lo" not in b or "hi" not in b:
            continue
        specs[kind] = CellSpec(
            kind=kind,
            delay=parse_number(b.get("delay", "5p")),
            window=(float(b["lo"]), float(b["hi"])),
            window_jitter_sigma=float(b.get("jitter", DEFAULT_JITTER)),
            kappa=(float(b.get("kappa_lo", 0.0)), float(b.get("kappa_hi", 0.0))),
            i_nom=float(b.get("i_nom", DEFAULT_I_NOM)),
            escape_ic=parse_number(b["escape_ic"]) if "escape_ic" in b else cell_ic_min(n, kind),
        )
    return CellLibrary(netlist=n, specs=specs, readouts=readouts, source=text)


def library_path() -> Path:
    return Path(str(resources.files("sfqlab") / "data" / "cells.cir"))


@lru_cache(maxsize=1)
def default_library() -> CellLibrary:
    return load_library(library_path().read_text())
