"""SPICE-like netlist grammar: parsing and serialization.

Line format (case-insensitive, ``0``/``gnd`` is ground)::

    * comment            ; trailing comment
    B<name> n+ n- <model> [area=x]
    L<name> n+ n- <value>          (also R, C)
    I<name> n+ n- dc(v) | pulse(lo hi t0 rise width fall period) | pwl(t1 v1 ...)
    X<name> <subckt> <nodes...> [param=value ...]
    .subckt <name> <ports...> [param=default ...]
    .ends
    .model <name> jj(icrit=.., rn=.., rsh=.., cap=.., tc=..)
    .temp <kelvin>
    .tran <dt> <tstop>
    .port <name> <node> [junction=<element>]
    .behav kind=<cell> <role>=<port> ... [delay=..] [lo=..] [hi=..]
    + continuation of the previous line

Element values inside a subcircuit may name one of its parameters instead of
a number; they are resolved during flattening. Current sources named ``IB*``
are bias sources.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
import re

JUNCTION = "junction"
INDUCTOR = "inductor"
RESISTOR = "resistor"
CAPACITOR = "capacitor"
CURRENT_SOURCE = "current_source"
INSTANCE = "subckt_instance"

KIND_BY_PREFIX = {
    "b": JUNCTION,
    "l": INDUCTOR,
    "r": RESISTOR,
    "c": CAPACITOR,
    "i": CURRENT_SOURCE,
    "x": INSTANCE,
}

GROUND = "0"
MODEL_KEYS = ("icrit", "rn", "rsh", "cap", "tc")

_SUFFIX = {"f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "m": 1e-3, "k": 1e3, "g": 1e9, "t": 1e12}
_NUMBER = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?)(meg|[fpnumkgt])?([a-z]*)$")
_IDENT = re.compile(r"^[a-z_][a-z0-9_.\[\]$|-]*$")


class NetlistError(Exception):
    """Base class for netlist problems."""


class NetlistSyntaxError(NetlistError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class NetlistReferenceError(NetlistError):
    def __init__(self, message: str, name: str, line: int | None = None):
        self.name = name
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DuplicateNameError(NetlistSyntaxError):
    pass


def parse_number(text: str) -> float:
    m = _NUMBER.match(text.strip().lower())
    if not m:
        raise ValueError(f"not a number: {text!r}")
    value = float(m.group(1))
    suffix = m.group(2)
    if suffix == "meg":
        value *= 1e6
    elif suffix:
        value *= _SUFFIX[suffix]
    return value


def format_number(x: float) -> str:
    return repr(float(x))


def _node(name: str) -> str:
    name = name.lower()
    return GROUND if name == "gnd" else name


@dataclass(frozen=True)
class Waveform:
    kind: str  # "dc" | "pulse" | "pwl"
    args: tuple[float, ...]

    def __post_init__(self):
        n = len(self.args)
        if self.kind == "dc" and n != 1:
            raise ValueError("dc() takes one value")
        if self.kind == "pulse" and n not in (6, 7):
            raise ValueError("pulse() takes lo hi t0 rise width fall [period]")
        if self.kind == "pwl":
            if n < 2 or n % 2:
                raise ValueError("pwl() takes time/value pairs")
            times = self.args[0::2]
            if any(b < a for a, b in zip(times, times[1:])):
                raise ValueError("pwl() times must be non-decreasing")
        if self.kind not in ("dc", "pulse", "pwl"):
            raise ValueError(f"unknown waveform {self.kind!r}")

    def __call__(self, t: float) -> float:
        a = self.args
        if self.kind == "dc":
            return a[0]
        if self.kind == "pulse":
            lo, hi, t0, rise, width, fall = a[:6]
            period = a[6] if len(a) == 7 else 0.0
            if t < t0:
                return lo
            tau = t - t0
            if period > 0:
                tau = math.fmod(tau, period)
            if tau < rise:
                return lo + (hi - lo) * tau / rise if rise > 0 else hi
            tau -= rise
            if tau < width:
                return hi
            tau -= width
            if tau < fall:
                return hi + (lo - hi) * tau / fall if fall > 0 else lo
            return lo
        times, values = a[0::2], a[1::2]
        if t <= times[0]:
            return values[0]
        for i in range(1, len(times)):
            if t <= times[i]:
                t0, t1 = times[i - 1], times[i]
                if t1 == t0:
                    return values[i]
                return values[i - 1] + (values[i] - values[i - 1]) * (t - t0) / (t1 - t0)
        return values[-1]

    def sample(self, t: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over a time grid."""
        t = np.asarray(t, dtype=float)
        a = self.args
        if self.kind == "dc":
            return np.full(t.shape, a[0])
        if self.kind == "pwl":
            return np.interp(t, a[0::2], a[1::2])
        lo, hi, t0, rise, width, fall = a[:6]
        period = a[6] if len(a) == 7 else 0.0
        tau = t - t0
        if period > 0:
            tau = np.where(tau >= 0, np.fmod(tau, period), tau)
        xp = [0.0, rise, rise + width, rise + width + fall]
        out = np.interp(tau, xp, [lo, hi, hi, lo]) if rise > 0 and fall > 0 else np.array([self(x) for x in t.ravel()]).reshape(t.shape)
        return np.where(tau < 0, lo, out)

    @property
    def dc_value(self) -> float:
        return self(0.0) if self.kind != "dc" else self.args[0]

    def scaled(self, k: float) -> "Waveform":
        if self.kind == "dc":
            return Waveform("dc", (self.args[0] * k,))
        if self.kind == "pulse":
            a = list(self.args)
            a[0] *= k
            a[1] *= k
            return Waveform("pulse", tuple(a))
        a = list(self.args)
        for i in range(1, len(a), 2):
            a[i] *= k
        return Waveform("pwl", tuple(a))

    def to_text(self) -> str:
        return f"{self.kind}(" + " ".join(format_number(v) for v in self.args) + ")"


@dataclass
class Element:
    kind: str
    name: str
    nodes: tuple[str, ...]
    value: float | str | None = None  # L/R/C value (SI) or parameter name
    model: str | None = None  # junction model
    area: float | str = 1.0
    waveform: Waveform | None = None
    subckt: str | None = None
    params: dict[str, float | str] = field(default_factory=dict)  # instance overrides
    line: int | None = field(default=None, compare=False)

    @property
    def is_bias(self) -> bool:
        return self.kind == CURRENT_SOURCE and self.name.startswith("ib")


@dataclass
class ModelDef:
    name: str
    params: dict[str, float]
    line: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if "icrit" not in self.params or "rsh" not in self.params:
            raise NetlistSyntaxError(f"model {self.name!r} needs icrit and rsh", self.line)
        if self.params["icrit"] <= 0 or self.params["rsh"] <= 0:
            raise NetlistSyntaxError(f"model {self.name!r}: icrit and rsh must be positive", self.line)


@dataclass
class Directive:
    name: str  # without the leading dot
    args: tuple[str, ...] = ()
    kwargs: dict[str, str] = field(default_factory=dict)
    line: int | None = field(default=None, compare=False)


@dataclass
class Netlist:
    title: str = ""
    elements: list[Element] = field(default_factory=list)
    subckt_defs: dict[str, "Netlist"] = field(default_factory=dict)
    model_defs: dict[str, ModelDef] = field(default_factory=dict)
    directives: list[Directive] = field(default_factory=list)
    ports: tuple[str, ...] = ()  # subcircuit ports; empty for a top-level netlist
    params: dict[str, float] = field(default_factory=dict)  # subcircuit parameter defaults

    def directive(self, name: str) -> list[Directive]:
        return [d for d in self.directives if d.name == name]

    @property
    def temperature(self) -> float | None:
        d = self.directive("temp")
        return parse_number(d[-1].args[0]) if d else None

    @property
    def tran(self) -> tuple[float, float] | None:
        d = self.directive("tran")
        return (parse_number(d[-1].args[0]), parse_number(d[-1].args[1])) if d else None

    @property
    def port_decls(self) -> dict[str, Directive]:
        return {d.args[0]: d for d in self.directive("port")}

    @property
    def behav(self) -> dict[str, str] | None:
        d = self.directive("behav")
        return dict(d[-1].kwargs) if d else None


# ---------------------------------------------------------------- tokenizing


@dataclass
class _Line:
    text: str
    number: int


def _logical_lines(text: str) -> list[_Line]:
    out: list[_Line] = []
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped or stripped.startswith("*"):
            continue
        if stripped.startswith("+"):
            if not out:
                raise NetlistSyntaxError("continuation line with nothing to continue", i, 1)
            out[-1].text += " " + stripped[1:]
            continue
        out.append(_Line(stripped, i))
    return out


def _tokens(line: _Line) -> list[tuple[str, int]]:
    """Split on whitespace outside parentheses; returns (token, column)."""
    tokens = []
    depth = 0
    start = None
    text = line.text
    for col, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise NetlistSyntaxError("unbalanced ')'", line.number, col + 1)
        if ch.isspace() and depth == 0:
            if start is not None:
                tokens.append((text[start:col], start + 1))
                start = None
        elif start is None:
            start = col
    if depth != 0:
        raise NetlistSyntaxError("unbalanced '('", line.number, len(text))
    if start is not None:
        tokens.append((text[start:], start + 1))
    # rejoin "key = value" spelled with spaces
    joined: list[tuple[str, int]] = []
    i = 0
    while i < len(tokens):
        tok, col = tokens[i]
        if i + 2 < len(tokens) and tokens[i + 1][0] == "=":
            joined.append((tok + "=" + tokens[i + 2][0], col))
            i += 3
            continue
        joined.append((tok, col))
        i += 1
    return joined


def _number(tok: str, line: _Line, col: int) -> float:
    try:
        return parse_number(tok)
    except ValueError:
        raise NetlistSyntaxError(f"bad number {tok!r}", line.number, col) from None


def _value(tok: str, line: _Line, col: int) -> float | str:
    t = tok.lower()
    try:
        return parse_number(t)
    except ValueError:
        if _IDENT.match(t):
            return t
        raise NetlistSyntaxError(f"bad value {tok!r}", line.number, col) from None


def _call_args(tok: str, line: _Line, col: int) -> tuple[str, list[str]]:
    m = re.match(r"^([a-z_]\w*)\((.*)\)$", tok.lower(), re.S)
    if not m:
        raise NetlistSyntaxError(f"expected name(args), got {tok!r}", line.number, col)
    body = m.group(2).replace(",", " ").split()
    return m.group(1), body


def _kv(tok: str, line: _Line, col: int) -> tuple[str, str]:
    if "=" not in tok:
        raise NetlistSyntaxError(f"expected key=value, got {tok!r}", line.number, col)
    k, v = tok.split("=", 1)
    if not k or not v:
        raise NetlistSyntaxError(f"expected key=value, got {tok!r}", line.number, col)
    return k.lower(), v.lower()


def _waveform(tok: str, line: _Line, col: int) -> Waveform:
    t = tok.lower()
    try:
        if "(" not in t:
            return Waveform("dc", (parse_number(t),))
        name, body = _call_args(t, line, col)
        return Waveform(name, tuple(parse_number(b) for b in body))
    except ValueError as exc:
        raise NetlistSyntaxError(f"bad waveform {tok!r}: {exc}", line.number, col) from None


# ---------------------------------------------------------------- parsing


def _parse_element(toks: list[tuple[str, int]], line: _Line) -> Element:
    head, col = toks[0]
    name = head.lower()
    kind = KIND_BY_PREFIX.get(name[0])
    if kind is None:
        raise NetlistSyntaxError(f"unknown element type {head[0]!r}", line.number, col)
    if kind == INSTANCE:
        if len(toks) < 2:
            raise NetlistSyntaxError("instance needs a subcircuit name", line.number, col)
        sub = toks[1][0].lower()
        nodes, params = [], {}
        for tok, c in toks[2:]:
            if "=" in tok:
                k, v = _kv(tok, line, c)
                params[k] = _value(v, line, c)
            elif params:
                raise NetlistSyntaxError("node after parameter", line.number, c)
            else:
                nodes.append(_node(tok))
        return Element(kind, name, tuple(nodes), subckt=sub, params=params, line=line.number)
    if len(toks) < 4:
        raise NetlistSyntaxError(f"{head} needs two nodes and a value", line.number, col)
    nodes = (_node(toks[1][0]), _node(toks[2][0]))
    tok, c = toks[3]
    if kind == JUNCTION:
        area: float | str = 1.0
        for extra, c2 in toks[4:]:
            k, v = _kv(extra, line, c2)
            if k != "area":
                raise NetlistSyntaxError(f"unknown junction option {k!r}", line.number, c2)
            area = _value(v, line, c2)
            if isinstance(area, float) and area <= 0:
                raise NetlistSyntaxError("area must be positive", line.number, c2)
        return Element(kind, name, nodes, model=tok.lower(), area=area, line=line.number)
    if len(toks) > 4:
        raise NetlistSyntaxError(f"unexpected token {toks[4][0]!r}", line.number, toks[4][1])
    if kind == CURRENT_SOURCE:
        return Element(kind, name, nodes, waveform=_waveform(tok, line, c), line=line.number)
    value = _value(tok, line, c)
    if isinstance(value, float) and value <= 0:
        raise NetlistSyntaxError(f"{head}: value must be positive", line.number, c)
    return Element(kind, name, nodes, value=value, line=line.number)


def _parse_model(toks, line: _Line) -> ModelDef:
    if len(toks) < 3:
        raise NetlistSyntaxError(".model needs a name and jj(...)", line.number)
    name = toks[1][0].lower()
    body = " ".join(t for t, _ in toks[2:])
    kind, args = _call_args(body, line, toks[2][1])
    if kind != "jj":
        raise NetlistSyntaxError(f"unsupported model type {kind!r}", line.number, toks[2][1])
    params = {}
    for a in args:
        k, v = _kv(a, line, toks[2][1])
        if k not in MODEL_KEYS:
            raise NetlistSyntaxError(f"unknown model parameter {k!r}", line.number, toks[2][1])
        params[k] = _number(v, line, toks[2][1])
    return ModelDef(name, params, line=line.number)


def _parse_directive(toks, line: _Line) -> Directive:
    name = toks[0][0][1:].lower()
    args, kwargs = [], {}
    for tok, c in toks[1:]:
        if "=" in tok:
            k, v = _kv(tok, line, c)
            kwargs[k] = v
        else:
            args.append(tok.lower() if name != "title" else tok)
    if name == "temp" and len(args) != 1:
        raise NetlistSyntaxError(".temp takes one value", line.number)
    if name == "tran" and len(args) != 2:
        raise NetlistSyntaxError(".tran takes dt and tstop", line.number)
    if name == "port" and len(args) != 2:
        raise NetlistSyntaxError(".port takes a name and a node", line.number)
    for a, (tok, c) in zip(args, toks[1:]):
        if name in ("temp", "tran"):
            _number(a, line, c)
    if name == "port":
        args[1] = _node(args[1])
    return Directive(name, tuple(args), kwargs, line=line.number)


def _add_element(scope: Netlist, el: Element, seen: set[str], line: _Line):
    if el.name in seen:
        raise DuplicateNameError(f"duplicate element name {el.name!r}", line.number, 1)
    seen.add(el.name)
    scope.elements.append(el)


def parse(text: str, lib=None) -> Netlist:
    """Parse netlist ``text``.

    ``lib`` (a CellLibrary) supplies subcircuits and models that may be
    referenced without being defined in the text.
    """
    top = Netlist()
    scope = top
    seen_top: set[str] = set()
    seen = seen_top
    sub_line = None
    for line in _logical_lines(text):
        toks = _tokens(line)
        head = toks[0][0].lower()
        if head.startswith("."):
            kw = head[1:]
            if kw == "subckt":
                if scope is not top:
                    raise NetlistSyntaxError("nested .subckt is not supported", line.number, 1)
                if len(toks) < 2:
                    raise NetlistSyntaxError(".subckt needs a name", line.number)
                name = toks[1][0].lower()
                if name in top.subckt_defs:
                    raise DuplicateNameError(f"duplicate subcircuit {name!r}", line.number, toks[1][1])
                ports, params = [], {}
                for tok, c in toks[2:]:
                    if "=" in tok:
                        k, v = _kv(tok, line, c)
                        params[k] = _number(v, line, c)
                    else:
                        ports.append(_node(tok))
                scope = Netlist(title=name, ports=tuple(ports), params=params)
                top.subckt_defs[name] = scope
                seen = set()
                sub_line = line.number
            elif kw == "ends":
                if scope is top:
                    raise NetlistSyntaxError(".ends without .subckt", line.number, 1)
                scope, seen = top, seen_top
            elif kw == "model":
                m = _parse_model(toks, line)
                if m.name in top.model_defs:
                    raise DuplicateNameError(f"duplicate model {m.name!r}", line.number, toks[1][1])
                top.model_defs[m.name] = m
            elif kw == "title":
                top.title = line.text.split(None, 1)[1] if len(toks) > 1 else ""
            elif kw == "end":
                break
            elif kw in ("temp", "tran", "port", "behav"):
                scope.directives.append(_parse_directive(toks, line))
            else:
                raise NetlistSyntaxError(f"unknown directive {head!r}", line.number, 1)
        else:
            _add_element(scope, _parse_element(toks, line), seen, line)
    if scope is not top:
        raise NetlistSyntaxError(f".subckt {scope.title!r} is missing .ends", sub_line)
    check_references(top, lib)
    return top


def check_references(n: Netlist, lib=None) -> None:
    models = set(n.model_defs) | (set(lib.netlist.model_defs) if lib else set())
    subckts = set(n.subckt_defs) | (set(lib.netlist.subckt_defs) if lib else set())
    for scope in [n, *n.subckt_defs.values()]:
        local_params = set(scope.params)
        for el in scope.elements:
            if el.kind == JUNCTION and el.model not in models:
                raise NetlistReferenceError(f"undefined model {el.model!r}", el.model, el.line)
            if el.kind == INSTANCE and el.subckt not in subckts:
                raise NetlistReferenceError(f"undefined subcircuit {el.subckt!r}", el.subckt, el.line)
            for v in (el.value, el.area):
                if isinstance(v, str) and v not in local_params:
                    raise NetlistReferenceError(f"undefined parameter {v!r}", v, el.line)


# ---------------------------------------------------------------- serializing


def _el_text(el: Element) -> str:
    def val(v):
        return v if isinstance(v, str) else format_number(v)

    nodes = " ".join(el.nodes)
    if el.kind == INSTANCE:
        parts = [el.name, el.subckt, nodes] + [f"{k}={val(v)}" for k, v in el.params.items()]
        return " ".join(p for p in parts if p)
    if el.kind == JUNCTION:
        return f"{el.name} {nodes} {el.model} area={val(el.area)}"
    if el.kind == CURRENT_SOURCE:
        return f"{el.name} {nodes} {el.waveform.to_text()}"
    return f"{el.name} {nodes} {val(el.value)}"


def _dir_text(d: Directive) -> str:
    parts = ["." + d.name, *d.args] + [f"{k}={v}" for k, v in d.kwargs.items()]
    return " ".join(parts)


def serialize(n: Netlist) -> str:
    lines = []
    if n.title:
        lines.append(f".title {n.title}")
    for m in n.model_defs.values():
        body = ", ".join(f"{k}={format_number(v)}" for k, v in m.params.items())
        lines.append(f".model {m.name} jj({body})")
    for name, sub in n.subckt_defs.items():
        head = [".subckt", name, *sub.ports] + [f"{k}={format_number(v)}" for k, v in sub.params.items()]
        lines.append(" ".join(head))
        lines.extend(_dir_text(d) for d in sub.directives)
        lines.extend(_el_text(el) for el in sub.elements)
        lines.append(".ends")
    lines.extend(_el_text(el) for el in n.elements)
    lines.extend(_dir_text(d) for d in n.directives)
    return "\n".join(lines) + "\n"
