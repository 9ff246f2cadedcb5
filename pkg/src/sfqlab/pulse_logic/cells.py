"""State-machine semantics of the library cells.

States are small ints: TFF toggle state, DFF/NDRO stored bit, SFQDC output
level. Transport cells carry no state.
"""

from __future__ import annotations

from ..netlist.library import KIND_PORTS


def cell_step(kind: str, state: int, port: str) -> tuple[tuple[str, ...], int]:
    """Apply one input pulse on ``port``; returns (output ports that fire, new state)."""
    ins, outs = KIND_PORTS[kind]
    if port not in ins:
        raise KeyError(f"{kind} has no input {port!r}")
    if kind in ("jtl", "dcsfq", "merge", "split"):
        return outs, state
    if kind == "sfqdc":
        return (), state ^ 1
    if kind == "tff":
        return (outs if state else ()), state ^ 1
    if kind == "dff":
        if port == "d":
            return (), 1
        return (outs if state else ()), 0
    if kind == "ndro":
        if port == "set":
            return (), 1
        if port == "reset":
            return (), 0
        return (outs if state else ()), state
    raise KeyError(f"unknown cell kind {kind!r}")


def run_cell(kind: str, ports, state: int = 0) -> tuple[list[str], int]:
    """Feed a sequence of input ports to one cell; returns all outputs fired and the final state."""
    fired: list[str] = []
    for p in ports:
        out, state = cell_step(kind, state, p)
        fired.extend(out)
    return fired, state
