"""Stimulus scripts for the shift-register circuits, and direct runners."""

from __future__ import annotations

from ..analog.pulses import PulseTrain
from .circuit import BehavioralCircuit
from .errors import ErrorModel
from .simulate import SimResult, simulate

# one stimulus action per slot; long enough for the deepest ripple to settle
SLOT = 1e-9


class _Script:
    def __init__(self, t0: float = SLOT, slot: float = SLOT):
        self.t = t0
        self.slot = slot
        self.events: dict[str, list[float]] = {}

    def send(self, port: str, count: int = 1):
        for _ in range(count):
            self.events.setdefault(port, []).append(self.t)
            self.t += self.slot

    def mark(self) -> float:
        return self.t

    def train(self) -> PulseTrain:
        return PulseTrain.from_unsorted(self.events)


def _load_register(s: _Script, bits, clear: int = 0):
    """Clock ``clear`` empty shifts, then each bit as (data if 1, clock).

    After the last clock the first bit sent sits in the last stage.
    """
    s.send("serial_clock", clear)
    for b in bits:
        if b:
            s.send("serial_data")
        s.send("serial_clock")


def dmx_program_script(program, inputs: int, slot: float = SLOT) -> tuple[PulseTrain, float]:
    """Clear, load ``program`` (bit k selects output k+1), then ``inputs`` input pulses.

    Returns the stimuli and the time the input phase starts.
    """
    n = len(program)
    s = _Script(slot=slot)
    _load_register(s, [int(bool(b)) for b in reversed(program)], clear=n)
    start = s.mark()
    s.send("input", inputs)
    return s.train(), start


def dmx_rotation_script(n_out: int, per_channel: int = 4, slot: float = SLOT) -> tuple[PulseTrain, list[tuple[float, float]]]:
    """Clear, latch one bit, then per channel: input pulses and one shift.

    Returns the stimuli and the (start, end) window of each channel's phase.
    """
    s = _Script(slot=slot)
    s.send("serial_clock", n_out)
    s.send("serial_data")
    s.send("serial_clock")
    phases = []
    for k in range(n_out):
        start = s.mark()
        s.send("input", per_channel)
        phases.append((start, s.mark()))
        if k < n_out - 1:
            s.send("serial_clock")
    return s.train(), phases


def counter_preload(m: int, n_bits: int) -> list[int]:
    """Bits of P = 2^N - m, most significant first (the order they are shifted in)."""
    if not 1 <= m <= 2**n_bits:
        raise ValueError(f"count must lie in [1, {2**n_bits}], got {m}")
    p = 2**n_bits - m
    return [(p >> k) & 1 for k in range(n_bits - 1, -1, -1)]


def counter_script(m: int, n_bits: int, clocks: int | None = None, slot: float = SLOT) -> tuple[PulseTrain, float]:
    """Shift in P, pulse load, then stream ``clocks`` (default m + 2) counter clocks."""
    clocks = m + 2 if clocks is None else clocks
    if clocks < m:
        raise ValueError("need at least m clocks")
    s = _Script(slot=slot)
    _load_register(s, counter_preload(m, n_bits))
    s.send("load")
    start = s.mark()
    s.send("clock_in", clocks)
    return s.train(), start


def _n_bits(bc: BehavioralCircuit) -> int:
    if "n_bits" in bc.meta:
        return int(bc.meta["n_bits"])
    return sum(1 for x in bc.instances if x.name.startswith("xcnt_tff"))


def run_dmx(bc: BehavioralCircuit, program, inputs: int = 4, em: ErrorModel | None = None, seed: int = 0) -> PulseTrain:
    """Load ``program`` and send ``inputs`` pulses; returns the out1..outN trains."""
    outs = sorted((p for p in bc.outputs if p.startswith("out")), key=lambda p: int(p[3:]))
    if len(program) != len(outs):
        raise ValueError(f"program has {len(program)} bits, circuit has {len(outs)} outputs")
    stim, _ = dmx_program_script(program, inputs)
    res = simulate(bc, stim, em or ErrorModel.off(), seed)
    return PulseTrain({p: res.outputs[p] for p in outs})


def run_counter(
    bc: BehavioralCircuit, m: int, clocks: int | None = None, em: ErrorModel | None = None, seed: int = 0
) -> tuple[PulseTrain, float | None, SimResult]:
    """Program count ``m`` and stream clocks; returns (out train, first stop time, raw result)."""
    stim, _ = counter_script(m, _n_bits(bc), clocks)
    res = simulate(bc, stim, em or ErrorModel.off(), seed)
    stop = res.outputs["stop"]
    return PulseTrain({"out": res.outputs["out"]}), (stop[0] if stop else None), res
