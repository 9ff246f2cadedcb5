"""Test patterns: a stimulus script plus the response it must produce."""

from __future__ import annotations

from dataclasses import dataclass, field
import math

from ..analog.pulses import PulseTrain
from ..pulse_logic.programs import SLOT, _Script, counter_preload, counter_script, dmx_rotation_script


@dataclass(frozen=True)
class Expect:
    """Exact pulse counts per port for events in [start, end)."""

    start: float
    end: float
    counts: dict[str, int]


@dataclass(frozen=True)
class Outcome:
    passed: bool
    missing: int
    extraneous: int


@dataclass(frozen=True)
class TestPattern:
    """Stimuli and expected response.

    Pass rule: in every window each listed port carries exactly the expected
    number of pulses (a shortfall counts as missing pulses, a surplus as
    extraneous ones), and for every (a, b) in ``ordered`` the first pulse on
    b comes after the last pulse on a.
    """

    __test__ = False  # not a pytest class

    name: str
    stimuli: PulseTrain
    expect: tuple[Expect, ...]
    ordered: tuple[tuple[str, str], ...] = ()
    params: dict = field(default_factory=dict)

    @property
    def ports(self) -> set[str]:
        return {p for e in self.expect for p in e.counts} | set(self.stimuli.ports)

    def expected_totals(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.expect:
            for p, n in e.counts.items():
                out[p] = out.get(p, 0) + n
        return out

    def evaluate(self, outputs: PulseTrain) -> Outcome:
        missing = extraneous = 0
        for e in self.expect:
            for port, n in e.counts.items():
                got = sum(1 for t in outputs[port] if e.start <= t < e.end)
                missing += max(0, n - got)
                extraneous += max(0, got - n)
        ok = missing == 0 and extraneous == 0
        for a, b in self.ordered:
            if outputs[a] and outputs[b] and outputs[b][0] <= outputs[a][-1]:
                ok = False
        return Outcome(ok, missing, extraneous)

    def check_ports(self, ports) -> None:
        missing = self.ports - set(ports)
        if missing:
            raise KeyError(f"pattern {self.name!r} uses ports the circuit lacks: {sorted(missing)}")


def dmx_rotation_pattern(n_out: int, per_channel: int = 4, slot: float = SLOT) -> TestPattern:
    """Clear with n_out serial clocks, latch one bit, then per channel send
    ``per_channel`` inputs (all on the selected output, none elsewhere) and shift."""
    if not isinstance(n_out, int) or n_out < 2:
        raise ValueError("n_out must be >= 2")
    stim, phases = dmx_rotation_script(n_out, per_channel, slot)
    outs = [f"out{k}" for k in range(1, n_out + 1)]
    windows = [Expect(0.0, phases[0][0], {p: 0 for p in outs})]
    for k, (start, _) in enumerate(phases):
        end = phases[k + 1][0] if k + 1 < n_out else math.inf
        windows.append(Expect(start, end, {p: (per_channel if i == k else 0) for i, p in enumerate(outs)}))
    return TestPattern("dmx_rotation", stim, tuple(windows), params={"n_out": n_out, "per_channel": per_channel})


def pc_pattern(m: int, n_bits: int = 8, clocks: int | None = None, slot: float = SLOT) -> TestPattern:
    """Program P = 2^N - m, load, stream clocks; exactly m outputs, then one stop."""
    counter_preload(m, n_bits)  # range check
    stim, start = counter_script(m, n_bits, clocks, slot)
    windows = (Expect(0.0, start, {"out": 0, "stop": 0}), Expect(start, math.inf, {"out": m, "stop": 1}))
    return TestPattern("pc_count", stim, windows, (("out", "stop"),), {"m": m, "n_bits": n_bits, "clocks": clocks})


def sd_chain_pattern(toggles: int = 10, slot: float = SLOT) -> TestPattern:
    s = _Script(slot=slot)
    s.send("input", toggles)
    return TestPattern("sd_chain", s.train(), (Expect(0.0, math.inf, {"out": toggles}),), params={"toggles": toggles})


def divider_pattern(pulses: int = 16, slot: float = SLOT) -> TestPattern:
    s = _Script(slot=slot)
    s.send("input", pulses)
    return TestPattern("divider4", s.train(), (Expect(0.0, math.inf, {"out": pulses // 4}),), params={"pulses": pulses})


def d2f_pattern(rounds: int = 4, slot: float = SLOT) -> TestPattern:
    """Alternate (data, clock) with empty clocks; every loaded bit leaves on both outputs."""
    s = _Script(slot=slot)
    for _ in range(rounds):
        s.send("data")
        s.send("clock")
        s.send("clock")
    exp = {"out1": rounds, "out2": rounds}
    return TestPattern("d2f", s.train(), (Expect(0.0, math.inf, exp),), params={"rounds": rounds})


def ndro_switch_pattern(reads: int = 3, rounds: int = 2, slot: float = SLOT) -> TestPattern:
    """set, reads, reset, reads; the gated output follows the stored bit."""
    s = _Script(slot=slot)
    for _ in range(rounds):
        s.send("set")
        s.send("input", reads)
        s.send("reset")
        s.send("input", reads)
    exp = {"out": rounds * reads, "through": 2 * rounds * reads}
    return TestPattern("ndro_switch", s.train(), (Expect(0.0, math.inf, exp),), params={"reads": reads, "rounds": rounds})


def null_pattern() -> TestPattern:
    """No stimuli and no expectations; for targets that decide pass/fail themselves."""
    return TestPattern("null", PulseTrain(), ())


def pattern_for(kind: str, slot: float = SLOT, **params) -> TestPattern:
    """Default pattern for a generated circuit kind."""
    if kind == "sd_chain":
        return sd_chain_pattern(slot=slot)
    if kind == "divider4":
        return divider_pattern(slot=slot)
    if kind == "d2f":
        return d2f_pattern(slot=slot)
    if kind == "ndro_switch":
        return ndro_switch_pattern(slot=slot)
    if kind == "dmx":
        return dmx_rotation_pattern(int(params.get("n_out", 4)), slot=slot)
    if kind == "prog_counter":
        return pc_pattern(int(params.get("m", 8)), int(params.get("n_bits", 8)), slot=slot)
    raise KeyError(f"no default pattern for {kind!r}")


def force_extraneous(outputs: PulseTrain, port: str, t: float) -> PulseTrain:
    """Copy of ``outputs`` with one extra pulse on ``port`` at ``t``."""
    ev = {p: list(ts) for p, ts in outputs.events.items()}
    ev.setdefault(port, []).append(t)
    return PulseTrain.from_unsorted(ev)
