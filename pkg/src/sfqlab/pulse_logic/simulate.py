"""Discrete-event simulation of behavioral circuits."""

from __future__ import annotations

from dataclasses import dataclass
import heapq

import numpy as np

from ..analog.pulses import PulseTrain
from ..netlist.library import KIND_PORTS, STORAGE_KINDS
from ..rng import UniformBlock, stream
from .cells import cell_step
from .circuit import BehavioralCircuit
from .errors import ErrorModel

SIM_STREAM = 0x51A1
# operations allowed per stimulus event before a run is declared runaway
OPS_PER_STIMULUS = 32
OPS_PER_CELL = 8


class StimulusError(KeyError):
    pass


@dataclass(frozen=True)
class SimResult:
    outputs: PulseTrain
    operations: int
    dropped: int  # operations lost below the window
    extraneous: int  # spurious pulses from operations above the window
    thermal_errors: int
    aborted: bool = False  # operation budget exhausted (runaway pulse multiplication)

    @property
    def clean(self) -> bool:
        return not (self.dropped or self.extraneous or self.thermal_errors or self.aborted)


def _strict(times: list[float]) -> tuple[float, ...]:
    times.sort()
    for k in range(1, len(times)):
        if times[k] <= times[k - 1]:
            times[k] = float(np.nextafter(times[k - 1], np.inf))
    return tuple(times)


def simulate(
    bc: BehavioralCircuit,
    stimuli: PulseTrain,
    em: ErrorModel | None = None,
    seed: int = 0,
    max_ops: int | None = None,
    draw_trace: list | None = None,
) -> SimResult:
    """Run ``stimuli`` through ``bc``; the result holds the observed output ports.

    With ``draw_trace`` given, no random draws are made: the run follows the
    error-free path and appends the error probability of every operation that
    would have drawn. A seeded run takes the same path for as long as its
    draws stay above those probabilities.
    """
    em = em or ErrorModel()
    for port in stimuli.ports:
        if port not in bc.inputs:
            raise StimulusError(f"stimulus port {port!r} is not a circuit input")
    n = len(bc.instances)
    kinds = [x.kind for x in bc.instances]
    delays = [x.spec.delay for x in bc.instances]
    status = [em.window_status(x.window, x.spec) for x in bc.instances]
    prob = [em.storage_error_rate(x.spec) for x in bc.instances]
    first_out = [KIND_PORTS[k][1][0] if KIND_PORTS[k][1] else None for k in kinds]
    storage = [k in STORAGE_KINDS for k in kinds]
    state = [0] * n
    watch_ops = {i: p for p, (i, o) in bc.outputs.items() if o is None}
    watch_emit = {(i, o): p for p, (i, o) in bc.outputs.items() if o is not None}
    observed: dict[str, list[float]] = {p: [] for p in bc.outputs}
    draws = UniformBlock(stream(seed, SIM_STREAM)) if any(prob) and draw_trace is None else None

    queue: list = []
    seq = 0
    for port in stimuli.ports:
        for t in stimuli[port]:
            for i, p in bc.inputs[port]:
                queue.append((t, seq, i, p))
                seq += 1
    heapq.heapify(queue)
    budget = max_ops if max_ops is not None else OPS_PER_STIMULUS * max(1, seq) + OPS_PER_CELL * n

    def emit(i, o, t):
        nonlocal seq
        if (i, o) in watch_emit:
            observed[watch_emit[(i, o)]].append(t)
        for j, p in bc.fanout.get((i, o), ()):
            heapq.heappush(queue, (t, seq, j, p))
            seq += 1

    ops = dropped = extraneous = thermal = 0
    aborted = False
    while queue:
        t, _, i, port = heapq.heappop(queue)
        ops += 1
        if ops > budget:
            aborted = True
            break
        st = status[i]
        if st < 0:
            dropped += 1
            continue
        outs, state[i] = cell_step(kinds[i], state[i], port)
        extra = st > 0
        if extra:
            extraneous += 1
        if prob[i] and draw_trace is not None:
            draw_trace.append(prob[i])
        elif prob[i] and draws.next() < prob[i]:
            thermal += 1
            if storage[i]:
                state[i] ^= 1
            else:
                extra = True
        t_out = t + delays[i]
        if i in watch_ops:
            observed[watch_ops[i]].append(t_out)
        for o in outs:
            emit(i, o, t_out)
        if extra:
            t_x = t_out + delays[i]
            if first_out[i] is None:
                if i in watch_ops:
                    observed[watch_ops[i]].append(t_x)
            else:
                emit(i, first_out[i], t_x)
    return SimResult(
        PulseTrain({p: _strict(ts) for p, ts in observed.items()}),
        ops,
        dropped,
        extraneous,
        thermal,
        aborted,
    )
