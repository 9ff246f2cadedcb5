"""Circuits under test: behavioral or analog, run once per (bias, temperature, trial)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..analog.pulses import detect_pulses
from ..analog.solver import SolverConfig, SolverError, transient
from ..netlist.builders import attach_stimulus, stimulus_span
from ..netlist.flatten import flatten
from ..netlist.grammar import Netlist
from ..netlist.library import CellLibrary, default_library
from ..physics import anneal as anneal_junction
from ..pulse_logic.circuit import BehavioralCircuit
from ..pulse_logic.errors import ErrorModel
from ..pulse_logic.simulate import SIM_STREAM, simulate
from ..rng import first_below, stream
from .patterns import Outcome, TestPattern


@dataclass(frozen=True)
class BehavioralTarget:
    """A behavioral circuit plus the error-model knobs held fixed during a search."""

    circuit: BehavioralCircuit
    model: ErrorModel = field(default_factory=ErrorModel)
    mode = "behavioral"

    @property
    def ports(self):
        return self.circuit.ports

    @property
    def anneal_factor(self) -> float:
        return self.model.anneal_factor

    def annealed(self, factor: float) -> "BehavioralTarget":
        if not 0 < factor <= 1:
            raise ValueError("anneal factor must lie in (0, 1]")
        return replace(self, model=self.model.at(anneal_factor=self.model.anneal_factor * factor))

    def describe(self) -> dict:
        m = self.model
        return {
            "mode": self.mode,
            "title": self.circuit.title,
            "cells": len(self.circuit.instances),
            "jitter_seed": self.circuit.jitter_seed,
            "anneal_factor": m.anneal_factor,
            "windows": m.windows,
            "thermal": m.thermal,
            "edge_shift": m.edge_shift,
            "tau_vuln": m.tau_vuln,
            "f_attempt": m.f_attempt,
            "tc": m.tc,
        }

    def run_trials(self, pattern: TestPattern, beta: float, temperature: float, seeds) -> list[Outcome]:
        """Outcome per trial seed.

        The error-free path is simulated once while recording the error
        probability of every draw it makes; a trial whose draws all stay above
        those probabilities reproduces that path exactly and is not re-run.
        """
        em = self.model.at(bias_scale=beta, temperature=temperature)
        trace: list[float] = []
        base = simulate(self.circuit, pattern.stimuli, em, 0, draw_trace=trace)
        base_out = _outcome(pattern, base)
        probs = np.asarray(trace)
        out = []
        for s in seeds:
            if len(probs) and first_below(stream(s, SIM_STREAM), probs) >= 0:
                out.append(_outcome(pattern, simulate(self.circuit, pattern.stimuli, em, s)))
            else:
                out.append(base_out)
        return out


def _outcome(pattern: TestPattern, res) -> Outcome:
    o = pattern.evaluate(res.outputs)
    if res.aborted:
        return Outcome(False, o.missing, o.extraneous)
    return o


@dataclass(frozen=True)
class AnalogTarget:
    """A netlist simulated by the transient solver; thermal noise supplies the trial-to-trial spread."""

    netlist: Netlist
    lib: CellLibrary = field(default_factory=default_library)
    dt: float = 0.1e-12
    noise: bool = True
    anneal_factor: float = 1.0
    mode = "analog"

    @property
    def ports(self):
        return tuple(self.netlist.port_decls)

    def annealed(self, factor: float) -> "AnalogTarget":
        if not 0 < factor <= 1:
            raise ValueError("anneal factor must lie in (0, 1]")
        return replace(self, anneal_factor=self.anneal_factor * factor)

    def describe(self) -> dict:
        return {"mode": self.mode, "title": self.netlist.title, "dt": self.dt, "noise": self.noise, "anneal_factor": self.anneal_factor}

    def run_trials(self, pattern: TestPattern, beta: float, temperature: float, seeds) -> list[Outcome]:
        n = attach_stimulus(self.netlist, pattern.stimuli.events, self.lib)
        fc = flatten(n, self.lib)
        if self.anneal_factor != 1.0:
            fc = fc.with_junctions(
                replace(j, params=anneal_junction(j.params, self.anneal_factor)) for j in fc.junctions
            )
        t_stop = stimulus_span([t for ts in pattern.stimuli.events.values() for t in ts])
        noisy = self.noise and temperature > 0
        out = []
        cache = None
        for s in seeds:
            if not noisy and cache is not None:
                out.append(cache)
                continue
            cfg = SolverConfig(dt=self.dt, t_stop=t_stop, bias_scale=beta, temperature=temperature, noise_enabled=noisy, seed=s)
            try:
                tr = transient(fc, cfg)
                res = pattern.evaluate(detect_pulses(tr))
            except SolverError:
                res = Outcome(False, 0, 0)
            cache = res
            out.append(res)
        return out


SYNTH_STREAM = 0x5E7A


@dataclass(frozen=True)
class SyntheticTarget:
    """Every trial fails independently: with probability ``p_in`` while the
    bias lies inside ``window`` and ``p_out`` outside it.

    The window is given at 4.2 K and scales with the junction Ic, so it sits
    at ``r * anneal_factor`` times its nominal edges at other temperatures.
    Used to check the margin protocol against closed-form answers.
    """

    window: tuple[float, float] = (0.8, 1.2)
    p_in: float = 0.0
    p_out: float = 1.0
    anneal_factor: float = 1.0
    tc: float = 8.5
    ports: tuple[str, ...] = ()
    mode = "synthetic"

    def annealed(self, factor: float) -> "SyntheticTarget":
        if not 0 < factor <= 1:
            raise ValueError("anneal factor must lie in (0, 1]")
        return replace(self, anneal_factor=self.anneal_factor * factor)

    def edges(self, temperature: float) -> tuple[float, float]:
        c = ErrorModel(temperature=temperature, tc=self.tc, anneal_factor=self.anneal_factor).ic_factor
        return c * self.window[0], c * self.window[1]

    def describe(self) -> dict:
        return {"mode": self.mode, "window": list(self.window), "p_in": self.p_in, "p_out": self.p_out, "anneal_factor": self.anneal_factor}

    def run_trials(self, pattern: TestPattern, beta: float, temperature: float, seeds) -> list[Outcome]:
        lo, hi = self.edges(temperature)
        p = self.p_in if lo <= beta <= hi else self.p_out
        return [Outcome(not stream(s, SYNTH_STREAM).random() < p, 0, 0) for s in seeds]

