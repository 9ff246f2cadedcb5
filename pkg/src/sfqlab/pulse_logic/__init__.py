"""Event-driven behavioral simulation of SFQ cell networks."""

from .cells import cell_step, run_cell
from .circuit import BehavioralCircuit, Instance, WiringError, behavioral_circuit, elaborate, realize_windows
from .errors import ErrorModel, ErrorStats
from .programs import counter_preload, counter_script, dmx_program_script, dmx_rotation_script, run_counter, run_dmx
from .simulate import SimResult, StimulusError, simulate

__all__ = [
    "BehavioralCircuit",
    "ErrorModel",
    "ErrorStats",
    "Instance",
    "SimResult",
    "StimulusError",
    "WiringError",
    "behavioral_circuit",
    "cell_step",
    "counter_preload",
    "counter_script",
    "dmx_program_script",
    "dmx_rotation_script",
    "elaborate",
    "realize_windows",
    "run_cell",
    "run_counter",
    "run_dmx",
    "simulate",
]
