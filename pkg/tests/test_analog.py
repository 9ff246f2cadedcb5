import numpy as np
import pytest

from sfqlab.analog import traces
from sfqlab.analog.calibrate import bench, passes
from sfqlab.analog.pulses import PulseTrain, detect_pulses, flux_quanta, pulse_area_check
from sfqlab.analog.solver import SolverConfig, SolverError, TopologyError, transient
from sfqlab.constants import PHI0
from sfqlab.netlist.builders import attach_stimulus, build_circuit, stimulus_span
from sfqlab.netlist.flatten import flatten
from sfqlab.netlist.grammar import parse
from sfqlab.netlist.library import default_library

LIB = default_library()
TOGGLES = tuple(100e-12 + 80e-12 * k for k in range(5))


def sd_chain_run(dt=0.1e-12, **kw):
    n = attach_stimulus(build_circuit("sd_chain", LIB), {"input": TOGGLES}, LIB)
    fc = flatten(n, LIB)
    cfg = SolverConfig(t_stop=stimulus_span(TOGGLES), dt=dt, **kw)
    return transient(fc, cfg)


@pytest.fixture(scope="module")
def sd_run():
    return sd_chain_run()


class TestSolver:
    def test_sd_chain_one_pulse_per_toggle(self, sd_run):
        out = detect_pulses(sd_run)
        assert out.count("out") == 5
        assert all(t > t0 for t, t0 in zip(out["out"], TOGGLES))

    def test_halving_dt_keeps_timing(self, sd_run):
        fine = detect_pulses(sd_chain_run(dt=0.05e-12))["out"]
        coarse = detect_pulses(sd_run)["out"]
        assert len(fine) == len(coarse)
        assert np.max(np.abs(np.subtract(fine, coarse))) < 0.5e-12

    def test_every_slip_carries_one_flux_quantum(self, sd_run):
        flux = pulse_area_check(sd_run, "xjtl1.b2", start=1)
        assert flux_quanta(flux) == pytest.approx(1.0, abs=0.02)

    def test_dead_bias_passes_nothing(self):
        tr = sd_chain_run(bias_scale=0.2)
        assert detect_pulses(tr).count("out") == 0

    def test_noise_is_seeded(self):
        a = sd_chain_run(noise_enabled=True, seed=3)
        b = sd_chain_run(noise_enabled=True, seed=3)
        c = sd_chain_run(noise_enabled=True, seed=4)
        assert np.array_equal(a.phases, b.phases)
        assert not np.array_equal(a.phases, c.phases)

    def test_zero_kelvin_noise_is_silent(self, sd_run):
        quiet = sd_chain_run(noise_enabled=True, temperature=4.2, seed=1)
        assert detect_pulses(quiet).count("out") == 5
        cold = sd_chain_run(noise_enabled=True, temperature=0.0, seed=1)
        ref = sd_chain_run(temperature=0.0)
        assert np.array_equal(cold.phases, ref.phases)

    def test_lower_temperature_raises_ic(self):
        text = ".model ov jj(icrit=100u, rsh=2, cap=1e-18, rn=1e9)\nB1 1 0 ov\nI1 0 1 dc(105u)\n"
        fc = flatten(parse(text))
        warm = transient(fc, SolverConfig(t_stop=200e-12, dt=0.02e-12, temperature=4.2))
        cold = transient(fc, SolverConfig(t_stop=200e-12, dt=0.02e-12, temperature=0.1))
        assert warm.final_slips[0] > 0
        assert cold.final_slips[0] == 0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(t_stop=1e-12, dt=0.0)
        with pytest.raises(ValueError):
            SolverConfig(t_stop=1e-12, dt=1e-12)

    def test_floating_node_rejected(self):
        text = ".model jj jj(icrit=100u, rsh=2, cap=50f)\nB1 1 2 jj\nI1 0 1 dc(10u)\n"
        with pytest.raises(SolverError):
            transient(flatten(parse(text)), SolverConfig(t_stop=10e-12))

    def test_topology_error_is_solver_error(self):
        assert issubclass(TopologyError, SolverError)


class TestPulses:
    def test_csv_round_trip(self):
        p = PulseTrain({"a": (1e-12, 2.5e-12), "b": (0.1,)})
        assert PulseTrain.from_csv(p.to_csv()) == p

    def test_csv_header_required(self):
        with pytest.raises(ValueError):
            PulseTrain.from_csv("a,1\n")

    def test_times_must_increase(self):
        with pytest.raises(ValueError):
            PulseTrain({"a": (2.0, 1.0)})

    def test_detect_by_junction(self, sd_run):
        assert detect_pulses(sd_run, {"x": "xjtl1.b2"}).count("x") == 5


class TestTraces:
    def test_binary_round_trip(self, sd_run):
        blob = traces.to_binary(sd_run)
        t, ch = traces.read_binary(blob)
        assert np.allclose(t, sd_run.time, rtol=0, atol=1e-20)
        name = f"phase:{sd_run.junction_names[0]}"
        assert np.array_equal(ch[name], sd_run.phases[:, 0])

    def test_corrupt_binary(self, sd_run):
        blob = traces.to_binary(sd_run, ["phase:xjtl1.b1"])
        with pytest.raises(traces.TraceFormatError):
            traces.read_binary(b"XXXX" + blob[4:])
        with pytest.raises(traces.TraceFormatError):
            traces.read_binary(blob[:-8])

    def test_csv_header(self, sd_run):
        text = traces.to_csv(sd_run, ["phase:xjtl1.b1", "vj:xjtl1.b1"])
        head = text.split("\r\n", 1)[0]
        assert head == "time,phase:xjtl1.b1,vj:xjtl1.b1"
        assert text.count("\r\n") == len(sd_run.time) + 1

    def test_unknown_channel(self, sd_run):
        with pytest.raises(KeyError):
            traces.channel(sd_run, "current:b1")


class TestCalibrationBench:
    @pytest.mark.parametrize("kind", ["jtl", "tff", "ndro"])
    def test_nominal_bias_passes(self, kind):
        assert passes(bench(kind, LIB), 1.0, lib=LIB)

    def test_far_outside_window_fails(self):
        lo, hi = LIB.spec("tff").window
        assert not passes(bench("tff", LIB), 0.5 * lo, lib=LIB)

    def test_single_flux_quantum_per_slip_constant(self):
        assert PHI0 == pytest.approx(2.067833848e-15, rel=1e-9)
