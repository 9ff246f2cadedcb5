import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from sfqlab.analog.pulses import PulseTrain
from sfqlab.constants import PHI0
from sfqlab.margin_lab import (
    BehavioralTarget,
    Criterion,
    SyntheticTarget,
    adr_grid,
    anneal_whatif,
    cancelling_anneal_factor,
    find_margins,
    normalize_series,
    null_pattern,
    pattern_for,
    sweep_temperature,
)
from sfqlab.margin_lab.margins import evaluate_point, trial_seeds
from sfqlab.margin_lab.patterns import Expect, TestPattern, force_extraneous, pc_pattern
from sfqlab.margin_lab.pcm import (
    InsufficientDataError,
    IVCurve,
    NoSwitchError,
    extract_ic,
    extract_inductance,
    ic_temperature_series,
    read_two_column_csv,
    solve_three_inductances,
    synthesize_iv,
    synthesize_vphi,
    write_two_column_csv,
)
from sfqlab.physics import ic_scale
from sfqlab.pulse_logic import ErrorModel, behavioral_circuit, simulate

NULL = null_pattern()
RES = 0.0025


class TestCriterion:
    def test_protocol_threshold(self):
        c = Criterion()
        assert c.passes(9)
        assert not c.passes(10)
        assert c.fail_threshold == 10

    @settings(max_examples=80, deadline=None)
    @given(rate=st.floats(0.01, 1.0), trials=st.integers(1, 300))
    def test_threshold_is_boundary(self, rate, trials):
        c = Criterion(rate, trials)
        k = c.fail_threshold
        assert not c.passes(k)
        assert k == 0 or c.passes(k - 1)

    def test_validation(self):
        with pytest.raises(ValueError):
            Criterion(0.0)
        with pytest.raises(ValueError):
            Criterion(0.1, 0)


class TestSyntheticMargins:
    def test_recovers_window(self):
        rep = find_margins(SyntheticTarget(), NULL, 4.2)
        assert rep.interval == pytest.approx((0.8, 1.2), abs=RES)

    @pytest.mark.parametrize("t", [0.01, 0.1, 1.0, 3.0])
    def test_interval_scales_with_r(self, t):
        r = float(ic_scale(t, 8.5))
        rep = find_margins(SyntheticTarget(), NULL, t)
        assert rep.interval[0] == pytest.approx(0.8 * r, abs=RES)
        assert rep.interval[1] == pytest.approx(1.2 * r, abs=RES)
        assert rep.center == pytest.approx(r, abs=RES)

    def test_empty_when_nothing_passes(self):
        rep = find_margins(SyntheticTarget(window=(3.0, 4.0)), NULL, 4.2)
        assert rep.interval is None
        assert not rep.functional
        assert rep.width == 0.0
        assert rep.center is None

    def test_run_containing_one_preferred(self):
        class TwoWindows(SyntheticTarget):
            def run_trials(self, pattern, beta, temperature, seeds):
                ok = 0.6 <= beta <= 0.7 or 0.9 <= beta <= 1.1
                return SyntheticTarget(window=(0, 10) if ok else (5, 6)).run_trials(pattern, beta, temperature, seeds)

        rep = find_margins(TwoWindows(), NULL, 4.2)
        assert rep.interval == pytest.approx((0.9, 1.1), abs=RES)

    def test_widest_run_otherwise(self):
        class Off(SyntheticTarget):
            def run_trials(self, pattern, beta, temperature, seeds):
                ok = 0.6 <= beta <= 0.7 or 1.2 <= beta <= 1.5
                return SyntheticTarget(window=(0, 10) if ok else (5, 6)).run_trials(pattern, beta, temperature, seeds)

        rep = find_margins(Off(), NULL, 4.2)
        assert rep.interval == pytest.approx((1.2, 1.5), abs=RES)

    def test_anneal_restores_interval(self):
        f = cancelling_anneal_factor(0.01)
        res = anneal_whatif(SyntheticTarget(), f, NULL, 0.01)
        assert res.after.interval == pytest.approx((0.8, 1.2), abs=RES)
        assert res.before.center == pytest.approx(float(ic_scale(0.01, 8.5)), abs=RES)

    def test_anneal_factor_range(self):
        with pytest.raises(ValueError):
            anneal_whatif(SyntheticTarget(), 1.5, NULL, 0.01)

    def test_sweep_range_checked(self):
        with pytest.raises(ValueError):
            find_margins(SyntheticTarget(), NULL, 4.2, sweep_range=(1.2, 0.8))


class TestBinomialOracle:
    @pytest.mark.parametrize("p", [0.05, 0.15])
    def test_point_verdict_is_exact_count(self, p):
        crit = Criterion()
        tg = SyntheticTarget(window=(0, 10), p_in=p)
        for k in range(40):
            beta = 1.0 + 0.01 * k
            pt = evaluate_point(tg, NULL, beta, 4.2, crit, 3)
            fails = sum(not o.passed for o in tg.run_trials(NULL, beta, 4.2, trial_seeds(3, beta, 100)))
            assert pt.failures == fails
            assert crit.passes(pt.failures) == (fails < 10)

    def test_pass_fraction_follows_binomial(self):
        crit = Criterion()
        tg = SyntheticTarget(window=(0, 10), p_in=0.08)
        verdicts = [crit.passes(evaluate_point(tg, NULL, 1 + k * 1e-3, 4.2, crit, 0).failures) for k in range(300)]
        exact = float(binom.cdf(9, 100, 0.08))
        sd = math.sqrt(exact * (1 - exact) / 300)
        assert abs(np.mean(verdicts) - exact) < 4 * sd

    @settings(max_examples=30, deadline=None)
    @given(p=st.floats(0.0, 0.4), seed=st.integers(0, 1000))
    def test_early_stop_keeps_verdict(self, p, seed):
        tg = SyntheticTarget(window=(0, 10), p_in=p)
        full = evaluate_point(tg, NULL, 1.0, 4.2, Criterion(), seed)
        fast = evaluate_point(tg, NULL, 1.0, 4.2, Criterion(early_stop=True), seed)
        assert Criterion().passes(full.failures) == Criterion().passes(fast.failures)
        assert fast.trials <= full.trials


class TestDeterminism:
    def test_schedule_independent(self):
        tg = SyntheticTarget(p_in=0.05)
        a = find_margins(tg, NULL, 4.2, seed=9)
        b = find_margins(tg, NULL, 4.2, seed=9, jobs=3)
        assert a.to_json() == b.to_json()

    def test_seed_changes_points(self):
        tg = SyntheticTarget(p_in=0.05)
        a = find_margins(tg, NULL, 4.2, seed=1)
        b = find_margins(tg, NULL, 4.2, seed=2)
        assert [p.failures for p in a.points] != [p.failures for p in b.points]


class TestReports:
    @pytest.fixture(scope="class")
    @staticmethod
    def report():
        return find_margins(SyntheticTarget(), NULL, 4.2, seed=4)

    def test_json(self, report):
        d = json.loads(report.to_json())
        assert d["schema_version"] == 1
        assert d["seed"] == 4
        assert d["interval"] == list(report.interval)
        assert len(d["points"]) == len(report.points)

    def test_csv(self, report):
        lines = report.to_csv().split("\r\n")
        assert lines[0] == "temperature_K,bias_scale,error_rate,in_margin,center,width"
        assert len([x for x in lines if x]) == len(report.points) + 1

    def test_half_width(self, report):
        assert report.half_width_pct == pytest.approx(100 * 0.2, abs=0.5)

    def test_sweep_series(self):
        temps = [0.1, 2.0, 4.2]
        s = sweep_temperature(SyntheticTarget(), NULL, temps)
        assert s.center_ratio(0.1, 4.2) == pytest.approx(float(ic_scale(0.1, 8.5)), abs=0.01)
        assert max(s.normalized_centers) == 1.0
        rows = [x for x in s.summary_csv().split("\r\n") if x]
        assert len(rows) == 4

    def test_sweep_temperatures_ascending(self):
        with pytest.raises(ValueError):
            sweep_temperature(SyntheticTarget(), NULL, [4.2, 0.1])


class TestGrid:
    def test_adr_grid(self):
        g = adr_grid()
        assert len(g) == 42
        assert g[0] == 0.1 and g[-1] == 4.2

    def test_normalize(self):
        assert normalize_series([1.0, 2.0, 4.0]) == [0.25, 0.5, 1.0]
        with pytest.raises(ValueError):
            normalize_series([])


class TestPatterns:
    def test_evaluate_counts(self):
        pat = TestPattern("t", PulseTrain({"a": (1.0,)}), (Expect(0.0, 10.0, {"x": 2}),))
        assert pat.evaluate(PulseTrain({"x": (1.0, 2.0)})).passed
        o = pat.evaluate(PulseTrain({"x": (1.0,)}))
        assert (o.passed, o.missing, o.extraneous) == (False, 1, 0)
        o = pat.evaluate(force_extraneous(PulseTrain({"x": (1.0, 2.0)}), "x", 3.0))
        assert (o.passed, o.extraneous) == (False, 1)

    def test_ordering(self):
        pat = pc_pattern(2, 8)
        start = pat.expect[1].start
        good = PulseTrain({"out": (start + 1, start + 2), "stop": (start + 3,)})
        early = PulseTrain({"out": (start + 1, start + 4), "stop": (start + 3,)})
        assert pat.evaluate(good).passed
        assert not pat.evaluate(early).passed

    @pytest.mark.parametrize("kind", ["sd_chain", "divider4", "d2f", "ndro_switch", "dmx", "prog_counter"])
    def test_default_patterns_pass_error_free(self, kind):
        bc = behavioral_circuit(kind)
        pat = pattern_for(kind)
        pat.check_ports(bc.ports)
        assert pat.evaluate(simulate(bc, pat.stimuli, ErrorModel.off()).outputs).passed

    def test_port_check(self):
        with pytest.raises(KeyError):
            pattern_for("dmx").check_ports(["input"])


class TestBehavioralTarget:
    @pytest.mark.parametrize("beta", [1.0, 1.27, 1.29])
    def test_shortcut_matches_full_runs(self, beta):
        tg = BehavioralTarget(behavioral_circuit("divider4"))
        pat = pattern_for("divider4")
        seeds = trial_seeds(0, beta, 30)
        fast = tg.run_trials(pat, beta, 4.2, seeds)
        em = ErrorModel(bias_scale=beta)
        slow = [pat.evaluate(simulate(tg.circuit, pat.stimuli, em, s).outputs) for s in seeds]
        assert fast == slow

    def test_windows_only_interval_scales(self):
        tg = BehavioralTarget(behavioral_circuit("divider4"), ErrorModel(thermal=False))
        pat = pattern_for("divider4")
        warm = find_margins(tg, pat, 4.2, Criterion(early_stop=True))
        cold = find_margins(tg, pat, 0.1, Criterion(early_stop=True))
        r = float(ic_scale(0.1, 8.5))
        assert cold.interval[0] == pytest.approx(r * warm.interval[0], abs=2 * RES)
        assert cold.interval[1] == pytest.approx(r * warm.interval[1], abs=2 * RES)


class TestPCM:
    @pytest.mark.parametrize("ic", [10e-6, 20e-6, 100e-6])
    def test_extract_ic(self, ic):
        assert extract_ic(synthesize_iv(ic, 10)) == pytest.approx(ic, rel=0.005)

    def test_extract_ic_with_noise(self):
        iv = synthesize_iv(100e-6, 10, noise=2e-6, seed=1)
        assert extract_ic(iv) == pytest.approx(100e-6, rel=0.01)

    def test_descending_sweep(self):
        iv = synthesize_iv(50e-6, 10)
        rev = IVCurve(iv.current[::-1], iv.voltage[::-1], 10)
        assert extract_ic(rev) == pytest.approx(extract_ic(iv), rel=1e-12)

    def test_no_switch(self):
        with pytest.raises(NoSwitchError):
            extract_ic(synthesize_iv(100e-6, 10, i_max=90e-6))

    @settings(max_examples=40, deadline=None)
    @given(l=st.floats(2e-12, 100e-12), phase=st.floats(0, 6.28), periods=st.floats(2.5, 8))
    def test_extract_inductance(self, l, phase, periods):
        v = synthesize_vphi(l, periods=periods, phase=phase)
        assert extract_inductance(v) == pytest.approx(l, rel=0.01)

    def test_too_few_periods(self):
        with pytest.raises(InsufficientDataError):
            extract_inductance(synthesize_vphi(10e-12, periods=1.9))

    def test_period_is_flux_quantum(self):
        l = 8e-12
        v = synthesize_vphi(l, periods=4)
        assert PHI0 / extract_inductance(v) == pytest.approx(PHI0 / l, rel=0.01)

    def test_three_inductances(self):
        l1, l2, l3 = 16e-12, 9e-12, 7e-12
        got = solve_three_inductances(l1 + l2, l2 + l3, l1 + l3)
        assert got == pytest.approx((l1, l2, l3), rel=1e-12)

    def test_csv_round_trip(self):
        x, y = np.linspace(0, 1, 11), np.linspace(1, 2, 11)
        a, b = read_two_column_csv(write_two_column_csv(x, y))
        assert np.array_equal(a, x) and np.array_equal(b, y)

    def test_csv_errors(self):
        with pytest.raises(ValueError):
            read_two_column_csv("")
        with pytest.raises(ValueError):
            read_two_column_csv("a,b\n1,x\n")

    def test_ic_follows_temperature(self):
        vals = ic_temperature_series(20e-6, [4.2, 0.1])
        assert vals[1] / vals[0] == pytest.approx(float(ic_scale(0.1, 8.5)), rel=0.005)
