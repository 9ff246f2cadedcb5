import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfqlab import physics
from sfqlab.constants import KB, PHI0
from sfqlab.physics import (
    JunctionParams,
    MaterialParams,
    PhysicsDomainError,
    ab_critical_current,
    anneal,
    escape_barrier_over_kt,
    gap_ratio,
    ic_at,
    ic_ratio,
    johnson_sigma,
)

TC = 8.5

# Frozen from a 50-digit mpmath evaluation of the gap / Ic(T) formulas.
ORACLE_GAP_4_25 = 0.9402266403927275
ORACLE_IC_4_2 = 0.8791237203364582
ORACLE_IC_2_5 = 0.9856720103143967
ORACLE_AB0_RN100 = 2.0249968850677912e-05
ORACLE_SIGMA_2OHM_4K2 = 3.4055031346337064e-05
ORACLE_BARRIER_0 = 113.50975705798503
ORACLE_BARRIER_0_9 = 3.401406561892789


def junction(**kw):
    base = dict(ic_ref=20e-6, rn=100.0, r_shunt=2.0, cap=50e-15, material=MaterialParams(tc=TC))
    base.update(kw)
    return JunctionParams(**base)


class TestGapRatio:
    def test_limits(self):
        assert gap_ratio(0.0, TC) == 1.0
        assert gap_ratio(TC, TC) == 0.0
        assert gap_ratio(12.0, TC) == 0.0

    def test_midpoint(self):
        assert gap_ratio(4.25, TC) == pytest.approx(ORACLE_GAP_4_25, rel=1e-12)
        assert round(gap_ratio(4.25, TC), 4) == 0.9402

    @pytest.mark.parametrize("t,tc", [(-0.1, TC), (1.0, 0.0), (1.0, -2.0)])
    def test_domain(self, t, tc):
        with pytest.raises(PhysicsDomainError):
            gap_ratio(t, tc)

    def test_array_input(self):
        out = gap_ratio(np.array([0.0, 4.25, 9.0]), TC)
        np.testing.assert_allclose(out, [1.0, ORACLE_GAP_4_25, 0.0], rtol=1e-12)


class TestIcRatio:
    def test_reference_point(self):
        assert ic_ratio(4.2, TC) == pytest.approx(0.879, abs=0.005)
        assert ic_ratio(4.2, TC) == pytest.approx(ORACLE_IC_4_2, rel=1e-12)

    def test_saturation(self):
        assert ic_ratio(0.1, TC) == pytest.approx(1.0, abs=1e-9)
        assert ic_ratio(0.0, TC) == 1.0
        assert ic_ratio(TC, TC) == 0.0

    def test_2p5(self):
        assert ic_ratio(2.5, TC) == pytest.approx(ORACLE_IC_2_5, rel=1e-12)

    @given(st.floats(0, TC), st.floats(0, TC))
    def test_monotone(self, a, b):
        t1, t2 = min(a, b), max(a, b)
        assert ic_ratio(t1, TC) >= ic_ratio(t2, TC)

    @given(st.floats(0.1, 2.5))
    def test_flat_below_2p5(self, t):
        assert 1 - ic_ratio(t, TC) / ic_ratio(0.1, TC) < 0.015


class TestIcAt:
    def test_reference_maps_to_itself(self):
        assert ic_at(4.2, junction()) == pytest.approx(20e-6, rel=1e-14)

    def test_millikelvin_increase(self):
        assert ic_at(0.1, junction()) == pytest.approx(22.75e-6, abs=0.15e-6)

    def test_annealed(self):
        j = junction(anneal_factor=0.85)
        assert ic_at(0.1, j) == pytest.approx(0.85 * ic_at(0.1, junction()), rel=1e-14)
        assert ic_at(0.1, j) == pytest.approx(19.34e-6, abs=0.01e-6)


class TestAmbegaokarBaratoff:
    def test_zero_temperature(self):
        m = MaterialParams(tc=TC)
        assert ab_critical_current(0.0, 100.0, m) == pytest.approx(ORACLE_AB0_RN100, rel=1e-12)
        assert ab_critical_current(1e-6, 100.0, m) == pytest.approx(20.25e-6, abs=0.01e-6)

    def test_gap_closed(self):
        assert ab_critical_current(TC, 37.0, MaterialParams(tc=TC)) == 0.0

    def test_ratio(self):
        m = MaterialParams(tc=TC)
        r = ab_critical_current(4.2, 50.0, m) / ab_critical_current(0.0, 50.0, m)
        assert r == pytest.approx(0.879, abs=0.005)

    @given(st.floats(1e-3, TC - 1e-6), st.floats(1.0, 1e4))
    def test_composes_to_ic_ratio(self, t, rn):
        m = MaterialParams(tc=TC)
        r = ab_critical_current(t, rn, m) / ab_critical_current(0.0, rn, m)
        assert r == pytest.approx(ic_ratio(t, TC), rel=1e-9, abs=1e-300)


class TestJohnsonSigma:
    def test_zero_temperature(self):
        assert johnson_sigma(2.0, 0.0, 1e-13) == 0.0

    def test_value(self):
        assert johnson_sigma(2.0, 4.2, 1e-13) == pytest.approx(ORACLE_SIGMA_2OHM_4K2, rel=1e-12)
        assert johnson_sigma(2.0, 4.2, 1e-13) == pytest.approx(34.0e-6, abs=0.1e-6)

    def test_quadruple_temperature(self):
        assert johnson_sigma(2.0, 16.8, 1e-13) == pytest.approx(2 * ORACLE_SIGMA_2OHM_4K2, rel=1e-12)
        assert johnson_sigma(2.0, 16.8, 1e-13) == pytest.approx(68.1e-6, abs=0.1e-6)

    @given(st.floats(0.1, 100), st.floats(0.01, 10), st.floats(1e-14, 1e-11), st.floats(1.5, 10))
    def test_scaling(self, r, t, dt, k):
        s = johnson_sigma(r, t, dt)
        assert johnson_sigma(r, k * t, dt) == pytest.approx(s * math.sqrt(k), rel=1e-12)
        assert johnson_sigma(k * r, t, dt) == pytest.approx(s / math.sqrt(k), rel=1e-12)
        assert johnson_sigma(r, t, k * dt) == pytest.approx(s / math.sqrt(k), rel=1e-12)


class TestEscapeBarrier:
    def test_vanishes_at_critical(self):
        assert escape_barrier_over_kt(1.0, 10e-6, 4.2) == 0.0
        assert escape_barrier_over_kt(1.3, 10e-6, 4.2) == 0.0

    def test_zero_bias(self):
        assert escape_barrier_over_kt(0.0, 10e-6, 4.2) == pytest.approx(ORACLE_BARRIER_0, rel=1e-12)
        assert escape_barrier_over_kt(0.0, 10e-6, 4.2) == pytest.approx(113.5, abs=0.5)

    def test_near_critical(self):
        assert escape_barrier_over_kt(0.9, 10e-6, 4.2) == pytest.approx(ORACLE_BARRIER_0_9, rel=1e-10)
        assert escape_barrier_over_kt(0.9, 10e-6, 4.2) == pytest.approx(3.41, abs=0.05)

    @given(st.floats(1e-7, 1e-3), st.floats(0.005, 8.0))
    def test_zero_bias_identity(self, ic, t):
        expected = 2 * PHI0 * ic / (2 * math.pi)
        assert escape_barrier_over_kt(0.0, ic, t) * KB * t == pytest.approx(expected, rel=1e-12)

    @settings(max_examples=50)
    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assert escape_barrier_over_kt(lo, 20e-6, 1.0) >= escape_barrier_over_kt(hi, 20e-6, 1.0)


class TestAnneal:
    def test_identity(self):
        j = junction()
        assert anneal(j, 1.0) == j

    def test_reduces_ic_at_reference(self):
        assert ic_at(4.2, anneal(junction(), 0.85)) == pytest.approx(17e-6, rel=1e-12)

    def test_composes(self):
        j = anneal(anneal(junction(), 0.9), 0.9)
        assert j.anneal_factor == pytest.approx(0.81)
        assert (j.rn, j.r_shunt, j.cap) == (100.0, 2.0, 50e-15)

    @pytest.mark.parametrize("factor", [0.0, -0.2, 1.01])
    def test_domain(self, factor):
        with pytest.raises(PhysicsDomainError):
            anneal(junction(), factor)


def test_junction_invariants():
    with pytest.raises(PhysicsDomainError):
        junction(ic_ref=0.0)
    with pytest.raises(PhysicsDomainError):
        junction(t_ref=9.0)
    with pytest.raises(PhysicsDomainError):
        MaterialParams(tc=-1)
    assert MaterialParams(tc=TC).gap0 == pytest.approx(1.76 * KB * TC)


def test_module_exports_scale_helper():
    assert physics.ic_scale(0.01, TC) == pytest.approx(1.1374963237452858, rel=1e-12)
