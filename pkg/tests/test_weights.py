"""Weight function, modified frequency, decay exponent, and semigroup."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from softbte.params import ParameterError, WeightParams
from softbte.weights import (decay_exponent, nu_tilde, semigroup_G, weight,
                             weight_speed_sq)

admissible_q = st.floats(min_value=0.05, max_value=0.95)
admissible_theta = st.floats(min_value=0.0, max_value=3.0)
times = st.floats(min_value=0.0, max_value=50.0)


def _wp(q=0.5, vartheta=1.0, beta=3.5):
    return WeightParams(q=q, vartheta=vartheta, beta=beta)


class TestWeight:
    def test_value_at_origin(self):
        assert weight(np.zeros(3), 0.0, _wp()) == pytest.approx(1.0)

    def test_closed_form_at_t0(self):
        # at t = 0 the exponent rate is q/4
        wp = _wp(q=0.5)
        v = np.array([1.0, 2.0, -1.0])
        s2 = 6.0
        expected = (1.0 + s2) ** 3.5 * math.exp(0.5 / 4.0 * s2)
        assert weight(v, 0.0, wp) == pytest.approx(expected, rel=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(admissible_q, admissible_theta, times,
           st.floats(min_value=-5, max_value=5),
           st.floats(min_value=-5, max_value=5),
           st.floats(min_value=-5, max_value=5))
    def test_weight_at_least_one(self, q, theta, t, vx, vy, vz):
        wp = _wp(q=q, vartheta=theta)
        assert weight(np.array([vx, vy, vz]), t, wp) >= 1.0

    @settings(max_examples=50, deadline=None)
    @given(admissible_q, st.floats(min_value=0.1, max_value=3.0), times)
    def test_weight_non_increasing_in_time(self, q, theta, t):
        wp = _wp(q=q, vartheta=theta)
        v = np.array([1.5, -0.5, 2.0])
        assert weight(v, t + 0.5, wp) <= weight(v, t, wp) + 1e-12

    def test_speed_sq_variant_agrees(self):
        wp = _wp()
        v = np.array([0.3, -1.2, 2.2])
        assert weight(v, 1.7, wp) == pytest.approx(
            weight_speed_sq(float(v @ v), 1.7, wp), rel=1e-15)


class TestNuTilde:
    def test_reduces_to_nu_at_theta_zero(self):
        wp = _wp(vartheta=0.0)
        v = np.array([1.0, 1.0, 1.0])
        assert nu_tilde(v, 2.0, wp, 0.7) == pytest.approx(0.7)

    def test_correction_positive_and_decaying(self):
        wp = _wp(vartheta=1.0)
        v = np.array([2.0, 0.0, 0.0])
        early = nu_tilde(v, 0.0, wp, 0.7) - 0.7
        late = nu_tilde(v, 10.0, wp, 0.7) - 0.7
        assert early > late > 0.0


class TestDecayExponent:
    def test_reference_value(self):
        # gamma = -1, vartheta = 1: 1 + 2*(-1)/3 = 1/3
        assert decay_exponent(-1.0, 1.0) == pytest.approx(1.0 / 3.0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(min_value=-2.9, max_value=-0.1), st.data())
    def test_range_is_unit_interval(self, gamma, data):
        theta = data.draw(st.floats(min_value=0.0,
                                    max_value=-2.0 / gamma * 0.999,
                                    exclude_max=True))
        rho = decay_exponent(gamma, theta)
        assert 0.0 < rho < 1.0

    def test_monotone_in_vartheta(self):
        rhos = [decay_exponent(-1.0, th) for th in (0.0, 0.5, 1.0, 1.5)]
        assert all(a > b for a, b in zip(rhos, rhos[1:]))

    def test_domain_guard(self):
        with pytest.raises(ParameterError):
            decay_exponent(-1.0, 2.0)      # vartheta = -2/gamma excluded
        with pytest.raises(ParameterError):
            decay_exponent(0.5, 0.0)


class TestSemigroup:
    def test_identity_at_equal_times(self):
        wp = _wp()
        v = np.array([1.0, -2.0, 0.5])
        assert semigroup_G(0.8, v, 3.0, 3.0, wp) == pytest.approx(1.0)

    def test_rejects_reversed_interval(self):
        with pytest.raises(ValueError):
            semigroup_G(0.8, np.zeros(3), 2.0, 1.0, _wp())

    def test_closed_form_matches_quadrature_oracle(self):
        """exp(-int nu_tilde) via adaptive quadrature, 100 random triples."""
        rng = np.random.default_rng(42)
        wp = _wp(q=0.5, vartheta=1.0)
        for _ in range(100):
            v = rng.uniform(-4, 4, size=3)
            s = rng.uniform(0.0, 5.0)
            t = s + rng.uniform(0.0, 5.0)
            nu = rng.uniform(0.3, 3.0)
            integral, _ = quad(lambda tau: nu_tilde(v, tau, wp, nu), s, t,
                               epsabs=1e-13, epsrel=1e-13)
            oracle = math.exp(-integral)
            value = float(semigroup_G(nu, v, s, t, wp))
            assert abs(value - oracle) <= 1e-10 * max(abs(oracle), 1e-300)

    @settings(max_examples=50, deadline=None)
    @given(admissible_q, st.floats(min_value=0.0, max_value=2.0),
           st.floats(min_value=0.0, max_value=5.0),
           st.floats(min_value=0.0, max_value=5.0),
           st.floats(min_value=0.0, max_value=5.0))
    def test_cocycle_identity(self, q, theta, t0, d1, d2):
        wp = _wp(q=q, vartheta=theta)
        v = np.array([1.0, 0.5, -1.5])
        t1, t2 = t0 + d1, t0 + d1 + d2
        combined = semigroup_G(0.9, v, t0, t2, wp)
        chained = semigroup_G(0.9, v, t0, t1, wp) * semigroup_G(0.9, v, t1, t2, wp)
        assert combined == pytest.approx(chained, rel=1e-12, abs=1e-300)

    def test_vartheta_zero_is_pure_exponential(self):
        wp = _wp(vartheta=0.0)
        v = np.array([2.0, 0.0, 0.0])
        assert semigroup_G(1.3, v, 1.0, 4.0, wp) == pytest.approx(
            math.exp(-1.3 * 3.0), rel=1e-14)
