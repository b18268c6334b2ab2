from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdk.mittag_leffler import (
    asymptotic_radius,
    ml_asymptotic,
    ml_contour,
    ml_series,
    mittag_leffler,
    series_radius,
)


def _mp_series(alpha, beta, x, dps=60):
    """Extended-precision Taylor series; only used where it converges quickly."""
    with mp.workdps(dps):
        a, b, z = mp.mpf(alpha), mp.mpf(beta), mp.mpf(x)
        return float(mp.nsum(lambda k: z**k * mp.rgamma(a * k + b), [0, mp.inf]))


def test_known_closed_forms():
    assert mittag_leffler(1.0, 1.0, -1.0) == pytest.approx(math.exp(-1), abs=1e-15)
    # E_{1/2,1}(-x) = exp(x^2) erfc(x)
    assert mittag_leffler(0.5, 1.0, -1.0) == pytest.approx(0.42758357615580705, abs=1e-15)
    for x in (0.1, 2.0, 7.5, 30.0, 300.0):
        expect = float(mp.exp(mp.mpf(x) ** 2) * mp.erfc(x))
        assert mittag_leffler(0.5, 1.0, -x) == pytest.approx(expect, rel=1e-12)
    # E_{1,2}(-x) = (1 - e^-x) / x
    for x in (0.5, 3.0):
        assert mittag_leffler(1.0, 2.0, -x) == pytest.approx(-math.expm1(-x) / x, rel=1e-14)
    assert mittag_leffler(0.7, 1.0, 0.0) == 1.0
    assert mittag_leffler(0.7, 2.0, 0.0) == pytest.approx(1.0)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.7, 0.9])
@pytest.mark.parametrize("beta", [1.0, 2.0])
def test_against_extended_precision(alpha, beta):
    # points spanning all three regimes, kept where the mp series is affordable
    xs = [x for x in np.geomspace(1e-3, 60.0, 12) if x ** (1 / alpha) < 120]
    got = mittag_leffler(alpha, beta, -np.array(xs))
    for x, g in zip(xs, got):
        big = max(k * math.log10(x) - math.lgamma(alpha * k + beta) / math.log(10) for k in range(400))
        ref = _mp_series(alpha, beta, -x, dps=int(max(big, 0)) + 40)
        assert g == pytest.approx(ref, rel=1e-11)


@pytest.mark.parametrize("alpha", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
def test_evaluators_agree_at_switch_radii(alpha):
    for beta in (1.0, 1.5, 2.0):
        rs = np.array([-series_radius(alpha)])
        ra = np.array([-asymptotic_radius(alpha, beta)])
        np.testing.assert_allclose(ml_series(alpha, beta, rs), ml_contour(alpha, beta, rs), rtol=1e-9)
        np.testing.assert_allclose(ml_contour(alpha, beta, ra), ml_asymptotic(alpha, beta, ra), rtol=1e-9)


def test_alpha_one_far_field_uses_extended_precision():
    # the double precision series would lose everything at x = 40
    assert mittag_leffler(1.0, 1.0, -40.0) == pytest.approx(math.exp(-40.0), rel=1e-12)


def test_array_shape_and_scalar():
    x = -np.linspace(0, 50, 12).reshape(3, 4)
    out = mittag_leffler(0.5, 1.0, x)
    assert out.shape == (3, 4)
    assert isinstance(mittag_leffler(0.5, 1.0, -2.0), float)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        mittag_leffler(0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        mittag_leffler(0.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        mittag_leffler(0.5, -1.0, -1.0)
    with pytest.raises(ValueError):
        mittag_leffler(0.5, 1.0, np.nan)


@given(alpha=st.floats(0.05, 0.99), x=st.floats(0.0, 1e6))
@settings(max_examples=200, deadline=None)
def test_completely_monotone_bounds(alpha, x):
    # E_{alpha,1}(-x) lies in (0, 1] and is bounded by 1 / (1 + x / Gamma(1 + alpha))
    v = mittag_leffler(alpha, 1.0, -x)
    assert 0.0 < v <= 1.0 + 1e-15
    assert v <= 1.0 / (1.0 + x / math.gamma(1.0 + alpha)) * (1 + 1e-9)


@given(alpha=st.floats(0.05, 0.95), x=st.floats(1e-3, 1e4), ratio=st.floats(1.001, 3.0))
@settings(max_examples=200, deadline=None)
def test_monotone_decreasing(alpha, x, ratio):
    a, b = mittag_leffler(alpha, 1.0, np.array([-x, -x * ratio]))
    assert b <= a * (1 + 1e-12)


def test_asymptotic_radius_at_least_series_radius():
    for a in np.linspace(0.05, 0.95, 19):
        for b in (1.0, 2.0):
            assert asymptotic_radius(a, b) >= series_radius(a)
