import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfcx, voigt_profile, wofz

from qdcoherence.core import DegenerateProfileError, VoigtParams
from qdcoherence.lineshape import (
    G1Curve,
    TruncationError,
    coherence_time,
    faddeeva,
    fourier_limit,
    g1_voigt,
    numeric_fwhm,
    voigt_eval,
    voigt_fwhm,
)


def test_faddeeva_against_wofz():
    rng = np.random.default_rng(0)
    z = rng.uniform(-30, 30, 4000) + 1j * 10 ** rng.uniform(-6, 1.5, 4000)
    ref = wofz(z)
    assert np.max(np.abs(faddeeva(z).real / ref.real - 1)) < 1e-6
    assert np.max(np.abs(faddeeva(z) - ref) / np.abs(ref)) < 1e-6


def test_faddeeva_frozen_values():
    # w(i) = erfcx(1), w(1 + i) from a reference implementation
    assert faddeeva(1j) == pytest.approx(0.42758357615580705)
    assert faddeeva(1 + 1j) == pytest.approx(0.30474420525691260 + 0.20821893820283163j, rel=1e-7)


def test_voigt_shape_matches_scipy_profile():
    p = VoigtParams(0.4, 3.28)
    x = np.linspace(-10, 10, 401)
    sigma = 3.28 / (2 * math.sqrt(2 * math.log(2)))
    ref = voigt_profile(x, sigma, 0.2)
    assert np.allclose(voigt_eval(x, p), ref / voigt_profile(0.0, sigma, 0.2), rtol=1e-7, atol=1e-12)


def test_voigt_eval_amplitude_center_offset():
    p = VoigtParams(0.5, 1.0, center=2.0, amplitude=3.0, offset=0.25)
    assert voigt_eval(2.0, p) == pytest.approx(3.25)
    assert voigt_eval(1.0, p) == pytest.approx(voigt_eval(3.0, p))


def test_pure_limits():
    x = np.linspace(-5, 5, 101)
    assert np.allclose(voigt_eval(x, VoigtParams(1.0, 0.0)), 0.25 / (x**2 + 0.25))
    s = 2.0 / (2 * math.sqrt(2 * math.log(2)))
    assert np.allclose(voigt_eval(x, VoigtParams(0.0, 2.0)), np.exp(-0.5 * (x / s) ** 2))


def test_fwhm_endpoints_exact():
    assert voigt_fwhm(0.37, 0.0) == 0.37
    assert voigt_fwhm(0.0, 0.37) == 0.37


def test_fwhm_degenerate_and_negative():
    with pytest.raises(DegenerateProfileError):
        voigt_fwhm(0.0, 0.0)
    with pytest.raises(ValueError):
        voigt_fwhm(-1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 50.0), st.floats(1e-3, 50.0))
def test_fwhm_approximation_property(gh, gi):
    assert voigt_fwhm(gh, gi) / numeric_fwhm(VoigtParams(gh, gi)) == pytest.approx(1.0, abs=5e-4)


def test_numeric_fwhm_of_pure_profiles():
    assert numeric_fwhm(VoigtParams(0.8, 0.0)) == pytest.approx(0.8, rel=1e-12)
    assert numeric_fwhm(VoigtParams(0.0, 0.8)) == pytest.approx(0.8, rel=1e-12)
    assert voigt_fwhm(0.4, 3.28, exact=True) == numeric_fwhm(VoigtParams(0.4, 3.28))


def test_g1_limits():
    tau = np.array([0.0, 100.0, 1000.0])
    assert np.allclose(g1_voigt(tau, VoigtParams(1.0, 0.0)), np.exp(-math.pi * tau * 1e-3))
    assert g1_voigt(0.0, VoigtParams(0.4, 3.28)) == 1.0
    assert g1_voigt(-250.0, VoigtParams(0.4, 3.28)) == g1_voigt(250.0, VoigtParams(0.4, 3.28))


def _t2_oracle(gh, gi):
    """Closed form of the integral of exp(-b|t| - a t^2) over the real line."""
    a = math.pi**2 * gi**2 / (2 * math.log(2))
    b = 2 * math.pi * gh
    if a == 0:
        return 2 / b
    return math.sqrt(math.pi / a) * erfcx(b / (2 * math.sqrt(a)))


@pytest.mark.parametrize("gh,gi", [(1.0, 0.0), (0.0, 1.0), (0.4, 3.28), (0.98, 9.31), (0.05, 0.01)])
def test_coherence_time_against_erfcx(gh, gi):
    assert coherence_time(VoigtParams(gh, gi)) == pytest.approx(_t2_oracle(gh, gi), rel=1e-8)


def test_coherence_time_lorentzian_is_one_over_pi_gamma():
    assert coherence_time(VoigtParams(0.0931, 0.0)) == pytest.approx(1 / (math.pi * 0.0931), rel=1e-9)


def test_fourier_limit_round_trip():
    t2, g = fourier_limit(1.71)
    assert t2 == 3.42
    assert coherence_time(VoigtParams(g, 0.0)) == pytest.approx(t2, rel=1e-9)
    with pytest.raises(ValueError):
        fourier_limit(0.0)


def test_sampled_curve_matches_closed_form():
    p = VoigtParams(0.4, 3.28)
    d = np.linspace(0, 1500, 3001)
    t2, err = coherence_time(G1Curve(delays=d, values=g1_voigt(d, p)), full_output=True)
    assert t2 == pytest.approx(coherence_time(p), rel=1e-6)
    assert err < 1e-6


def test_sampled_two_sided_curve():
    p = VoigtParams(1.0, 0.5)
    d = np.linspace(-3000, 3000, 6001)
    assert coherence_time(G1Curve(delays=d, values=g1_voigt(d, p))) == pytest.approx(coherence_time(p), rel=1e-6)


def test_truncated_sampled_curve_raises():
    p = VoigtParams(0.1, 0.0)
    d = np.linspace(0, 500, 101)
    with pytest.raises(TruncationError):
        coherence_time(G1Curve(delays=d, values=g1_voigt(d, p)))


def test_g1_curve_validation():
    with pytest.raises(ValueError):
        G1Curve()
    with pytest.raises(ValueError):
        G1Curve(delays=np.array([0.0, 2.0, 1.0]), values=np.ones(3))
