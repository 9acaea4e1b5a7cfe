import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erfcx

from fracinv.mittag_leffler import mittag_leffler


def ml_series_mp(a, b, z, max_terms=20000):
    """Brute-force series in extended precision, independent of the module.

    Returns ``None`` when the series needs more than ``max_terms`` terms.
    """
    # digits lost to cancellation are bounded by the largest term
    k = np.arange(max_terms)
    with np.errstate(divide="ignore"):
        logs = k * math.log(abs(z)) - np.array([math.lgamma(a * j + b) for j in k]) if z else -k
    if logs[-1] > -80:
        return None
    dps = 40 + int(max(0.0, logs.max()) / math.log(10))
    with mpmath.workdps(dps):
        # parameters enter in full precision, otherwise rounding in a*j+b is amplified
        zz, aa, bb = mpmath.mpf(z), mpmath.mpf(a), mpmath.mpf(b)
        n = int(np.argmax(logs < -80)) + 1
        return float(mpmath.fsum(zz**j * mpmath.rgamma(aa * j + bb) for j in range(n)))


def ml_talbot(a, b, z):
    """``E_{a,b}(-x)`` as the inverse Laplace transform of ``s^(a-b) / (s^a + x)`` at ``t = 1``."""
    with mpmath.workdps(30):
        return float(mpmath.invertlaplace(lambda s: s ** (a - b) / (s**a - z), 1, method="talbot"))


def test_constant_term():
    for a, b in [(0.3, 0.7), (0.5, 1.0), (0.9, 2.0), (1.0, 1.0)]:
        assert mittag_leffler(a, b, 0.0) == pytest.approx(1 / math.gamma(b), rel=1e-15)


def test_exponential_identity():
    assert mittag_leffler(1.0, 1.0, 1.0) == pytest.approx(math.e, rel=1e-14)
    for z in (-20.0, -3.0, 0.5, 4.0):
        assert mittag_leffler(1.0, 1.0, z) == pytest.approx(math.exp(z), rel=1e-12)


def test_half_order_against_erfcx():
    # E_{1/2,1}(-x) = exp(x^2) erfc(x)
    for x in (0.1, 1.0, 3.0, 10.0, 100.0, 1e4):
        assert mittag_leffler(0.5, 1.0, -x) == pytest.approx(float(erfcx(x)), rel=1e-12)


def test_half_half_at_minus_one():
    ref = ml_series_mp(0.5, 0.5, -1.0)
    assert mittag_leffler(0.5, 0.5, -1.0) == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("a", [0.1, 0.3, 0.5, 0.7, 0.9])
@pytest.mark.parametrize("b", [None, 1.0, 2.0])
def test_against_extended_series(a, b):
    b = a if b is None else b
    checked = 0
    for z in np.linspace(-5, 5, 21):
        ref = ml_series_mp(a, b, z)
        if ref is None:
            # series impractical (small a, large |z|); Laplace inversion for z < 0
            if z >= 0:
                continue
            ref = ml_talbot(a, b, z)
        val = mittag_leffler(a, b, z)
        assert abs(val - ref) <= 1e-12 * max(1.0, abs(ref)), (a, b, z, val, ref)
        checked += 1
    assert checked >= 11


@pytest.mark.parametrize("a", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("b", [0.5, 1.0, 1.7])
def test_large_negative_against_laplace_inversion(a, b):
    for x in (10.0, 1e2, 1e3, 1e5):
        assert mittag_leffler(a, b, -x) == pytest.approx(ml_talbot(a, b, -x), rel=1e-10)


@pytest.mark.parametrize("a", [0.2, 0.5, 0.8])
def test_complete_monotonicity_samples(a):
    t = np.linspace(0, 50, 101)
    v = mittag_leffler(a, 1.0, -t)
    assert np.all(v > 0) and np.all(np.diff(v) < 0)


def test_array_input_shape():
    z = np.array([[-1.0, -2.0], [0.0, 0.5]])
    out = mittag_leffler(0.6, 1.0, z)
    assert out.shape == (2, 2)
    assert out[1, 0] == 1.0


def test_rejects_nonpositive_parameters():
    with pytest.raises(ValueError):
        mittag_leffler(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        mittag_leffler(0.5, -1.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.05, 0.95), z=st.floats(-50.0, -1.0))
def test_beta_recurrence(a, z):
    # E_{a,b}(z) = 1/Gamma(b) + z E_{a,a+b}(z)
    lhs = mittag_leffler(a, 1.0, z)
    rhs = 1.0 + z * mittag_leffler(a, 1.0 + a, z)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
