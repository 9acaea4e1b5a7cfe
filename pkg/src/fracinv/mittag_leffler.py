"""Two-parameter Mittag-Leffler function for real arguments.

``E_{a,b}(z) = sum_k z^k / Gamma(a k + b)``.

Three regimes are used:

* the power series in double precision when ``|z| <= 1``;
* for ``0 < a < 1`` and ``|z| > 1`` a real-line integral representation
  (contour deformed onto the negative real axis) with ``b <= 1``; larger ``b``
  are reduced with ``E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z``;
* for ``a >= 1`` the series summed in extended precision with mpmath, the
  working precision raised by the digits lost to cancellation.
"""
from __future__ import annotations

import math
import warnings

import mpmath
import numpy as np
from scipy import integrate
from scipy.special import rgamma

__all__ = ["mittag_leffler", "EvaluationError"]


class EvaluationError(ArithmeticError):
    """The selected evaluation regime did not reach its accuracy target."""


_SERIES_RADIUS = 1.0
_MAX_TERMS = 20000


def _series(a, b, z):
    total = 0.0
    comp = 0.0
    k = 0
    while k < _MAX_TERMS:
        term = z**k * rgamma(a * k + b)
        # Kahan summation keeps the alternating tail honest
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if k > 2 and abs(term) <= 1e-17 * max(abs(total), 1e-300) and a * k + b > 2:
            return total
        k += 1
    raise EvaluationError(f"series for E_{a},{b}({z}) did not converge in {_MAX_TERMS} terms")


def _series_mp(a, b, z):
    # largest term magnitude bounds the digits lost to cancellation
    ks = np.arange(0, 4000)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        logs = ks * math.log(abs(z)) - np.array([math.lgamma(a * k + b) if a * k + b > 0 else 0.0 for k in ks])
    lost = max(0.0, float(np.nanmax(logs)) / math.log(10))
    if lost > 300:
        raise EvaluationError(f"series cancellation too severe for E_{a},{b}({z})")
    with mpmath.workdps(int(lost) + 30):
        zz = mpmath.mpf(z)
        total = mpmath.mpf(0)
        k = 0
        while True:
            term = zz**k * mpmath.rgamma(a * k + b)
            total += term
            if k > 5 and abs(term) < mpmath.mpf(10) ** (-25) * max(abs(total), mpmath.mpf(10) ** (-300)):
                break
            k += 1
            if k > 100000:
                raise EvaluationError("extended-precision series did not converge")
        return float(total)


def _sinpi(x):
    return 0.0 if x == round(x) else math.sin(math.pi * x)


def _integral(a, b, z):
    """Integral representation for 0 < a < 1, b <= 1, z != 0 real."""
    s1 = _sinpi(1.0 - b)
    s2 = _sinpi(1.0 - b + a)
    c = math.cos(math.pi * a)
    expo = (1.0 - b) / a

    def kern(x):
        return math.exp(-x ** (1.0 / a)) * (x * s1 - z * s2) / (x * x - 2.0 * x * z * c + z * z)

    upper = 750.0**a  # exp(-x^(1/a)) underflows beyond this
    split = min(1.0, upper)
    # algebraic endpoint weight handles x^expo near 0
    # the error estimates are checked below, so quad's own warnings are redundant
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        left, err1 = integrate.quad(kern, 0.0, split, weight="alg", wvar=(expo, 0.0),
                                    epsabs=0.0, epsrel=1e-13, limit=400)
        pts = [p for p in (abs(z),) if split < p < upper]
        right, err2 = integrate.quad(lambda x: x**expo * kern(x), split, upper, points=pts or None,
                                     epsabs=0.0, epsrel=1e-13, limit=400)
    val = (left + right) / (math.pi * a)
    err = (err1 + err2) / (math.pi * a)
    if z > 0:
        # residue contribution when |arg z| < a*pi
        try:
            val += z**expo * math.exp(z ** (1.0 / a)) / a
        except OverflowError:
            return math.inf
    if not math.isfinite(val):
        return val
    if err > 1e-11 * max(abs(val), 1e-300) and err > 1e-300:
        raise EvaluationError(f"quadrature error {err:.2e} too large for E_{a},{b}({z}) = {val:.3e}")
    return val


def _scalar(a, b, z):
    if z == 0.0:
        return float(rgamma(b))
    if abs(z) <= _SERIES_RADIUS:
        return _series(a, b, z)
    if a >= 1.0:
        return _series_mp(a, b, z)
    if b > 1.0:
        # step b down; the representation holds for b < 1 + a but the
        # endpoint singularity x^((1-b)/a) is only benign for b <= 1
        return (_scalar(a, b - a, z) - float(rgamma(b - a))) / z
    return _integral(a, b, z)


def mittag_leffler(alpha, beta, z):
    """Evaluate ``E_{alpha,beta}(z)`` for real ``z`` (scalar or array).

    Parameters
    ----------
    alpha, beta : float
        Positive parameters.
    z : float or array_like

    Raises
    ------
    EvaluationError
        When the chosen regime cannot reach ~1e-10 relative accuracy.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    a, b = float(alpha), float(beta)
    zs = np.asarray(z, dtype=float)
    if zs.ndim == 0:
        return _scalar(a, b, float(zs))
    return np.array([_scalar(a, b, float(v)) for v in zs.ravel()]).reshape(zs.shape)
