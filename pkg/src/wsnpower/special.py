"""Scalar special functions backing the divergence and censoring formulas.

Provides the exponential integral Ei on the negative real axis, a scaled
variant of E1 that stays finite for large arguments (used to evaluate
exp(a)*Ei(-b) products without overflow), and the Gaussian tail function Q
with its inverse.
"""

from __future__ import annotations

import math

from scipy.special import erfcinv as _erfcinv

from .errors import NumericError, ParameterError

_EULER_GAMMA = 0.57721566490153286061
_SERIES_LIMIT = 1.0
_MAX_SERIES_TERMS = 200
_MAX_CF_ITERATIONS = 400
_TINY = 1e-300


def exp_integral_e1_scaled(z: float) -> float:
    """Scaled exponential integral exp(z) * E1(z) for z > 0.

    The scaled form is bounded by 1/z for large z, so products of the form
    exp(-y) * exp(z) * E1(z) can be evaluated without overflow even when z is
    in the thousands.

    Args:
        z: Strictly positive argument.

    Returns:
        exp(z) * E1(z) to roughly 1e-13 relative accuracy.

    Raises:
        ParameterError: If z <= 0.
        NumericError: If the continued fraction fails to converge.
    """
    if not z > 0.0:
        raise ParameterError(f"scaled E1 requires z > 0, got {z!r}")
    if z < _SERIES_LIMIT:
        return math.exp(z) * _e1_series(z)
    return _e1_scaled_continued_fraction(z)


def exp_integral_ei(x: float) -> float:
    """Exponential integral Ei(x) for negative arguments.

    Uses the alternating power series for small |x| and a modified-Lentz
    continued fraction for large |x|; only negative arguments arise in the
    divergence closed forms.

    Args:
        x: Strictly negative argument.

    Returns:
        Ei(x) to roughly 1e-13 relative accuracy.

    Raises:
        ParameterError: If x >= 0.
    """
    if not x < 0.0:
        raise ParameterError(f"Ei is evaluated only for x < 0, got {x!r}")
    z = -x
    if z < _SERIES_LIMIT:
        return -_e1_series(z)
    return -math.exp(-z) * _e1_scaled_continued_fraction(z)


def _e1_series(z: float) -> float:
    # E1(z) = -gamma - ln z + sum_{k>=1} (-1)^{k+1} z^k / (k * k!)
    total = -_EULER_GAMMA - math.log(z)
    term = z  # k = 1 term
    total += term
    for k in range(2, _MAX_SERIES_TERMS):
        term *= -z * (k - 1) / (k * k)
        total += term
        if abs(term) < 1e-17 * abs(total):
            return total
    raise NumericError(f"E1 series did not converge for z = {z!r}")


def _e1_scaled_continued_fraction(z: float) -> float:
    # exp(z) E1(z) = 1 / (z + 1 - 1^2/(z + 3 - 2^2/(z + 5 - 3^2/(...))))
    # evaluated with the modified Lentz algorithm.
    b = z + 1.0
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for k in range(1, _MAX_CF_ITERATIONS):
        a = -(k * k)
        b += 2.0
        d = b + a * d
        if abs(d) < _TINY:
            d = _TINY
        c = b + a / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise NumericError(f"E1 continued fraction did not converge for z = {z!r}")


def gaussian_q(x: float) -> float:
    """Gaussian tail probability Q(x) = Pr(Z > x) for standard normal Z."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def gaussian_q_inv(p: float) -> float:
    """Inverse of the Gaussian tail function: x with Q(x) = p, p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ParameterError(f"Q-inverse requires p in (0, 1), got {p!r}")
    return math.sqrt(2.0) * float(_erfcinv(2.0 * p))
