"""Scalar functions of the geodesic distance on S^n.

``S_n(d) = (n * int_0^d sin^{n-1}(s) ds)^{1/n}`` is the comparison profile,
``c_n`` the transport cost built from it, and ``v_n``, ``w_n``, ``mu`` the
comparison factors whose combination reproduces ``n - c_n``.

All evaluators accept scalars or numpy arrays and are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# sin^2(d) <= 1/2 below this angle: the positive sin-series converges at rate 1/2.
_SERIES_MAX_ANGLE = math.pi / 4
_SERIES_TERMS = 60


def _check_angle(d, upper=math.pi):
    d = np.asarray(d, dtype=float)
    if np.any(~np.isfinite(d)) or np.any(d < 0.0) or np.any(d > upper):
        raise ValueError(f"angle outside [0, {upper}]")
    return d


def _sin_power_series(m: int, d: np.ndarray) -> np.ndarray:
    # int_0^d sin^m = int_0^{sin d} x^m (1 - x^2)^{-1/2} dx, expanded termwise;
    # every term is positive so there is no cancellation.
    x = np.sin(d)
    x2 = x * x
    acc = np.zeros_like(x)
    coeffs = np.empty(_SERIES_TERMS)
    coeffs[0] = 1.0
    for k in range(1, _SERIES_TERMS):
        coeffs[k] = coeffs[k - 1] * (2 * k - 1) / (2 * k)
    for k in range(_SERIES_TERMS - 1, -1, -1):
        acc = acc * x2 + coeffs[k] / (m + 2 * k + 1)
    return acc * x ** (m + 1)


def _sin_power_recurrence(m: int, d: np.ndarray) -> np.ndarray:
    s, c = np.sin(d), np.cos(d)
    if m % 2 == 0:
        val, k = d.copy(), 0
    else:
        # 1 - cos d without cancellation
        val, k = 2.0 * np.sin(0.5 * d) ** 2, 1
    while k < m:
        k += 2
        val = ((k - 1) * val - c * s ** (k - 1)) / k
    return val


def sin_power_integral(m: int, d):
    """Return ``int_0^d sin(s)^m ds`` for integer ``m >= 0`` and ``d`` in [0, pi].

    Uses the two-step recurrence ``I_m = ((m-1) I_{m-2} - cos d sin^{m-1} d) / m``
    for ``d > pi/4``. Below that the forward recurrence cancels catastrophically,
    so a positive power series in ``sin d`` is summed instead.
    """
    if int(m) != m or m < 0:
        raise ValueError("m must be a non-negative integer")
    m = int(m)
    d_arr = _check_angle(d)
    scalar = d_arr.ndim == 0
    d_arr = np.atleast_1d(d_arr)
    out = np.empty_like(d_arr)
    small = d_arr <= _SERIES_MAX_ANGLE
    if np.any(small):
        out[small] = _sin_power_series(m, d_arr[small])
    if np.any(~small):
        out[~small] = _sin_power_recurrence(m, d_arr[~small])
    return float(out[0]) if scalar else out


def s_fn(n: int, d):
    """Comparison profile ``S_n(d) = (n int_0^d sin^{n-1})^{1/n}``.

    Satisfies ``sin d <= S_n(d) <= d`` on [0, pi].
    """
    _check_dimension(n)
    return (n * sin_power_integral(n - 1, d)) ** (1.0 / n)


def _check_dimension(n):
    if int(n) != n or n < 2:
        raise ValueError("dimension n must be an integer >= 2")


@dataclass(frozen=True)
class ComparisonFactors:
    v: float | np.ndarray
    w: float | np.ndarray
    mu: float | np.ndarray


def comparison_factors(n: int, alpha) -> ComparisonFactors:
    """Bishop volume factor ``v``, trace factor ``w`` and the function ``mu``.

    ``v = (sin a / a)^{(n-1)/n}``, ``w = (n-1) a / tan a`` and
    ``mu = S_n(a) / (a v)``, defined on the open interval (0, pi).
    """
    _check_dimension(n)
    a = np.asarray(alpha, dtype=float)
    if np.any(~(a > 0.0)) or np.any(~(a < math.pi)):
        raise ValueError("alpha must lie in the open interval (0, pi)")
    v = (np.sin(a) / a) ** ((n - 1) / n)
    w = (n - 1) * a * np.cos(a) / np.sin(a)
    mu = s_fn(n, a) / (a * v)
    if a.ndim == 0:
        return ComparisonFactors(float(v), float(w), float(mu))
    return ComparisonFactors(v, w, mu)


def _cost_direct(n: int, d: np.ndarray) -> np.ndarray:
    s = s_fn(n, d)
    sin_d = np.sin(d)
    return n - (sin_d / s) ** (n - 1) - (n - 1) * s * np.cos(d) / sin_d


@dataclass(frozen=True)
class CostFunction:
    """The cost ``c_n`` as a function of geodesic distance.

    ``c_n(0) = 0`` and ``c_n(pi) = infinity_sentinel``. Below
    ``series_threshold`` the quadratic ``(n-1) d^2 / 2`` is returned, since the
    direct formula is dominated by cancellation there.
    """

    n: int
    series_threshold: float = 1e-4
    infinity_sentinel: float = math.inf

    def __post_init__(self):
        _check_dimension(self.n)

    def __call__(self, d):
        d_arr = _check_angle(d)
        scalar = d_arr.ndim == 0
        d_arr = np.atleast_1d(d_arr)
        out = np.empty_like(d_arr)
        small = d_arr < self.series_threshold
        at_pi = d_arr == math.pi
        mid = ~(small | at_pi)
        out[small] = 0.5 * (self.n - 1) * d_arr[small] ** 2
        out[at_pi] = self.infinity_sentinel
        if np.any(mid):
            out[mid] = _cost_direct(self.n, d_arr[mid])
        return float(out[0]) if scalar else out

    @property
    def tag(self) -> str:
        return f"c_{self.n}"


@dataclass(frozen=True)
class QuadraticCost:
    """``(n-1) d^2 / 2``: the classical cost with the non-sharp constant."""

    n: int

    def __post_init__(self):
        _check_dimension(self.n)

    def __call__(self, d):
        d_arr = _check_angle(d)
        out = 0.5 * (self.n - 1) * d_arr**2
        return float(out) if out.ndim == 0 else out

    @property
    def tag(self) -> str:
        return f"quad_{self.n}"


def cost(n: int, d):
    """Evaluate ``c_n(d)`` with the default branch threshold."""
    return CostFunction(n)(d)
