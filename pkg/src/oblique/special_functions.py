"""Modified Bessel functions used by the single-layer kernels.

The zeroth and first order functions K0, K1, I0 are evaluated through
``scipy.special`` (Cephes Chebyshev expansions, relative error near machine
precision).  The integer-order pair (I_m, K_m) used by the circle oracle is
built here from those seeds with the classical recurrences: upward for K_m
(the dominant solution in that direction) and a normalised backward (Miller)
recurrence for I_m.  The product I_m K_m is formed from ratios only, so it
stays finite even when I_m underflows or K_m overflows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special as sp

from .errors import NonPositiveArgument, OrderTooLarge

SCALED_THRESHOLD = 700.0
MAX_ORDER = 256


def _positive(x):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise NonPositiveArgument("Bessel argument must be > 0")
    return arr


def _out(arr, x):
    return float(arr) if np.ndim(x) == 0 else arr


def k0(x):
    """K0(x) for x > 0 (scalar or array)."""
    arr = _positive(x)
    return _out(sp.k0(arr), x)


def k1(x):
    """K1(x) for x > 0 (scalar or array)."""
    arr = _positive(x)
    return _out(sp.k1(arr), x)


def k0e(x):
    """Exponentially scaled e^x K0(x)."""
    arr = _positive(x)
    return _out(sp.k0e(arr), x)


def k1e(x):
    """Exponentially scaled e^x K1(x)."""
    arr = _positive(x)
    return _out(sp.k1e(arr), x)


def i0(x):
    """I0(x); accepts zero and negative arguments."""
    arr = np.asarray(x, dtype=float)
    return _out(sp.i0(arr), x)


@dataclass(frozen=True)
class BesselValue:
    """A K-function value that may be stored in scaled form.

    When ``scaled`` is true the true value is ``value * exp(-x)``.
    """

    value: float
    scaled: bool
    x: float

    def unscaled(self) -> float:
        return self.value * np.exp(-self.x) if self.scaled else self.value


def bessel_k(order: int, x: float) -> BesselValue:
    """K0 or K1 at a scalar argument with an underflow-safe representation.

    For ``x > 700`` the exponentially scaled value ``e^x K(x)`` is returned
    with ``scaled=True``; below that the plain value is returned.
    """
    if order not in (0, 1):
        raise ValueError("bessel_k supports orders 0 and 1 only")
    xf = float(_positive(x))
    if xf > SCALED_THRESHOLD:
        v = sp.k0e(xf) if order == 0 else sp.k1e(xf)
        return BesselValue(float(v), True, xf)
    v = sp.k0(xf) if order == 0 else sp.k1(xf)
    return BesselValue(float(v), False, xf)


def _check_order(m: int) -> int:
    if int(m) != m or m < 0:
        raise ValueError("order must be a nonnegative integer")
    m = int(m)
    if m > MAX_ORDER:
        raise OrderTooLarge(f"order {m} exceeds {MAX_ORDER}")
    return m


def _k_ratio(m: int, x: np.ndarray) -> np.ndarray:
    """K_{m+1}(x) / K_m(x) by upward recurrence of the ratio."""
    q = sp.k1e(x) / sp.k0e(x)
    for k in range(1, m + 1):
        q = 1.0 / q + 2.0 * k / x
    return q


def _i_ratios(m: int, x: np.ndarray) -> np.ndarray:
    """Ratios I_{k+1}(x)/I_k(x) for k = 0..m via backward recurrence.

    Returns an array of shape (m + 1,) + x.shape.  The backward recurrence
    of the ratio is the continued fraction for I_{k+1}/I_k, started far
    enough above max(m, x) that the truncation error is below roundoff.
    """
    start = m + int(np.max(x)) + 64
    r = np.zeros_like(x)
    out = np.empty((m + 1,) + x.shape)
    for k in range(start, -1, -1):
        # r holds I_{k+1}/I_k after this step
        r = 1.0 / (2.0 * (k + 1) / x + r)
        if k <= m:
            out[k] = r
    return out


def im_km(m: int, x):
    """The pair (I_m(x), K_m(x)) for integer 0 <= m <= 256.

    K_m is obtained by upward recurrence from K0, K1 and I_m by multiplying
    the backward-recurrence ratios onto I0.  Either value may underflow or
    overflow for extreme (m, x); use :func:`im_km_product` when only the
    product is needed.
    """
    m = _check_order(m)
    arr = _positive(x)
    xs = np.atleast_1d(arr)
    with np.errstate(over="ignore", under="ignore"):
        k_prev, k_cur = sp.k0(xs), sp.k1(xs)
        if m == 0:
            kval = k_prev
        else:
            for k in range(1, m):
                k_prev, k_cur = k_cur, k_prev + 2.0 * k / xs * k_cur
            kval = k_cur
        ratios = _i_ratios(m, xs)
        ival = sp.i0(xs) * np.prod(ratios[:m], axis=0) if m else sp.i0(xs)
    if np.ndim(x) == 0:
        return float(ival[0]), float(kval[0])
    return ival, kval


def im_km_product(m: int, x):
    """I_m(x) K_m(x) without forming either factor.

    Uses the Wronskian I_m K_{m+1} + I_{m+1} K_m = 1/x, which gives
    I_m K_m = 1 / (x (K_{m+1}/K_m + I_{m+1}/I_m)).
    """
    m = _check_order(m)
    arr = _positive(x)
    xs = np.atleast_1d(arr)
    kr = _k_ratio(m, xs)
    ir = _i_ratios(m, xs)[m]
    val = 1.0 / (xs * (kr + ir))
    return float(val[0]) if np.ndim(x) == 0 else val
