"""Bessel functions of the first kind for small integer orders.

Evaluation is vectorized over ``x``. Small arguments use the ascending
power series; everything else goes through Miller's backward recurrence
normalized with ``J_0 + 2 * sum(J_2m) = 1``.
"""

from __future__ import annotations

import math

import numpy as np

MAX_ORDER = 5
# one above MAX_ORDER, needed by the derivative identity
_MAX_INTERNAL_ORDER = MAX_ORDER + 1

# above this the alternating series loses more than ~1e-14 to cancellation
SERIES_CUTOFF = 4.0
_SERIES_TERMS = 40
_RESCALE = 1e200


def _check_order(order: int, limit: int = MAX_ORDER) -> int:
    if int(order) != order or order < 0:
        raise ValueError(f"Bessel order must be a nonnegative integer, got {order!r}")
    if order > limit:
        raise ValueError(f"Bessel order {order} unsupported (max {limit})")
    return int(order)


def _check_arg(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)):
        raise ValueError("Bessel argument must be finite")
    if np.any(x < 0):
        raise ValueError("Bessel argument must be nonnegative")
    return x


def _series_scaled(order: int, x: np.ndarray) -> np.ndarray:
    """J_n(x) / x**n from the ascending series; smooth at x = 0."""
    q = -0.25 * x * x
    term = np.full_like(x, 1.0 / (2.0**order * math.factorial(order)))
    total = term.copy()
    for m in range(1, _SERIES_TERMS):
        term = term * q / (m * (m + order))
        total = total + term
    return total


def _miller(orders: tuple[int, ...], x: np.ndarray) -> dict[int, np.ndarray]:
    """J_n(x) for each n in ``orders`` by normalized backward recurrence; x > 0."""
    xmax = float(np.max(x))
    start = int(xmax + 60.0 + 8.0 * math.sqrt(xmax))
    start += start % 2  # even, so the normalization sum pairs up
    jnext = np.zeros_like(x)
    jcur = np.full_like(x, 1e-300)
    norm = np.zeros_like(x)
    wanted = {n: np.zeros_like(x) for n in orders}
    for n in range(start, 0, -1):
        # jcur holds J_n, produce J_{n-1}
        jprev = (2.0 * n / x) * jcur - jnext
        jnext, jcur = jcur, jprev
        m = n - 1
        if m in wanted:
            wanted[m] = jcur.copy()
        if m > 0 and m % 2 == 0:
            norm = norm + 2.0 * jcur
        big = np.abs(jcur) > _RESCALE
        if np.any(big):
            scale = np.where(big, 1.0 / _RESCALE, 1.0)
            jcur = jcur * scale
            jnext = jnext * scale
            norm = norm * scale
            for key in wanted:
                wanted[key] = wanted[key] * scale
    norm = norm + jcur  # J_0
    return {n: wanted[n] / norm for n in orders}


def _bessel_many(orders: tuple[int, ...], x: np.ndarray) -> dict[int, np.ndarray]:
    out = {n: np.empty_like(x) for n in orders}
    small = x < SERIES_CUTOFF
    if np.any(small):
        xs = x[small]
        for n in orders:
            out[n][small] = _series_scaled(n, xs) * xs**n
    if np.any(~small):
        vals = _miller(orders, x[~small])
        for n in orders:
            out[n][~small] = vals[n]
    return out


def bessel_j(order: int, x):
    """Bessel function of the first kind J_order(x) for x >= 0.

    Scalars in, float out; arrays in, arrays out. Absolute error is
    below 1e-12 for x in [0, 300].
    """
    order = _check_order(order)
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(_check_arg(x))
    val = _bessel_many((order,), xa.ravel())[order].reshape(xa.shape)
    return float(val[0]) if scalar else val


def bessel_j_prime(order: int, x):
    """Derivative J_order'(x), via J_n' = (J_{n-1} - J_{n+1}) / 2 and J_0' = -J_1."""
    order = _check_order(order)
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(_check_arg(x))
    flat = xa.ravel()
    if order == 0:
        val = -_bessel_many((1,), flat)[1]
    else:
        vals = _bessel_many((order - 1, order + 1), flat)
        val = 0.5 * (vals[order - 1] - vals[order + 1])
    val = val.reshape(xa.shape)
    return float(val[0]) if scalar else val


def bessel_j_scaled(order: int, x):
    """J_order(x) / x**order, finite at x = 0 with limit 1 / (2**n n!).

    Used where a polar-coordinate formula would otherwise divide by r.
    """
    order = _check_order(order, _MAX_INTERNAL_ORDER)
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(_check_arg(x))
    flat = xa.ravel()
    out = np.empty_like(flat)
    small = flat < SERIES_CUTOFF
    if np.any(small):
        out[small] = _series_scaled(order, flat[small])
    if np.any(~small):
        xl = flat[~small]
        out[~small] = _miller((order,), xl)[order] / xl**order
    out = out.reshape(xa.shape)
    return float(out[0]) if scalar else out
