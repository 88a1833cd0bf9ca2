"""Bisection on a bracketed sign change."""

import math


def bisect(func, lo, hi, g_lo, g_hi, width_tol, max_iter=200):
    """Shrink ``[lo, hi]`` around a sign change of ``func``.

    ``g_lo`` and ``g_hi`` are ``func`` at the endpoints and must differ in
    sign (or one of them be zero). ``width_tol(x)`` is the target bracket width
    near ``x``. Returns ``(root, lo, hi, iterations)``.
    """
    if g_lo == 0:
        return lo, lo, hi, 0
    if g_hi == 0:
        return hi, lo, hi, 0
    if math.copysign(1.0, g_lo) == math.copysign(1.0, g_hi):
        raise ValueError("endpoints do not bracket a sign change")
    iterations = 0
    while iterations < max_iter:
        mid = 0.5 * (lo + hi)
        if hi - lo <= width_tol(mid) or mid in (lo, hi):
            break
        g_mid = func(mid)
        iterations += 1
        if g_mid == 0:
            return mid, mid, mid, iterations
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
    return 0.5 * (lo + hi), lo, hi, iterations
