"""Adaptive Gauss-Legendre quadrature on finite intervals.

Panels of 15 Gauss-Legendre nodes are compared against the sum over their
two halves; panels whose halves disagree are bisected further. The
integrand must accept a numpy array and return an array of the same shape.
"""

import heapq

import numpy as np

from .errors import NumericError

_ORDER = 15
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(_ORDER)


def _panel(func, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return half * np.dot(_WEIGHTS, func(mid + half * _NODES))


def _refined(func, a, b):
    m = 0.5 * (a + b)
    left = _panel(func, a, m)
    right = _panel(func, m, b)
    return left, right


def integrate(func, a, b, abs_tol=1e-12, rel_tol=1e-12, breakpoints=(), max_panels=4000):
    """Integrate ``func`` over ``[a, b]``.

    Parameters
    ----------
    func : callable
        Vectorised integrand.
    a, b : float
        Finite integration limits, ``a <= b``.
    abs_tol, rel_tol : float
        Stop once the summed error estimate is below
        ``max(abs_tol, rel_tol * |I|)``.
    breakpoints : sequence of float
        Interior points where the integrand is known to be non-smooth.
    max_panels : int
        Upper bound on the number of panels before giving up.

    Returns
    -------
    float
        The integral estimate.

    Raises
    ------
    NumericError
        If the tolerance is not met within ``max_panels`` panels. The
        achieved estimate is attached to the exception.
    """
    a = float(a)
    b = float(b)
    if b == a:
        return 0.0
    if b < a:
        return -integrate(func, b, a, abs_tol, rel_tol, breakpoints, max_panels)

    edges = [a] + sorted(p for p in breakpoints if a < p < b) + [b]
    heap = []
    total = 0.0
    err_total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        coarse = _panel(func, lo, hi)
        left, right = _refined(func, lo, hi)
        fine = left + right
        err = abs(fine - coarse)
        total += fine
        err_total += err
        # max-heap on error estimate
        heapq.heappush(heap, (-err, lo, hi, fine, left, right))

    n_panels = len(heap)
    while err_total > max(abs_tol, rel_tol * abs(total)):
        if n_panels >= max_panels:
            raise NumericError(
                f"quadrature did not converge on [{a}, {b}]: error estimate {err_total:.3e}",
                estimate=total,
            )
        neg_err, lo, hi, fine, left, right = heapq.heappop(heap)
        total -= fine
        err_total += neg_err
        mid = 0.5 * (lo + hi)
        for sub_lo, sub_hi, coarse in ((lo, mid, left), (mid, hi, right)):
            sl, sr = _refined(func, sub_lo, sub_hi)
            sub_fine = sl + sr
            sub_err = abs(sub_fine - coarse)
            total += sub_fine
            err_total += sub_err
            heapq.heappush(heap, (-sub_err, sub_lo, sub_hi, sub_fine, sl, sr))
        n_panels += 1
        if err_total < 0.0:
            err_total = sum(-item[0] for item in heap)
    return float(total)
