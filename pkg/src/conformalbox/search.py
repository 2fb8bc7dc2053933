"""Scalar search helpers: golden-section minimization and monotone bisection."""

from __future__ import annotations

import math

from .errors import DomainError

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_minimize(f, lo, hi, tol=1e-9, max_iter=200):
    """Argmin of a unimodal scalar function on [lo, hi].

    Shrinks the bracket by the inverse golden ratio each step and returns
    the bracket midpoint once it is narrower than ``tol``.
    """
    if not lo < hi:
        raise DomainError(f"need lo < hi, got [{lo}, {hi}]")
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def grid_bracket(f, lo, hi, num=60):
    """Bracket the minimum of f by scanning ``num`` evenly spaced points.

    Returns (a, b): the grid neighbours of the best point. Guards the
    unimodality assumption of the golden-section refinement.
    """
    if num < 3:
        raise DomainError("grid scan needs at least 3 points")
    step = (hi - lo) / (num - 1)
    xs = [lo + i * step for i in range(num)]
    vals = [f(x) for x in xs]
    best = min(range(num), key=vals.__getitem__)
    a = xs[max(best - 1, 0)]
    b = xs[min(best + 1, num - 1)]
    return a, b


def bisect_smallest(pred, lo, hi, tol=1e-9, max_iter=200):
    """Bisection bracket for the smallest x with pred(x) true.

    ``pred`` must be monotone (false then true) on [lo, hi] with pred(hi)
    true and pred(lo) false. Returns (lo, hi) with hi - lo <= tol and the
    boundary inside (lo, hi].
    """
    if not pred(hi):
        raise DomainError("pred(hi) must hold for the bisection to bracket")
    a, b = lo, hi
    for _ in range(max_iter):
        if b - a <= tol:
            break
        mid = 0.5 * (a + b)
        if pred(mid):
            b = mid
        else:
            a = mid
    return a, b
