"""Golden-section search for a univariate maximum."""

from __future__ import annotations

import math
from typing import Callable

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0


def golden_max(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-6
) -> tuple[float, float]:
    """Maximize f on [lo, hi]; returns (argmax, max).

    Assumes f is unimodal on the interval.  The iteration count is fixed
    from (hi-lo)/tol, so the result is deterministic.
    """
    if hi < lo:
        raise ValueError("empty interval")
    width = hi - lo
    if width <= tol:
        mid = 0.5 * (lo + hi)
        return mid, f(mid)
    steps = int(math.ceil(math.log(tol / width) / math.log(INV_PHI)))
    a, b = lo, hi
    c = a + INV_PHI_SQ * width
    d = a + INV_PHI * width
    fc, fd = f(c), f(d)
    for _ in range(steps):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = a + INV_PHI_SQ * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    if fc >= fd:
        return c, fc
    return d, fd
