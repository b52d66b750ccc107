"""Golden-section search for unimodal scalar objectives."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class ScalarMax:
    x: float
    fx: float
    evaluations: int


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> ScalarMax:
    """Maximise ``f`` on ``[lo, hi]`` until the bracket is shorter than ``tol``.

    The endpoints are evaluated too, so a monotone objective returns the
    better endpoint rather than a point just inside it.
    """
    if hi < lo:
        lo, hi = hi, lo
    tol = max(tol, 0.0)
    a, b = lo, hi
    width = b - a
    evals = 0
    if width > tol:
        c = a + INV_PHI2 * width
        d = a + INV_PHI * width
        fc, fd = f(c), f(d)
        evals += 2
        while b - a > tol:
            if fc >= fd:
                b, d, fd = d, c, fc
                c = a + INV_PHI2 * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + INV_PHI * (b - a)
                fd = f(d)
            evals += 1
            if b - a <= tol or evals > 500:
                break
        x, fx = (c, fc) if fc >= fd else (d, fd)
    else:
        x = 0.5 * (a + b)
        fx = f(x)
        evals += 1
    for edge in (lo, hi):
        fe = f(edge)
        evals += 1
        if fe > fx:
            x, fx = edge, fe
    return ScalarMax(x, fx, evals)
