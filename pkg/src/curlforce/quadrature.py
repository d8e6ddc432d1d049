"""Adaptive Simpson quadrature for scalar or vector-valued integrands."""
from __future__ import annotations

import numpy as np

from .errors import QuadratureFailure


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10, max_depth: int = 50):
    """Integrate ``f`` over [a, b] to absolute tolerance ``tol``.

    ``f`` may return a float or a 1-D array; the error test uses the max norm.
    Subinterval estimates are Richardson-corrected (the usual ``/15`` term).
    """
    if a == b:
        return np.zeros_like(np.asarray(f(a), dtype=float))
    fa, fb = np.asarray(f(a), float), np.asarray(f(b), float)
    m = 0.5 * (a + b)
    fm = np.asarray(f(m), float)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    # explicit stack keeps deep refinement off the Python recursion limit
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = np.zeros_like(whole)
    while stack:
        a0, b0, fa0, fm0, fb0, est, eps, depth = stack.pop()
        m0 = 0.5 * (a0 + b0)
        lm, rm = 0.5 * (a0 + m0), 0.5 * (m0 + b0)
        flm, frm = np.asarray(f(lm), float), np.asarray(f(rm), float)
        left = (m0 - a0) / 6.0 * (fa0 + 4 * flm + fm0)
        right = (b0 - m0) / 6.0 * (fm0 + 4 * frm + fb0)
        delta = left + right - est
        if np.max(np.abs(delta)) <= 15 * eps or (b0 - a0) < 1e-14 * max(1.0, abs(b0)):
            total = total + left + right + delta / 15.0
            continue
        if depth >= max_depth:
            raise QuadratureFailure(
                f"adaptive Simpson did not reach tolerance {tol:g} near [{a0:g}, {b0:g}]"
            )
        stack.append((a0, m0, fa0, flm, fm0, left, eps / 2, depth + 1))
        stack.append((m0, b0, fm0, frm, fb0, right, eps / 2, depth + 1))
    return total
