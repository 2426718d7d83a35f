"""Quadrature weight vectors for uniform grids."""

import numpy as np


def trapezoid_weights(n, spacing):
    """Composite trapezoid weights for n uniformly spaced points."""
    w = np.full(n, spacing)
    w[0] = w[-1] = spacing / 2.0
    return w


def simpson_weights(n, spacing):
    """Composite Simpson weights for n uniformly spaced points.

    Requires an even number of intervals; for even n the final interval
    is closed with a trapezoid rule (second-order there, fourth elsewhere).
    """
    if n < 3:
        return trapezoid_weights(n, spacing)
    m = n if n % 2 == 1 else n - 1
    w = np.zeros(n)
    w[0:m] = 2.0
    w[1:m:2] = 4.0
    w[0] = w[m - 1] = 1.0
    w[:m] *= spacing / 3.0
    if m < n:
        w[-2] += spacing / 2.0
        w[-1] += spacing / 2.0
    return w
