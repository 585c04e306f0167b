"""Finite differences and quadrature on half-line grids.

Every sampled function lives on the nodes ``x_i = i h`` of ``[0, L]`` and has a
definite parity on the whole line. Parity is passed as ``+1`` (even) or ``-1`` (odd) and
fills the ghost nodes left of ``x = 0``; the last two nodes fall back to second-order
one-sided stencils.
"""
# Standard Library
from __future__ import annotations

# External Party
import numpy as np
from numpy.typing import ArrayLike
from numpy.typing import NDArray
from scipy.integrate import trapezoid

FloatArray = NDArray[np.float64]

EVEN = 1
ODD = -1
# nodes at the right end that only get second-order stencils
EDGE_NODES = 2


def _with_ghosts(values: FloatArray, parity: int) -> FloatArray:
    return np.concatenate([parity * values[2:0:-1], values])


def first_derivative(values: ArrayLike, h: float, parity: int) -> FloatArray:
    """Return f' with fourth-order central differences.

    Args:
        values (ArrayLike): samples of f on [0, L]
        h (float): grid spacing
        parity (int): +1 if f is even on the line, -1 if odd

    Returns:
        FloatArray: samples of f'
    """
    f = np.asarray(values, dtype=float)
    n = f.size
    g = _with_ghosts(f, parity)
    out = np.empty(n)
    stencil = g[0 : n - 2] - 8 * g[1 : n - 1] + 8 * g[3 : n + 1] - g[4 : n + 2]
    out[: n - 2] = stencil / (12 * h)
    out[n - 2] = (f[n - 1] - f[n - 3]) / (2 * h)
    out[n - 1] = (3 * f[n - 1] - 4 * f[n - 2] + f[n - 3]) / (2 * h)
    return out


def second_derivative(values: ArrayLike, h: float, parity: int) -> FloatArray:
    """Return f'' with fourth-order central differences."""
    f = np.asarray(values, dtype=float)
    n = f.size
    g = _with_ghosts(f, parity)
    out = np.empty(n)
    out[: n - 2] = (
        -g[0 : n - 2]
        + 16 * g[1 : n - 1]
        - 30 * g[2:n]
        + 16 * g[3 : n + 1]
        - g[4 : n + 2]
    ) / (12 * h**2)
    out[n - 2] = (f[n - 1] - 2 * f[n - 2] + f[n - 3]) / h**2
    out[n - 1] = (2 * f[n - 1] - 5 * f[n - 2] + 4 * f[n - 3] - f[n - 4]) / h**2
    return out


def three_point_laplacian(values: ArrayLike, h: float, parity: int) -> FloatArray:
    """Return the second-order Laplacian; the last node is left at zero."""
    f = np.asarray(values, dtype=float)
    out = np.zeros_like(f)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
    # the ghost at -h equals parity * f[1]
    out[0] = (f[1] - 2 * f[0] + parity * f[1]) / h**2
    return out


def line_inner(f: ArrayLike, g: ArrayLike, h: float) -> float:
    """Return the inner product on the whole line of two functions of equal parity.

    The integrand is even, so the integral over the line is twice the trapezoidal rule
    on the half line.
    """
    integrand = np.asarray(f, dtype=float) * np.asarray(g, dtype=float)
    return float(2.0 * trapezoid(integrand, dx=h))


def line_norm(f: ArrayLike, h: float) -> float:
    """Return the L2 norm on the whole line."""
    return float(np.sqrt(line_inner(f, f, h)))


def line_integral(integrand: ArrayLike, h: float) -> float:
    """Return the integral over the line of an even integrand sampled on [0, L]."""
    return float(2.0 * trapezoid(np.asarray(integrand, dtype=float), dx=h))
