"""Finite-difference stencils and quadrature weights on a uniform grid."""

from functools import lru_cache
from math import factorial
from typing import Sequence

import numpy as np
import scipy.sparse as sp


def fd_weights(offsets: Sequence[int], deriv: int) -> np.ndarray:
    """
    Weights of the finite-difference formula for the ``deriv``-th derivative
    on the given integer node offsets (unit spacing).

    Args:
        offsets: Node offsets relative to the evaluation point, e.g. (-2..2).
        deriv: Derivative order, must be smaller than ``len(offsets)``.

    Returns:
        np.ndarray: Weights ``w`` with ``f^(deriv)(0) ~ sum(w * f(offsets))``.
    """
    o = np.asarray(offsets, dtype=float)
    n = o.size
    if deriv >= n:
        raise ValueError(f"need more than {deriv} nodes for derivative {deriv}")
    vander = np.array([o**m / factorial(m) for m in range(n)])
    rhs = np.zeros(n)
    rhs[deriv] = 1.0
    return np.linalg.solve(vander, rhs)


def stencil_offsets(node: int, n_nodes: int, deriv: int, accuracy: int = 2) -> np.ndarray:
    # centered where it fits, shifted one-sided window near the ends
    n_centered = 2 * ((deriv + 1) // 2) - 1 + accuracy
    half = n_centered // 2
    if node - half >= 0 and node + half <= n_nodes - 1:
        return np.arange(-half, half + 1)
    n_sided = deriv + accuracy
    start = min(max(node - (n_sided - 1) // 2, 0), n_nodes - n_sided)
    return np.arange(start, start + n_sided) - node


@lru_cache(maxsize=64)
def derivative_matrix(n_nodes: int, dx: float, deriv: int, accuracy: int = 2) -> sp.csr_matrix:
    """
    Sparse matrix of the ``deriv``-th derivative on ``n_nodes`` uniform nodes.

    Interior rows use centered stencils; the rows next to either end switch
    to one-sided stencils of the same order of accuracy.
    """
    if n_nodes < deriv + accuracy:
        raise ValueError(f"{n_nodes} nodes cannot carry a derivative of order {deriv}")
    rows, cols, vals = [], [], []
    cache = {}
    for j in range(n_nodes):
        offsets = stencil_offsets(j, n_nodes, deriv, accuracy)
        key = tuple(offsets)
        if key not in cache:
            cache[key] = fd_weights(offsets, deriv) / dx**deriv
        rows.extend([j] * offsets.size)
        cols.extend(j + offsets)
        vals.extend(cache[key])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes))


def differentiate(values: np.ndarray, dx: float, deriv: int = 1, accuracy: int = 2) -> np.ndarray:
    """Apply :func:`derivative_matrix` along the last axis of ``values``."""
    values = np.asarray(values)
    mat = derivative_matrix(values.shape[-1], float(dx), deriv, accuracy)
    if values.ndim == 1:
        return mat @ values
    return (mat @ values.reshape(-1, values.shape[-1]).T).T.reshape(values.shape)


def boundary_derivative(values: np.ndarray, dx: float, deriv: int = 1, accuracy: int = 2) -> complex:
    """One-sided derivative at node 0 (second order by default)."""
    offsets = np.arange(deriv + accuracy)
    w = fd_weights(offsets, deriv) / dx**deriv
    return complex(np.dot(w, np.asarray(values)[: offsets.size]))


def trapezoid_weights(n_nodes: int, dx: float) -> np.ndarray:
    w = np.full(n_nodes, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def time_derivative(series: np.ndarray, dt: float) -> np.ndarray:
    """Centered differences in time, second-order one-sided at both ends."""
    series = np.asarray(series)
    if series.shape[0] < 3:
        raise ValueError("need at least three time levels")
    out = np.empty_like(series)
    out[1:-1] = (series[2:] - series[:-2]) / (2 * dt)
    out[0] = (-3 * series[0] + 4 * series[1] - series[2]) / (2 * dt)
    out[-1] = (3 * series[-1] - 4 * series[-2] + series[-3]) / (2 * dt)
    return out
