"""Chebyshev collocation machinery on the unit interval.

All solvers share one grid family: Chebyshev-Gauss-Lobatto points mapped
to [0, 1] in ascending order, with dense spectral differentiation matrices
and Clenshaw-Curtis quadrature weights.
"""
from functools import lru_cache

import numpy as np


class Grid:
    """Collocation grid with differentiation matrices and quadrature weights.

    Attributes
    ----------
    n : int
        Number of collocation points.
    z : ndarray
        Nodes in [0, 1], ascending, z[0] = 0 and z[-1] = 1.
    d1, d2, d3, d4 : ndarray
        Dense differentiation matrices of order 1 to 4 on the nodes.
    weights : ndarray
        Clenshaw-Curtis quadrature weights such that ``weights @ f``
        approximates the integral of f over [0, 1].
    """

    def __init__(self, n):
        if n < 2:
            raise ValueError(f"grid needs at least 2 points, got {n}")
        self.n = n
        m = n - 1
        j = np.arange(n)
        x = np.cos(np.pi * j / m)                     # descending on [-1, 1]
        c = np.ones(n)
        c[0] = c[-1] = 2.0
        c *= (-1.0) ** j
        dx = x[:, None] - x[None, :]
        d = np.outer(c, 1.0 / c) / (dx + np.eye(n))
        d -= np.diag(d.sum(axis=1))                   # negative-sum trick
        # z = (1 - x)/2 maps to [0, 1] ascending; d/dz = -2 d/dx
        self.z = (1.0 - x) / 2.0
        self.d1 = -2.0 * d
        self.d2 = self.d1 @ self.d1
        self.d3 = self.d1 @ self.d2
        self.d4 = self.d2 @ self.d2
        self.weights = _clenshaw_curtis(n) / 2.0
        for a in (self.z, self.d1, self.d2, self.d3, self.d4, self.weights):
            a.setflags(write=False)

    def integrate(self, f):
        """Quadrature of nodal values over [0, 1]."""
        return float(self.weights @ f)

    def interpolate(self, f, znew):
        """Barycentric interpolation of nodal values to new points in [0, 1]."""
        znew = np.asarray(znew, dtype=float)
        m = self.n - 1
        w = (-1.0) ** np.arange(self.n)
        w[0] /= 2.0
        w[-1] /= 2.0
        out = np.empty(znew.shape, dtype=np.asarray(f).dtype)
        for i, zi in np.ndenumerate(znew):
            dz = zi - self.z
            hit = np.argmin(np.abs(dz))
            if abs(dz[hit]) < 1e-14:
                out[i] = f[hit]
            else:
                b = w / dz
                out[i] = (b @ f) / b.sum()
        return out


def _clenshaw_curtis(n):
    """Clenshaw-Curtis weights for n Gauss-Lobatto nodes on [-1, 1]."""
    m = n - 1
    theta = np.pi * np.arange(n) / m
    w = np.ones(n)
    for i in range(n):
        s = 0.0
        for k in range(1, m // 2 + 1):
            b = 1.0 if 2 * k == m else 2.0
            s += b * np.cos(2.0 * k * theta[i]) / (4.0 * k * k - 1.0)
        w[i] -= s
    w *= 2.0 / m
    w[0] /= 2.0
    w[-1] /= 2.0
    return w


@lru_cache(maxsize=32)
def grid(n):
    """Shared, cached grid of n collocation points."""
    return Grid(n)
