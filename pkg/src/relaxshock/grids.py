"""Graded grids, finite-difference stencils and quadrature.

All field data in the toolkit lives on strictly increasing 1-D grids that
cluster points near the shock layer (around x = 0) and stretch
geometrically toward the truncation boundaries. Differentiation uses
local Lagrange (Fornberg) stencils, integration uses the trapezoid rule;
both are shared by every module so that discrete identities (integration
by parts, cumulative integrals) are mutually consistent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import brentq


def fornberg_weights(z, x, m):
    """Weights of the finite-difference stencil on nodes ``x`` that
    approximates the 0..m-th derivatives at the point ``z``.

    Returns an array c of shape (len(x), m+1); column k holds the weights
    of the k-th derivative. Standard Fornberg recursion.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def _diff_matrix(x, order, width=5):
    """Sparse differentiation matrix of the given derivative order using
    local stencils of ``width`` nodes (one-sided near the boundaries)."""
    n = len(x)
    width = min(width, n)
    half = width // 2
    rows, cols, vals = [], [], []
    for i in range(n):
        lo = min(max(0, i - half), n - width)
        nodes = np.arange(lo, lo + width)
        w = fornberg_weights(x[i], x[nodes], order)[:, order]
        rows.extend([i] * width)
        cols.extend(nodes.tolist())
        vals.extend(w.tolist())
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass
class Grid:
    """Strictly increasing 1-D grid with cached calculus operators."""

    x: np.ndarray
    _d1: sparse.csr_matrix | None = field(default=None, repr=False)
    _d2: sparse.csr_matrix | None = field(default=None, repr=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 1 or len(self.x) < 5:
            raise ValueError("grid needs at least 5 points")
        if not np.all(np.diff(self.x) > 0):
            raise ValueError("grid must be strictly increasing")

    @property
    def n(self):
        return len(self.x)

    @property
    def h(self):
        return np.diff(self.x)

    @property
    def length(self):
        return self.x[-1] - self.x[0]

    @property
    def d1(self):
        if self._d1 is None:
            self._d1 = _diff_matrix(self.x, 1)
        return self._d1

    @property
    def d2(self):
        if self._d2 is None:
            self._d2 = _diff_matrix(self.x, 2)
        return self._d2

    def deriv(self, f, order=1):
        """Derivative of nodal data f (shape (n,) or (n, k)) along x."""
        op = self.d1 if order == 1 else self.d2
        return op @ np.asarray(f)

    @property
    def trapezoid_weights(self):
        h = self.h
        w = np.zeros(self.n)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return w

    def integrate(self, f):
        """Trapezoid integral of nodal data over the whole grid."""
        f = np.asarray(f)
        if f.ndim == 1:
            return np.trapz(f, self.x)
        return np.trapz(f, self.x, axis=0)

    def cumulative(self, f):
        """Cumulative trapezoid integral with value 0 at the left end."""
        from scipy.integrate import cumulative_trapezoid

        return cumulative_trapezoid(np.asarray(f), self.x, axis=0, initial=0.0)

    def inner(self, f, g):
        """L2 scalar product int conj(f) . g dx for vector fields of shape
        (n,) or (n, k)."""
        f = np.asarray(f)
        g = np.asarray(g)
        prod = np.conj(f) * g
        if prod.ndim > 1:
            prod = prod.sum(axis=1)
        return self.integrate(prod)

    def norm2(self, f):
        return np.sqrt(max(self.inner(f, f).real, 0.0))

    def weighted_norm2(self, f, weight):
        """Norm ( int |f|^2 weight dx )^(1/2) for nonnegative nodal weight."""
        f = np.asarray(f)
        mag = np.abs(f) ** 2
        if mag.ndim > 1:
            mag = mag.sum(axis=1)
        return np.sqrt(max(self.integrate(mag * weight), 0.0))


def graded_grid(half_length, n_points, cluster_width, cluster_fraction=0.6):
    """Symmetric sinh-graded grid on [-L, L].

    About ``cluster_fraction`` of the points land inside
    |x| <= cluster_width, the rest stretch geometrically to +-L.
    """
    L = float(half_length)
    cw = float(cluster_width)
    if n_points % 2 == 0:
        n_points += 1  # keep x = 0 on the grid
    xi = np.linspace(-1.0, 1.0, n_points)
    ratio = L / cw
    if ratio <= 1.2:
        return Grid(L * xi)
    frac = float(np.clip(cluster_fraction, 0.2, 0.9))

    def mismatch(theta):
        return np.sinh(theta) / np.sinh(theta * frac) - ratio

    theta = brentq(mismatch, 1e-8, 60.0)
    x = cw * np.sinh(theta * xi) / np.sinh(theta * frac)
    x[0], x[-1] = -L, L
    x[n_points // 2] = 0.0
    return Grid(x)


def uniform_grid(half_length, n_points):
    if n_points % 2 == 0:
        n_points += 1
    return Grid(np.linspace(-half_length, half_length, n_points))
