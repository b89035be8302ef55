"""P1 discretization of the anisotropic Rayleigh functional on grid domains.

Every grid cell touching at least one interior node is split into two right
triangles along the same diagonal.  With values extended by zero outside the
mask, the resulting piecewise-linear energy at p = 2 (Euclidean norm) is
exactly the masked 5-point graph Laplacian form, which is what lets the
nonlinear solver and the linear p=2 oracle agree to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from .geometry import DomainGrid
from .norms import NormSpec, squared_with_halfgrad


def _gradient_matrix(rows, plus, minus, h, ntri, ndof):
    mp = plus >= 0
    mm = minus >= 0
    data = np.concatenate([np.full(mp.sum(), 1.0 / h), np.full(mm.sum(), -1.0 / h)])
    ij = (np.concatenate([rows[mp], rows[mm]]), np.concatenate([plus[mp], minus[mm]]))
    return sp.csr_matrix((data, ij), shape=(ntri, ndof))


@dataclass(frozen=True)
class Triangulation:
    """Criss-cross P1 mesh over the interior nodes of a DomainGrid.

    Gx, Gy map node values (Dirichlet-extended by zero) to the constant
    gradient per triangle; each triangle has area h^2 / 2.
    """

    grid: DomainGrid
    node_index: np.ndarray   # (nx, ny) int, -1 outside the mask
    dof_nodes: np.ndarray    # (ndof, 2) grid indices of the dofs
    cell_ij: np.ndarray      # (ncell, 2) lower-left corner of each kept cell
    Gx: sp.csr_matrix        # (ntri, ndof); triangles are [lower cells; upper cells]
    Gy: sp.csr_matrix
    GxT: sp.csr_matrix
    GyT: sp.csr_matrix

    @property
    def ndof(self) -> int:
        return self.dof_nodes.shape[0]

    @property
    def ntri(self) -> int:
        return self.Gx.shape[0]

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def area(self) -> float:
        return 0.5 * self.grid.h ** 2

    def gradient_components(self, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.Gx @ values, self.Gy @ values


def triangulate(grid: DomainGrid) -> Triangulation:
    mask = grid.mask
    node_index = -np.ones(mask.shape, dtype=np.int64)
    dof_nodes = np.argwhere(mask)
    node_index[mask] = np.arange(dof_nodes.shape[0])

    # cells with at least one interior corner carry energy
    a = node_index[:-1, :-1]
    b = node_index[1:, :-1]
    c = node_index[1:, 1:]
    d = node_index[:-1, 1:]
    keep = (a >= 0) | (b >= 0) | (c >= 0) | (d >= 0)
    A, B, C, D = a[keep], b[keep], c[keep], d[keep]
    cell_ij = np.argwhere(keep)
    ncell = A.size
    rows = np.arange(ncell)
    h = grid.h
    ndof = dof_nodes.shape[0]
    # lower triangle (A, B, C): gx = (B - A)/h, gy = (C - B)/h
    # upper triangle (A, D, C): gx = (C - D)/h, gy = (D - A)/h
    Gx = sp.vstack([
        _gradient_matrix(rows, B, A, h, ncell, ndof),
        _gradient_matrix(rows, C, D, h, ncell, ndof),
    ]).tocsr()
    Gy = sp.vstack([
        _gradient_matrix(rows, C, B, h, ncell, ndof),
        _gradient_matrix(rows, D, A, h, ncell, ndof),
    ]).tocsr()
    return Triangulation(grid, node_index, dof_nodes, cell_ij, Gx, Gy,
                         Gx.T.tocsr(), Gy.T.tocsr())


@dataclass
class ScalarField:
    """Node values on the interior dofs; zero outside the mask by convention."""

    tri: Triangulation
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.tri.ndof,):
            raise ValueError("field values must match the dof count")

    def copy(self) -> "ScalarField":
        return ScalarField(self.tri, self.values.copy())

    def as_grid_array(self) -> np.ndarray:
        out = np.zeros((self.tri.grid.nx, self.tri.grid.ny))
        out[self.tri.grid.mask] = self.values
        return out

    @staticmethod
    def from_grid_array(tri: Triangulation, arr: np.ndarray) -> "ScalarField":
        return ScalarField(tri, np.asarray(arr, dtype=float)[tri.grid.mask])

    @staticmethod
    def from_function(tri: Triangulation, fn) -> "ScalarField":
        pts = tri.grid.node_points(tri.dof_nodes)
        return ScalarField(tri, fn(pts[:, 0], pts[:, 1]))


def triangle_gradients(u: ScalarField) -> np.ndarray:
    """Constant P1 gradient per triangle, shape (ntri, 2); exact and linear in u."""
    gx, gy = u.tri.gradient_components(u.values)
    return np.stack([gx, gy], axis=-1)


def _weighted_terms(norm: NormSpec, gx, gy, p: float, eps: float):
    """Per-triangle (F^2 + eps^2, F dF) with overflow-safe p-th powers deferred."""
    f2, hx, hy = squared_with_halfgrad(norm, gx, gy)
    return f2 + eps * eps, hx, hy


def energy_p(u: ScalarField, norm: NormSpec, p: float, eps: float = 0.0) -> float:
    """sum_T area * (F^2(grad u) + eps^2)^(p/2); convex in u, p-homogeneous at eps=0."""
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    gx, gy = u.tri.gradient_components(u.values)
    f2e, _, _ = _weighted_terms(norm, gx, gy, p, eps)
    s = np.sqrt(f2e.max(initial=0.0))
    if s == 0.0:
        return 0.0
    # scaled form keeps F^p finite for large p
    return float(u.tri.area * s ** p * np.sum((f2e / (s * s)) ** (0.5 * p)))


def energy_gradient(u: ScalarField, norm: NormSpec, p: float, eps: float = 0.0) -> ScalarField:
    """Exact gradient of energy_p with respect to the node values."""
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    tri = u.tri
    gx, gy = tri.gradient_components(u.values)
    f2e, hx, hy = _weighted_terms(norm, gx, gy, p, eps)
    s2 = f2e.max(initial=0.0)
    if s2 == 0.0:
        return ScalarField(tri, np.zeros(tri.ndof))
    pos = f2e > 0.0
    w = np.zeros_like(f2e)
    # w = p * (F^2+eps^2)^{(p-2)/2}, scaled by s2 to avoid overflow
    w[pos] = p * s2 ** (0.5 * p - 1.0) * (f2e[pos] / s2) ** (0.5 * p - 1.0)
    g = tri.GxT @ (w * hx) + tri.GyT @ (w * hy)
    return ScalarField(tri, tri.area * g)


def mass_p(u: ScalarField, p: float) -> float:
    """Lumped nodal quadrature of the p-th power: h^2 * sum |u_i|^p."""
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    v = np.abs(u.values)
    m = v.max(initial=0.0)
    if m == 0.0:
        return 0.0
    return float(u.tri.h ** 2 * m ** p * np.sum((v / m) ** p))


def mass_gradient(u: ScalarField, p: float) -> ScalarField:
    """Exact gradient of mass_p: p h^2 |u_i|^{p-2} u_i per node."""
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    v = np.abs(u.values)
    m = v.max(initial=0.0)
    if m == 0.0:
        return ScalarField(u.tri, np.zeros(u.tri.ndof))
    g = p * u.tri.h ** 2 * m ** (p - 1.0) * np.sign(u.values) * (v / m) ** (p - 1.0)
    return ScalarField(u.tri, g)
