"""Uniform tensor-product grid on a rectangle and second-order FD operators.

The grid stores an ``n x n`` node set with flat index ``k = j*n + i``
(``j`` indexes y and is the slow axis, ``i`` indexes x), classifies every
node as interior or boundary, and attaches an outward unit normal to each
boundary node (corners carry the normalized sum of the two face normals).

All differential operators are second-order accurate: centered stencils at
interior nodes and one-sided three/four-point stencils at boundary nodes,
so that ``div(A grad u)`` is defined on the whole closed rectangle.  The
operators are exposed both as functions on :class:`ScalarField` and as
sparse matrices (used by the least-squares assembly downstream).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp


class Grid:
    """Uniform grid on ``[xmin, xmax] x [ymin, ymax]`` with ``n`` nodes per axis.

    Node coordinates satisfy ``x_i = xmin + i*dx`` and ``y_j = ymin + j*dy``
    with ``dx = (xmax - xmin)/(n - 1)``.  Immutable after construction.
    """

    def __init__(self, xmin: float = -1.0, xmax: float = 1.0,
                 ymin: float = -1.0, ymax: float = 1.0, n: int = 150):
        if n < 5:
            raise ValueError(f"need at least 5 nodes per axis, got n={n}")
        if not (xmax > xmin and ymax > ymin):
            raise ValueError("domain corners must satisfy xmax > xmin and ymax > ymin")
        self.xmin, self.xmax = float(xmin), float(xmax)
        self.ymin, self.ymax = float(ymin), float(ymax)
        self.n = int(n)
        self.dx = (self.xmax - self.xmin) / (self.n - 1)
        self.dy = (self.ymax - self.ymin) / (self.n - 1)
        self.xs = self.xmin + self.dx * np.arange(self.n)
        self.ys = self.ymin + self.dy * np.arange(self.n)

        jj, ii = np.meshgrid(np.arange(self.n), np.arange(self.n), indexing="ij")
        self._ii = ii.ravel()
        self._jj = jj.ravel()
        self.x = self.xs[self._ii]
        self.y = self.ys[self._jj]

        on_edge_x = (self._ii == 0) | (self._ii == self.n - 1)
        on_edge_y = (self._jj == 0) | (self._jj == self.n - 1)
        self.boundary_mask = on_edge_x | on_edge_y
        self.interior_mask = ~self.boundary_mask
        self.boundary_idx = np.flatnonzero(self.boundary_mask)
        self.interior_idx = np.flatnonzero(self.interior_mask)

        nx = (self._ii == self.n - 1).astype(float) - (self._ii == 0).astype(float)
        ny = (self._jj == self.n - 1).astype(float) - (self._jj == 0).astype(float)
        normals = np.column_stack([nx, ny])[self.boundary_idx]
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        self.normals = normals

    @property
    def n_nodes(self) -> int:
        return self.n * self.n

    @property
    def n_boundary(self) -> int:
        return self.boundary_idx.size

    @property
    def cell_measure(self) -> float:
        """Quadrature weight of one node in the plain node-sum rule."""
        return self.dx * self.dy

    def node_xy(self) -> np.ndarray:
        """All node coordinates as an ``(n*n, 2)`` array in flat order."""
        return np.column_stack([self.x, self.y])

    def field(self, values) -> "ScalarField":
        return ScalarField(self, np.asarray(values, dtype=float))

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.n_nodes))

    def field_from_callable(self, fn: Callable) -> "ScalarField":
        """Sample ``fn(x, y)`` (vectorized) at every node."""
        return ScalarField(self, np.asarray(fn(self.x, self.y), dtype=float))

    # ----- 1D stencil blocks -------------------------------------------------

    @staticmethod
    def _d1_matrix(n: int, h: float) -> sp.csr_matrix:
        """Second-order first derivative: centered inside, one-sided at ends."""
        d = sp.lil_matrix((n, n))
        d[0, 0:3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
        d[n - 1, n - 3:n] = np.array([1.0, -4.0, 3.0]) / (2 * h)
        rows = np.arange(1, n - 1)
        d[rows, rows - 1] = -1.0 / (2 * h)
        d[rows, rows + 1] = 1.0 / (2 * h)
        return d.tocsr()

    @staticmethod
    def _d2_matrix(n: int, h: float) -> sp.csr_matrix:
        """Second-order second derivative: centered inside, one-sided at ends."""
        d = sp.lil_matrix((n, n))
        d[0, 0:4] = np.array([2.0, -5.0, 4.0, -1.0]) / h**2
        d[n - 1, n - 4:n] = np.array([-1.0, 4.0, -5.0, 2.0]) / h**2
        rows = np.arange(1, n - 1)
        d[rows, rows - 1] = 1.0 / h**2
        d[rows, rows] = -2.0 / h**2
        d[rows, rows + 1] = 1.0 / h**2
        return d.tocsr()

    # ----- full-grid operator matrices ---------------------------------------

    @cached_property
    def dx_matrix(self) -> sp.csr_matrix:
        """d/dx on the flat node vector."""
        eye = sp.identity(self.n, format="csr")
        return sp.kron(eye, self._d1_matrix(self.n, self.dx), format="csr")

    @cached_property
    def dy_matrix(self) -> sp.csr_matrix:
        """d/dy on the flat node vector."""
        eye = sp.identity(self.n, format="csr")
        return sp.kron(self._d1_matrix(self.n, self.dy), eye, format="csr")

    @cached_property
    def dxx_matrix(self) -> sp.csr_matrix:
        eye = sp.identity(self.n, format="csr")
        return sp.kron(eye, self._d2_matrix(self.n, self.dx), format="csr")

    @cached_property
    def dyy_matrix(self) -> sp.csr_matrix:
        eye = sp.identity(self.n, format="csr")
        return sp.kron(self._d2_matrix(self.n, self.dy), eye, format="csr")

    @cached_property
    def dxy_matrix(self) -> sp.csr_matrix:
        """Mixed second derivative as the composition d/dx o d/dy."""
        return (self.dx_matrix @ self.dy_matrix).tocsr()


@dataclass(frozen=True)
class ScalarField:
    """Real values on every node of a grid, flat order ``k = j*n + i``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"field has shape {values.shape}, grid expects ({self.grid.n_nodes},)")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite entries")
        object.__setattr__(self, "values", values)

    def as_image(self) -> np.ndarray:
        """Reshape to ``(n, n)`` with axes ``[j, i]`` (y-major)."""
        return self.values.reshape(self.grid.n, self.grid.n)


@dataclass(frozen=True)
class DiffusionField:
    """Symmetric 2x2 diffusion tensor per node (entries a11, a12, a22).

    Uniform ellipticity ``lam_ell |xi|^2 <= A xi . xi <= |xi|^2 / lam_ell``
    is verified by eigenvalue bounds at every node on construction.
    """

    grid: Grid
    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    ellipticity: float = 1.0

    def __post_init__(self):
        for name in ("a11", "a12", "a22"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.n_nodes,):
                raise ValueError(f"{name} has shape {arr.shape}, expected "
                                 f"({self.grid.n_nodes},)")
            object.__setattr__(self, name, arr)
        lam = self.ellipticity
        if not 0.0 < lam <= 1.0:
            raise ValueError(f"ellipticity constant must lie in (0, 1], got {lam}")
        mean = 0.5 * (self.a11 + self.a22)
        radius = np.sqrt((0.5 * (self.a11 - self.a22)) ** 2 + self.a12**2)
        eig_min, eig_max = mean - radius, mean + radius
        tol = 1e-12
        if np.any(eig_min < lam - tol) or np.any(eig_max > 1.0 / lam + tol):
            k = int(np.argmin(eig_min))
            raise ValueError(
                "diffusion tensor violates uniform ellipticity "
                f"(eigenvalues [{eig_min.min():.3g}, {eig_max.max():.3g}] outside "
                f"[{lam:.3g}, {1/lam:.3g}], e.g. at node {k})")

    @classmethod
    def identity(cls, grid: Grid) -> "DiffusionField":
        one = np.ones(grid.n_nodes)
        return cls(grid, one, np.zeros(grid.n_nodes), one, ellipticity=1.0)

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable, ellipticity: float) -> "DiffusionField":
        """Build from ``fn(x, y) -> (a11, a12, a22)`` evaluated node-wise."""
        a11, a12, a22 = fn(grid.x, grid.y)
        b = np.broadcast_to
        shape = (grid.n_nodes,)
        return cls(grid, b(a11, shape).copy(), b(a12, shape).copy(),
                   b(a22, shape).copy(), ellipticity=ellipticity)

    @property
    def is_identity(self) -> bool:
        return (np.all(self.a11 == 1.0) and np.all(self.a12 == 0.0)
                and np.all(self.a22 == 1.0))


def _check_same_grid(grid: Grid, u: ScalarField) -> None:
    if u.grid is not grid and u.grid.n_nodes != grid.n_nodes:
        raise ValueError("field is defined on a different grid")
    if u.values.shape != (grid.n_nodes,):
        raise ValueError("field length does not match grid node count")


def _axis_flux_matrix(grid: Grid, a: np.ndarray, axis: int) -> sp.csr_matrix:
    """Sparse matrix of d/dq (a(q) d/dq u) along one axis (q = x or y).

    Interior nodes use the conservative flux form with arithmetic face
    averages of ``a``; the two end nodes of each grid line use the expanded
    form ``a u_qq + a_q u_q`` with one-sided second-order stencils (``a_q``
    from the one-sided first-derivative operator applied to ``a``).
    """
    n, nn = grid.n, grid.n_nodes
    if axis == 0:
        h, stride = grid.dx, 1
        pos = grid._ii
        da = grid.dx_matrix @ a
    else:
        h, stride = grid.dy, n
        pos = grid._jj
        da = grid.dy_matrix @ a

    rows, cols, vals = [], [], []

    k = np.flatnonzero((pos >= 1) & (pos <= n - 2))
    a_minus = 0.5 * (a[k - stride] + a[k])
    a_plus = 0.5 * (a[k] + a[k + stride])
    rows += [k, k, k]
    cols += [k - stride, k, k + stride]
    vals += [a_minus / h**2, -(a_minus + a_plus) / h**2, a_plus / h**2]

    # one-sided rows: a*[2,-5,4,-1]/h^2 + a_q*[-3,4,-1,0]/(2h), mirrored at the far end
    for k0, sgn in ((np.flatnonzero(pos == 0), 1), (np.flatnonzero(pos == n - 1), -1)):
        c2 = np.array([2.0, -5.0, 4.0, -1.0]) / h**2
        c1 = sgn * np.array([-3.0, 4.0, -1.0, 0.0]) / (2 * h)
        for m in range(4):
            rows.append(k0)
            cols.append(k0 + sgn * m * stride)
            vals.append(a[k0] * c2[m] + da[k0] * c1[m])

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(nn, nn))


def div_a_grad_matrix(grid: Grid, a: DiffusionField) -> sp.csr_matrix:
    """Sparse matrix of ``div(A grad u)`` on the whole closed rectangle."""
    op = _axis_flux_matrix(grid, a.a11, axis=0) + _axis_flux_matrix(grid, a.a22, axis=1)
    if np.any(a.a12 != 0.0):
        a12 = sp.diags(a.a12)
        op = op + grid.dx_matrix @ a12 @ grid.dy_matrix \
                + grid.dy_matrix @ a12 @ grid.dx_matrix
    return op.tocsr()


def normal_flux_matrix(grid: Grid, a: DiffusionField) -> sp.csr_matrix:
    """Rows of ``A grad u . nu`` at the boundary nodes (shape nb x n^2)."""
    bidx = grid.boundary_idx
    nx, ny = grid.normals[:, 0], grid.normals[:, 1]
    gx = grid.dx_matrix[bidx]
    gy = grid.dy_matrix[bidx]
    dnx = sp.diags(nx * a.a11[bidx] + ny * a.a12[bidx])
    dny = sp.diags(nx * a.a12[bidx] + ny * a.a22[bidx])
    return (dnx @ gx + dny @ gy).tocsr()


def div_a_grad(grid: Grid, a: DiffusionField, u: ScalarField) -> ScalarField:
    """Apply ``div(A grad .)`` to a field (see :func:`div_a_grad_matrix`)."""
    _check_same_grid(grid, u)
    return ScalarField(grid, div_a_grad_matrix(grid, a) @ u.values)


def gradient(grid: Grid, u: ScalarField) -> tuple[ScalarField, ScalarField]:
    """Second-order gradient (centered inside, one-sided on the boundary)."""
    _check_same_grid(grid, u)
    return (ScalarField(grid, grid.dx_matrix @ u.values),
            ScalarField(grid, grid.dy_matrix @ u.values))


def normal_flux(grid: Grid, a: DiffusionField, u: ScalarField) -> np.ndarray:
    """``A grad u . nu`` at each boundary node, in ``grid.boundary_idx`` order."""
    _check_same_grid(grid, u)
    return normal_flux_matrix(grid, a) @ u.values


def l2_norm(grid: Grid, u: ScalarField) -> float:
    """Discrete L2 norm: plain node-sum quadrature, sqrt(dx*dy*sum u^2)."""
    _check_same_grid(grid, u)
    return float(np.sqrt(grid.cell_measure * np.sum(u.values**2)))
