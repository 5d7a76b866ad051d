"""One inner step of the contraction map: the weighted, regularized
least-squares (quasi-reversibility) solve.

Given the current iterate ``u``, the next iterate minimizes over all fields
``phi`` matching the Cauchy data

    q(phi) = dx*dy * sum_nodes  w * (L phi + F(x, u, grad u))^2
           + bc_penalty * sum_boundary (B phi - g)^2
           + epsilon * ||phi||^2_{H2,discrete}

where ``L = div(A grad .)``, ``B = A grad . nu`` and ``w`` is the Carleman
weight.  Dirichlet data is eliminated exactly (phi = f substituted on the
boundary); the Neumann condition enters as penalized rows.  The resulting
normal equations ``M z = b`` are symmetric positive definite for any
epsilon > 0 and are solved either by a sparse direct factorization
(default) or by Jacobi-preconditioned conjugate gradients.

:class:`QrmOperator` caches everything that does not depend on the current
iterate (matrix, factorization, boundary data terms), so a fixed-point
sweep costs one factorization plus one triangular solve per iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import (DiffusionField, Grid, ScalarField, div_a_grad_matrix,
                   normal_flux_matrix)
from .nonlinearity import NonlinearitySpec, field_source
from .weights import CarlemanParams, weight_field

_SOLVER_ALIASES = {
    "direct": "direct",
    "sparse-direct-spd": "direct",
    "cg": "cg",
    "conjugate-gradient": "cg",
}


class SolverError(RuntimeError):
    """Factorization failure or iterative non-convergence, with diagnostics."""


@dataclass(frozen=True)
class QrmConfig:
    """Settings of the inner least-squares solve."""

    epsilon: float = 1e-6
    bc_penalty: float = 1e6
    solver: str = "direct"
    cg_tol: float = 1e-12
    cg_max_iter: Optional[int] = None  # defaults to 10 * n_nodes at solve time

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.bc_penalty <= 0:
            raise ValueError(f"bc_penalty must be positive, got {self.bc_penalty}")
        key = str(self.solver).lower()
        if key not in _SOLVER_ALIASES:
            raise ValueError(f"unknown solver {self.solver!r}; "
                             f"choose from {sorted(set(_SOLVER_ALIASES))}")
        object.__setattr__(self, "solver", _SOLVER_ALIASES[key])


@dataclass
class LinearSystem:
    """Normal equations on the interior unknowns, Dirichlet rows eliminated."""

    matrix: sp.csr_matrix          # SPD, interior x interior
    rhs: np.ndarray
    grid: Grid
    dirichlet: np.ndarray          # boundary values to re-insert after solving


def _h2_regularizer(grid: Grid) -> sp.csr_matrix:
    """Gram matrix of the discrete H2 norm (value, gradient, full Hessian)."""
    dx2 = grid.cell_measure
    eye = sp.identity(grid.n_nodes, format="csr")
    dx_m, dy_m = grid.dx_matrix, grid.dy_matrix
    dxx, dyy, dxy = grid.dxx_matrix, grid.dyy_matrix, grid.dxy_matrix
    reg = (eye + dx_m.T @ dx_m + dy_m.T @ dy_m
           + dxx.T @ dxx + dyy.T @ dyy + 2.0 * (dxy.T @ dxy))
    return (dx2 * reg).tocsr()


def _build_normal_equations(grid: Grid, a: DiffusionField, w_values: np.ndarray,
                            cfg: QrmConfig):
    """Shared assembly of K = L^T W L + pen B^T B + eps R and its interior block."""
    w_quad = grid.cell_measure * w_values
    op_pde = div_a_grad_matrix(grid, a)
    op_neumann = normal_flux_matrix(grid, a)
    k_full = (op_pde.T @ sp.diags(w_quad) @ op_pde
              + cfg.bc_penalty * (op_neumann.T @ op_neumann)
              + cfg.epsilon * _h2_regularizer(grid)).tocsr()
    iidx = grid.interior_idx
    m = k_full[iidx][:, iidx]
    matrix = ((m + m.T) * 0.5).tocsr()               # exact symmetry
    return w_quad, op_pde, op_neumann, k_full, matrix


class QrmOperator:
    """The iterate-independent part of the inner solve, cached once.

    Holds the differential operator ``L``, the Neumann rows ``B``, the
    assembled quadratic form ``K = L^T W L + pen B^T B + eps R`` and (for
    the direct backend) its factorization after Jacobi equilibration.
    Boundary data only enters the right-hand side, so one operator serves
    every noise level and every outer iteration on a given grid.
    """

    def __init__(self, grid: Grid, a: DiffusionField, params: CarlemanParams,
                 cfg: QrmConfig):
        self.grid = grid
        self.a = a
        self.params = params
        self.cfg = cfg

        w = weight_field(params, grid).values
        (self.w_quad, self.op_pde, self.op_neumann,
         self._k_full, self.matrix) = _build_normal_equations(grid, a, w, cfg)

        scale = 1.0 / np.sqrt(self.matrix.diagonal())
        self._equil = scale
        self._m_equil = (sp.diags(scale) @ self.matrix @ sp.diags(scale)).tocsc()
        self._lu = None

    def rhs_for(self, source: np.ndarray, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        grid = self.grid
        if f.shape != (grid.n_boundary,) or g.shape != (grid.n_boundary,):
            raise ValueError("boundary data length does not match the grid")
        lift = np.zeros(grid.n_nodes)
        lift[grid.boundary_idx] = f
        full = (self._k_full @ lift
                + self.op_pde.T @ (self.w_quad * source)
                - self.cfg.bc_penalty * (self.op_neumann.T @ g))
        return -full[grid.interior_idx]

    def system_for(self, source: np.ndarray, f: np.ndarray,
                   g: np.ndarray) -> LinearSystem:
        return LinearSystem(matrix=self.matrix,
                            rhs=self.rhs_for(source, f, g),
                            grid=self.grid,
                            dirichlet=np.asarray(f, dtype=float))

    def _solve_interior(self, rhs: np.ndarray) -> np.ndarray:
        if self.cfg.solver == "direct" and self._lu is None:
            self._lu = _factorize(self._m_equil)
        z, _ = _solve_equilibrated(self.matrix, self._m_equil, self._equil,
                                   rhs, self.cfg, self.grid.n_nodes, lu=self._lu)
        return z

    def solve(self, source: np.ndarray, f: np.ndarray, g: np.ndarray) -> ScalarField:
        """Minimize the quadratic for a fixed source term; re-insert Dirichlet data."""
        z = self._solve_interior(self.rhs_for(source, f, g))
        full = np.empty(self.grid.n_nodes)
        full[self.grid.interior_idx] = z
        full[self.grid.boundary_idx] = f
        return ScalarField(self.grid, full)

    def apply(self, spec: NonlinearitySpec, u: ScalarField, f: np.ndarray,
              g: np.ndarray) -> ScalarField:
        """One application of the contraction map: source from u, then solve."""
        source = field_source(spec, self.grid, u).values
        return self.solve(source, f, g)

    def quadratic_value(self, phi: ScalarField, source: np.ndarray,
                        g: np.ndarray) -> float:
        """Evaluate the minimized functional q(phi) (diagnostic)."""
        pde = self.op_pde @ phi.values + source
        neu = self.op_neumann @ phi.values - g
        reg = _h2_regularizer(self.grid) @ phi.values
        return float(np.sum(self.w_quad * pde**2)
                     + self.cfg.bc_penalty * np.sum(neu**2)
                     + self.cfg.epsilon * float(phi.values @ reg))


def assemble(grid: Grid, a: DiffusionField, w: ScalarField, source: ScalarField,
             f: np.ndarray, g: np.ndarray, cfg: QrmConfig) -> LinearSystem:
    """Build the eliminated normal equations ``M z = b`` for one inner solve.

    ``w`` is the Carleman weight field, ``source`` the frozen nonlinearity
    values, ``f``/``g`` the Dirichlet/Neumann boundary data in
    ``grid.boundary_idx`` order.
    """
    for fld, name in ((w, "weight"), (source, "source")):
        if fld.values.shape != (grid.n_nodes,):
            raise ValueError(f"{name} field does not match the grid")
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != (grid.n_boundary,) or g.shape != (grid.n_boundary,):
        raise ValueError("boundary data length does not match the grid")

    w_quad, op_pde, op_neumann, k_full, matrix = _build_normal_equations(
        grid, a, w.values, cfg)

    iidx = grid.interior_idx
    lift = np.zeros(grid.n_nodes)
    lift[grid.boundary_idx] = f
    rhs = -(k_full @ lift + op_pde.T @ (w_quad * source.values)
            - cfg.bc_penalty * (op_neumann.T @ g))[iidx]
    return LinearSystem(matrix=matrix, rhs=rhs, grid=grid, dirichlet=f)


def _factorize(m_equil_csc: sp.csc_matrix):
    try:
        return spla.splu(m_equil_csc, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc


def _solve_equilibrated(matrix: sp.csr_matrix, m_equil: sp.csc_matrix,
                        scale: np.ndarray, rhs: np.ndarray, cfg: QrmConfig,
                        n_nodes: int, lu=None):
    """Solve M z = rhs through its Jacobi-equilibrated form."""
    if cfg.solver == "direct":
        if lu is None:
            lu = _factorize(m_equil)
        z = scale * lu.solve(scale * rhs)
        # one refinement step recovers the digits lost to the penalty imbalance
        r = rhs - matrix @ z
        z = z + scale * lu.solve(scale * r)
    else:
        maxiter = cfg.cg_max_iter or 10 * n_nodes
        z, info = spla.cg(matrix, rhs, rtol=cfg.cg_tol, atol=0.0,
                          maxiter=maxiter, M=sp.diags(scale**2))
        if info != 0:
            res = np.linalg.norm(rhs - matrix @ z)
            raise SolverError(
                f"CG did not converge in {maxiter} iterations "
                f"(info={info}, residual {res:.3e}, |rhs| {np.linalg.norm(rhs):.3e})")
    return z, lu


def solve_qrm(system: LinearSystem, cfg: QrmConfig) -> ScalarField:
    """Solve assembled normal equations and re-insert the Dirichlet values."""
    grid = system.grid
    scale = 1.0 / np.sqrt(system.matrix.diagonal())
    m_equil = (sp.diags(scale) @ system.matrix @ sp.diags(scale)).tocsc()
    z, _ = _solve_equilibrated(system.matrix, m_equil, scale, system.rhs, cfg,
                               grid.n_nodes)
    full = np.empty(grid.n_nodes)
    full[grid.interior_idx] = z
    full[grid.boundary_idx] = system.dirichlet
    return ScalarField(grid, full)


def phi_step(grid: Grid, a: DiffusionField, params: CarlemanParams,
             spec: NonlinearitySpec, f: np.ndarray, g: np.ndarray,
             cfg: QrmConfig, u_current: ScalarField) -> ScalarField:
    """One-shot contraction-map application (assembles from scratch).

    Fixed-point loops should construct a :class:`QrmOperator` once and call
    :meth:`QrmOperator.apply` instead.
    """
    w = weight_field(params, grid)
    source = field_source(spec, grid, u_current)
    system = assemble(grid, a, w, source, np.asarray(f, float),
                      np.asarray(g, float), cfg)
    return solve_qrm(system, cfg)
