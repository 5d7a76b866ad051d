"""Scikit-learn style front end: fit on boundary Cauchy data, predict the field.

The estimator wraps the fixed-point solver so the reconstruction composes
with the usual ecosystem conventions: constructor parameters only store
settings, ``fit(f, g)`` consumes the Dirichlet/Neumann boundary samples and
exposes the recovered field through fitted attributes, and ``predict``
evaluates the field at arbitrary points by bilinear interpolation.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils import check_array

from .driver import DriverConfig, IterationTrace, fixed_point_solve
from .grid import DiffusionField, Grid, ScalarField
from .nonlinearity import ZERO, NonlinearitySpec
from .problems import make_problem
from .qrm import QrmConfig
from .weights import CarlemanParams


class CarlemanContractionSolver(BaseEstimator):
    """Recover a field on a rectangle from over-determined boundary data.

    Parameters
    ----------
    nonlinearity : str or NonlinearitySpec, default "zero"
        Gradient nonlinearity F(x, u, grad u) of the equation
        ``div(A grad u) + F = 0``.  A string selects a bundled problem's
        nonlinearity by name.
    n : int, default 150
        Nodes per axis of the uniform grid.
    bounds : tuple (xmin, xmax, ymin, ymax), default (-1, 1, -1, 1)
    lam, beta, x0 : Carleman weight parameters.
    epsilon : regularization strength of the inner solve.
    bc_penalty : weight of the penalized Neumann rows.
    solver : "direct" or "cg" linear backend.
    kappa0 : L2 stopping threshold of the outer loop.
    max_iter : outer iteration cap.
    diffusion : optional callable (x, y) -> (a11, a12, a22); identity if None.
    ellipticity : ellipticity constant used to validate ``diffusion``.

    Attributes (after fit)
    ----------------------
    grid_ : Grid
    solution_ : ndarray of shape (n*n,), the recovered field
    n_iter_ : int, outer iterations performed
    converged_ : bool
    trace_ : IterationTrace
    """

    def __init__(self, nonlinearity="zero", n=150, bounds=(-1.0, 1.0, -1.0, 1.0),
                 lam=3.0, beta=10.0, x0=(0.0, 9.0), epsilon=1e-6,
                 bc_penalty=1e6, solver="direct", kappa0=1e-3, max_iter=50,
                 diffusion=None, ellipticity=1.0):
        self.nonlinearity = nonlinearity
        self.n = n
        self.bounds = bounds
        self.lam = lam
        self.beta = beta
        self.x0 = x0
        self.epsilon = epsilon
        self.bc_penalty = bc_penalty
        self.solver = solver
        self.kappa0 = kappa0
        self.max_iter = max_iter
        self.diffusion = diffusion
        self.ellipticity = ellipticity

    def _build_grid(self) -> Grid:
        xmin, xmax, ymin, ymax = self.bounds
        return Grid(xmin, xmax, ymin, ymax, n=self.n)

    def _resolve_nonlinearity(self, grid: Grid) -> NonlinearitySpec:
        if isinstance(self.nonlinearity, NonlinearitySpec):
            return self.nonlinearity
        if self.nonlinearity == "zero":
            return ZERO
        if isinstance(self.nonlinearity, str):
            return make_problem(self.nonlinearity, grid).nonlinearity
        raise TypeError("nonlinearity must be a NonlinearitySpec or a known name")

    def fit(self, f, g):
        """Run the fixed-point reconstruction from boundary samples.

        ``f`` (Dirichlet) and ``g`` (Neumann) must be 1-d arrays over the
        boundary nodes in ``grid_.boundary_idx`` order.
        """
        grid = self._build_grid()
        f = np.asarray(f, dtype=float).ravel()
        g = np.asarray(g, dtype=float).ravel()
        if f.shape != (grid.n_boundary,) or g.shape != (grid.n_boundary,):
            raise ValueError(
                f"boundary data must have length {grid.n_boundary} "
                f"(got f: {f.size}, g: {g.size})")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise ValueError("boundary data contains non-finite entries")

        if self.diffusion is None:
            a = DiffusionField.identity(grid)
        else:
            a = DiffusionField.from_callable(grid, self.diffusion, self.ellipticity)
        params = CarlemanParams(lam=self.lam, beta=self.beta, x0=tuple(self.x0))
        qrm_cfg = QrmConfig(epsilon=self.epsilon, bc_penalty=self.bc_penalty,
                            solver=self.solver)
        drv_cfg = DriverConfig(kappa0=self.kappa0, max_iter=self.max_iter)
        spec = self._resolve_nonlinearity(grid)

        u, trace = fixed_point_solve(grid, a, params, spec, f, g,
                                     qrm_cfg, drv_cfg)
        self.grid_ = grid
        self.solution_ = u.values
        self.trace_ = trace
        self.n_iter_ = trace.iterations
        self.converged_ = trace.converged
        return self

    def predict(self, X):
        """Field values at query points ``X`` of shape (m, 2), bilinear."""
        if not hasattr(self, "solution_"):
            raise NotFittedError("call fit before predict")
        X = check_array(X, ensure_2d=True)
        if X.shape[1] != 2:
            raise ValueError(f"expected points of shape (m, 2), got {X.shape}")
        grid = self.grid_
        interp = RegularGridInterpolator(
            (grid.ys, grid.xs), self.solution_.reshape(grid.n, grid.n),
            method="linear", bounds_error=True)
        return interp(np.column_stack([X[:, 1], X[:, 0]]))

    def solution_field(self) -> ScalarField:
        if not hasattr(self, "solution_"):
            raise NotFittedError("call fit before requesting the solution")
        return ScalarField(self.grid_, self.solution_)
