"""Bundled manufactured test problems, Cauchy-data sampling and error metrics.

Each problem carries an analytic solution ``u*`` together with a
nonlinearity into which the manufactured source term has been folded:
``F(x, s, p) = N(s, p) - [Lap(u*)(x) + N(u*(x), grad u*(x))]``, so ``u*``
solves ``Lap(u) + F(x, u, grad u) = 0`` identically.  Boundary data is
sampled from ``u*`` and its analytic gradient, optionally perturbed by the
multiplicative noise model ``f = f*(1 + delta*rand)`` with node-wise
independent uniform draws on [-1, 1] (separate draws for f and g).

The four quasi-linear problems stress, in order: a smooth gradient
nonlinearity, quadratic gradient growth, a non-smooth (absolute value)
nonlinearity, and a jump discontinuity in the gradient dependence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .grid import DiffusionField, Grid, ScalarField, l2_norm
from .nonlinearity import NonlinearitySpec, ZERO


@dataclass(frozen=True)
class NoiseModel:
    """Multiplicative boundary noise: data * (1 + delta * rand).

    ``rand`` draws i.i.d. uniform values on [-1, 1] per boundary node,
    first for the Dirichlet data and then for the Neumann data, from one
    generator seeded with ``seed``.  ``distribution="ones"`` replaces the
    draws by the constant 1 (endpoint of the range; test hook).
    """

    delta: float = 0.0
    seed: int = 0
    distribution: str = "uniform"

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if self.distribution not in ("uniform", "ones"):
            raise ValueError(f"unknown distribution {self.distribution!r}")


@dataclass(frozen=True)
class ProblemSpec:
    """A boundary-value problem instance on a fixed grid."""

    name: str
    grid: Grid
    diffusion: DiffusionField
    nonlinearity: NonlinearitySpec
    exact_solution: Optional[Callable] = None   # (x, y) -> u, vectorized
    exact_gradient: Optional[Callable] = None   # (x, y) -> (ux, uy), vectorized


def _fold_source(nonlinear_part: Callable, u_star: Callable, grad_star: Callable,
                 lap_star: Callable, name: str) -> NonlinearitySpec:
    """Fold the manufactured source into F so that u* solves Lap u + F = 0."""

    def f_eval(x, s, p):
        xs, ys = x[:, 0], x[:, 1]
        ux, uy = grad_star(xs, ys)
        source = lap_star(xs, ys) + nonlinear_part(u_star(xs, ys), ux, uy)
        return nonlinear_part(s, p[:, 0], p[:, 1]) - source

    return NonlinearitySpec(f_eval=f_eval, vectorized=True, name=name)


def _make_test1(grid: Grid) -> ProblemSpec:
    # u* = sin(pi(x+y)); F has a smooth sqrt(|p|^2 + 1) gradient term
    u_star = lambda x, y: np.sin(np.pi * (x + y))
    grad = lambda x, y: (np.pi * np.cos(np.pi * (x + y)),
                         np.pi * np.cos(np.pi * (x + y)))
    lap = lambda x, y: -2.0 * np.pi**2 * np.sin(np.pi * (x + y))
    part = lambda s, p1, p2: s + np.sqrt(p1**2 + p2**2 + 1.0)
    return ProblemSpec("test1", grid, DiffusionField.identity(grid),
                       _fold_source(part, u_star, grad, lap, "test1"),
                       u_star, grad)


def _make_test2(grid: Grid) -> ProblemSpec:
    # u* = x^2 - 2y^2; F grows quadratically in the gradient
    u_star = lambda x, y: x**2 - 2.0 * y**2
    grad = lambda x, y: (2.0 * x, -4.0 * y)
    lap = lambda x, y: -2.0 * np.ones_like(x)
    part = lambda s, p1, p2: p1 - p2**2
    return ProblemSpec("test2", grid, DiffusionField.identity(grid),
                       _fold_source(part, u_star, grad, lap, "test2"),
                       u_star, grad)


def _make_test3(grid: Grid) -> ProblemSpec:
    # u* = sin(pi(x^2+y^2)); F is non-smooth: |u_x| - |u_y|
    u_star = lambda x, y: np.sin(np.pi * (x**2 + y**2))
    grad = lambda x, y: (2.0 * np.pi * x * np.cos(np.pi * (x**2 + y**2)),
                         2.0 * np.pi * y * np.cos(np.pi * (x**2 + y**2)))

    def lap(x, y):
        r2 = x**2 + y**2
        return 4.0 * np.pi * np.cos(np.pi * r2) - 4.0 * np.pi**2 * r2 * np.sin(np.pi * r2)

    part = lambda s, p1, p2: np.abs(p1) - np.abs(p2)
    return ProblemSpec("test3", grid, DiffusionField.identity(grid),
                       _fold_source(part, u_star, grad, lap, "test3"),
                       u_star, grad)


_JUMP_AT = np.log(30.0)


def _make_test4(grid: Grid) -> ProblemSpec:
    # u* = sin(4 pi x - 2 pi y^2) + y; F jumps: s^2 - e^{p2} only while e^{p2} < 30
    theta = lambda x, y: 4.0 * np.pi * x - 2.0 * np.pi * y**2
    u_star = lambda x, y: np.sin(theta(x, y)) + y
    grad = lambda x, y: (4.0 * np.pi * np.cos(theta(x, y)),
                         -4.0 * np.pi * y * np.cos(theta(x, y)) + 1.0)

    def lap(x, y):
        th = theta(x, y)
        return (-16.0 * np.pi**2 * np.sin(th) - 4.0 * np.pi * np.cos(th)
                - 16.0 * np.pi**2 * y**2 * np.sin(th))

    def part(s, p1, p2):
        active = p2 < _JUMP_AT  # e^{p2} < 30, strict, no smoothing
        return np.where(active, s**2 - np.exp(np.where(active, p2, 0.0)), 0.0)

    return ProblemSpec("test4", grid, DiffusionField.identity(grid),
                       _fold_source(part, u_star, grad, lap, "test4"),
                       u_star, grad)


def _make_linear(grid: Grid) -> ProblemSpec:
    # u* = x + y with no nonlinearity: pure over-determined linear solve
    return ProblemSpec("linear", grid, DiffusionField.identity(grid), ZERO,
                       lambda x, y: x + y,
                       lambda x, y: (np.ones_like(x), np.ones_like(y)))


_BUILDERS = {"test1": _make_test1, "test2": _make_test2, "test3": _make_test3,
             "test4": _make_test4, "linear": _make_linear}

PROBLEM_NAMES = tuple(_BUILDERS)


def make_test(k: int, grid: Grid) -> ProblemSpec:
    """The k-th bundled quasi-linear problem, k in 1..4."""
    if k not in (1, 2, 3, 4):
        raise ValueError(f"test index must be 1..4, got {k}")
    return _BUILDERS[f"test{k}"](grid)


def make_problem(name: str, grid: Grid) -> ProblemSpec:
    """Look up any bundled problem by name (test1..test4, linear)."""
    try:
        return _BUILDERS[name](grid)
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; "
                         f"choose from {sorted(_BUILDERS)}") from None


def sample_cauchy_data(spec: ProblemSpec, grid: Grid,
                       noise: NoiseModel) -> tuple[np.ndarray, np.ndarray]:
    """Dirichlet and Neumann boundary data from u*, optionally noisy.

    Returns ``(f, g)`` in ``grid.boundary_idx`` order.  Deterministic per
    seed; ``delta = 0`` reproduces the exact data regardless of the seed.
    """
    if spec.exact_solution is None or spec.exact_gradient is None:
        raise ValueError(f"problem {spec.name!r} has no exact solution to sample")
    bidx = grid.boundary_idx
    xb, yb = grid.x[bidx], grid.y[bidx]
    f_star = np.asarray(spec.exact_solution(xb, yb), dtype=float)
    ux, uy = spec.exact_gradient(xb, yb)
    a = spec.diffusion
    flux_x = a.a11[bidx] * ux + a.a12[bidx] * uy
    flux_y = a.a12[bidx] * ux + a.a22[bidx] * uy
    g_star = grid.normals[:, 0] * flux_x + grid.normals[:, 1] * flux_y

    rng = np.random.default_rng(noise.seed)
    if noise.distribution == "ones":
        rand1 = np.ones(bidx.size)
        rand2 = np.ones(bidx.size)
    else:
        rand1 = rng.uniform(-1.0, 1.0, bidx.size)
        rand2 = rng.uniform(-1.0, 1.0, bidx.size)
    return (f_star * (1.0 + noise.delta * rand1),
            g_star * (1.0 + noise.delta * rand2))


def error_report(u_comp: ScalarField, spec: ProblemSpec,
                 grid: Grid) -> tuple[float, float]:
    """Relative errors (max |u*-u| / max |u*|, L2(u*-u) / L2(u*))."""
    if spec.exact_solution is None:
        raise ValueError(f"problem {spec.name!r} has no exact solution")
    exact = np.asarray(spec.exact_solution(grid.x, grid.y), dtype=float)
    diff = exact - u_comp.values
    rel_linf = float(np.max(np.abs(diff)) / np.max(np.abs(exact)))
    rel_l2 = l2_norm(grid, ScalarField(grid, diff)) / l2_norm(grid, ScalarField(grid, exact))
    return rel_linf, float(rel_l2)
