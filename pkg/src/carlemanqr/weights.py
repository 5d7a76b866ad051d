"""Carleman weight ``exp(2*lam*|x - x0|^-beta)`` and the weighted H1-type norm.

The weight center ``x0`` must lie outside the closed domain with
``|x - x0| > 1`` everywhere on it, so the exponent ``mu = r^-beta`` lies in
(0, 1) and the weight in (1, exp(2*lam)).  With the shipped defaults
(lam=3, beta=10, x0=(0, 9)) the weight is numerically within ~1e-8 of 1;
it is still applied faithfully so that lam/beta/x0 sensitivity can be
studied through configuration alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, gradient, _check_same_grid


class WeightDomainError(ValueError):
    """Raised when the weight center is too close to (or inside) the domain."""


@dataclass(frozen=True)
class CarlemanParams:
    """Weight parameters: strength ``lam``, decay ``beta``, center ``x0``."""

    lam: float = 3.0
    beta: float = 10.0
    x0: tuple[float, float] = (0.0, 9.0)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "x0", (float(self.x0[0]), float(self.x0[1])))

    def validate_on(self, grid: Grid) -> None:
        """Check x0 lies outside the closed domain and r > 1 at every node."""
        x0, y0 = self.x0
        inside = (grid.xmin <= x0 <= grid.xmax) and (grid.ymin <= y0 <= grid.ymax)
        if inside:
            raise WeightDomainError(
                f"weight center {self.x0} lies in the closed domain "
                f"[{grid.xmin}, {grid.xmax}] x [{grid.ymin}, {grid.ymax}]")
        r_min = float(np.min(np.hypot(grid.x - x0, grid.y - y0)))
        if r_min <= 1.0:
            raise WeightDomainError(
                f"need |x - x0| > 1 on the domain, min distance is {r_min:.6g}")


def mu(params: CarlemanParams, x) -> float | np.ndarray:
    """Weight exponent ``|x - x0|^-beta`` at a point (or array of points)."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.hypot(pts[:, 0] - params.x0[0], pts[:, 1] - params.x0[1])
    if np.any(r <= 1.0):
        bad = pts[np.argmin(r)]
        raise WeightDomainError(
            f"|x - x0| must exceed 1, got {r.min():.6g} at x={tuple(bad)}")
    out = r ** (-params.beta)
    return float(out[0]) if np.ndim(x) == 1 else out


def weight_field(params: CarlemanParams, grid: Grid) -> ScalarField:
    """Node-wise weight ``w = exp(2*lam*mu)``; every value lies in (1, e^(2 lam))."""
    params.validate_on(grid)
    m = mu(params, grid.node_xy())
    return ScalarField(grid, np.exp(2.0 * params.lam * m))


def h_lambda_beta_norm(params: CarlemanParams, grid: Grid, u: ScalarField) -> float:
    """Weighted H1 norm: sqrt(dx*dy * sum w*(u^2 + |grad u|^2))."""
    _check_same_grid(grid, u)
    w = weight_field(params, grid).values
    ux, uy = gradient(grid, u)
    total = np.sum(w * (u.values**2 + ux.values**2 + uy.values**2))
    return float(np.sqrt(grid.cell_measure * total))
