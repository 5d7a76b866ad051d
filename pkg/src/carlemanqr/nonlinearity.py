"""Nonlinearity contract F(x, s, p) and the optional smooth cutoff.

``F`` takes a point ``x``, the solution value ``s`` and the gradient ``p``
and returns a real number; no smoothness is assumed (the bundled problems
include absolute values and a jump).  The cutoff multiplies ``F`` by a
C-infinity bump that is 1 where ``sqrt(s^2 + |p|^2) <= M`` and 0 beyond
``2M``, built from the classical ``exp(-1/t)`` partition-of-unity blend.
By default no cutoff is applied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .grid import Grid, ScalarField, gradient


class NonlinearityEvalError(RuntimeError):
    """Raised when F returns a non-finite value; carries the node location."""


def _bump(t: np.ndarray) -> np.ndarray:
    """exp(-1/t) for t > 0, else 0 (smooth at t = 0)."""
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def chi_m(s, p, m: float):
    """Smooth cutoff in q = sqrt(s^2 + |p|^2): 1 on [0, m], 0 on [2m, inf).

    The transition uses sigma(2 - q/m) with sigma(t) = e(t)/(e(t) + e(1-t)),
    e(t) = exp(-1/t) for t > 0 else 0, which is C-infinity and equals 1/2 at
    q = 1.5 m.  Accepts scalars or arrays (broadcast over nodes).
    """
    if m <= 0:
        raise ValueError(f"cutoff bound must be positive, got {m}")
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=float))
    p = np.asarray(p, dtype=float).reshape(s.size, -1)
    q = np.sqrt(s**2 + np.sum(p**2, axis=-1))
    t = 2.0 - q / m
    et, e1t = _bump(t), _bump(1.0 - t)
    # the two bumps never vanish together: et = 0 needs q >= 2m, e1t = 0 needs q <= m
    sigma = et / (et + e1t)
    return float(sigma[0]) if scalar else sigma


@dataclass(frozen=True)
class NonlinearitySpec:
    """A nonlinearity F plus an optional truncation bound M.

    ``f_eval(x, s, p)`` maps a point, value and gradient to a real number.
    When ``vectorized`` is set, ``f_eval`` must also accept arrays
    (``x: (m, 2)``, ``s: (m,)``, ``p: (m, 2)``) and return ``(m,)`` values;
    otherwise it is called once per node.  ``cutoff_bound=None`` means the
    raw F is used (the default; all bundled problems run untruncated).
    """

    f_eval: Callable
    cutoff_bound: Optional[float] = None
    vectorized: bool = False
    name: str = ""

    def __post_init__(self):
        if self.cutoff_bound is not None and self.cutoff_bound <= 0:
            raise ValueError(f"cutoff_bound must be positive, got {self.cutoff_bound}")


ZERO = NonlinearitySpec(f_eval=lambda x, s, p: np.zeros(np.shape(s)),
                        vectorized=True, name="zero")


def eval_f(spec: NonlinearitySpec, x, s, p):
    """Evaluate F (or chi_M * F when a cutoff bound is set) at one point or many."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    ss = np.atleast_1d(np.asarray(s, dtype=float))
    ps = np.atleast_2d(np.asarray(p, dtype=float))

    if spec.vectorized:
        vals = np.asarray(spec.f_eval(xs, ss, ps), dtype=float).reshape(ss.shape)
    else:
        vals = np.array([float(spec.f_eval(xs[k], ss[k], ps[k]))
                         for k in range(ss.size)])
    if spec.cutoff_bound is not None:
        vals = vals * chi_m(ss, ps, spec.cutoff_bound)
    if not np.all(np.isfinite(vals)):
        k = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise NonlinearityEvalError(
            f"F returned a non-finite value at x={tuple(xs[k])}, "
            f"s={ss[k]:.6g}, p={tuple(ps[k])}")
    return float(vals[0]) if single else vals


def field_source(spec: NonlinearitySpec, grid: Grid, u: ScalarField) -> ScalarField:
    """F_M(x, u(x), grad u(x)) sampled node-wise, gradient by the grid operators."""
    ux, uy = gradient(grid, u)
    p = np.column_stack([ux.values, uy.values])
    vals = eval_f(spec, grid.node_xy(), u.values, p)
    return ScalarField(grid, vals)
