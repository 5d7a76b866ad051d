"""Grid construction and finite-difference operator verification.

Operator accuracy is checked against hand-expanded derivatives (polynomial
exactness to round-off) and by grid-refinement slope fits on smooth fields.
"""

import numpy as np
import pytest

from carlemanqr import DiffusionField, Grid, div_a_grad, gradient, l2_norm, normal_flux


# ----- construction -----------------------------------------------------------


def test_node_coordinates_follow_uniform_formula():
    g = Grid(-1.0, 1.0, -1.0, 1.0, n=21)
    assert g.dx == pytest.approx(0.1)
    assert np.array_equal(g.xs, -1.0 + g.dx * np.arange(21))
    assert np.array_equal(g.ys, -1.0 + g.dy * np.arange(21))
    # flat order is (j, i): x varies fastest
    assert np.array_equal(g.x[:21], g.xs)
    assert np.all(g.y[:21] == g.ys[0])


def test_every_node_classified_exactly_once(grid21):
    both = grid21.interior_mask & grid21.boundary_mask
    either = grid21.interior_mask | grid21.boundary_mask
    assert not both.any()
    assert either.all()
    assert grid21.boundary_idx.size == 4 * 21 - 4


def test_normals_are_unit_and_axis_aligned(grid21):
    g = grid21
    norms = np.linalg.norm(g.normals, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-15)
    # face nodes carry the outward axis direction
    for b, (nx, ny) in zip(g.boundary_idx, g.normals):
        x, y = g.x[b], g.y[b]
        if x == g.xmin and g.ymin < y < g.ymax:
            assert (nx, ny) == (-1.0, 0.0)
        elif x == g.xmax and g.ymin < y < g.ymax:
            assert (nx, ny) == (1.0, 0.0)
        elif y == g.ymin and g.xmin < x < g.xmax:
            assert (nx, ny) == (0.0, -1.0)
        elif y == g.ymax and g.xmin < x < g.xmax:
            assert (nx, ny) == (0.0, 1.0)


def test_corner_normals_are_diagonal(grid21):
    g = grid21
    s = 1.0 / np.sqrt(2.0)
    corners = {(g.xmin, g.ymin): (-s, -s), (g.xmax, g.ymin): (s, -s),
               (g.xmin, g.ymax): (-s, s), (g.xmax, g.ymax): (s, s)}
    found = 0
    for b, nu in zip(g.boundary_idx, g.normals):
        key = (g.x[b], g.y[b])
        if key in corners:
            assert np.allclose(nu, corners[key], atol=1e-15)
            found += 1
    assert found == 4


def test_grid_rejects_tiny_or_degenerate_domains():
    with pytest.raises(ValueError):
        Grid(n=4)
    with pytest.raises(ValueError):
        Grid(1.0, -1.0, -1.0, 1.0, n=11)


def test_field_shape_and_finiteness_are_validated(grid21):
    with pytest.raises(ValueError):
        grid21.field(np.ones(7))
    bad = np.ones(grid21.n_nodes)
    bad[3] = np.inf
    with pytest.raises(ValueError):
        grid21.field(bad)


def test_diffusion_ellipticity_checked_at_every_node(grid21):
    n = grid21.n_nodes
    with pytest.raises(ValueError, match="ellipticity"):
        # indefinite tensor: eigenvalues +-1
        DiffusionField(grid21, np.zeros(n), np.ones(n), np.zeros(n), ellipticity=0.5)
    # anisotropic but uniformly elliptic with lam = 0.4
    DiffusionField.from_callable(grid21, lambda x, y: (1 + x**2, 0 * x, 1 + 0 * x),
                                 ellipticity=0.4)


# ----- div(A grad u) ----------------------------------------------------------


def test_laplacian_annihilates_linears_everywhere(grid21, ident21):
    u = grid21.field_from_callable(lambda x, y: x + y)
    out = div_a_grad(grid21, ident21, u)
    assert np.max(np.abs(out.values)) < 1e-11


def test_laplacian_of_x2_plus_y2_is_four_at_interior(grid21, ident21):
    u = grid21.field_from_callable(lambda x, y: x**2 + y**2)
    out = div_a_grad(grid21, ident21, u)
    assert np.allclose(out.values[grid21.interior_mask], 4.0, atol=1e-9)


def test_variable_coefficient_matches_expanded_derivative():
    # a = diag(1+x^2, 1), u = x^2: d/dx((1+x^2)*2x) = 2 + 6x^2 by hand
    g = Grid(n=21)
    a = DiffusionField.from_callable(g, lambda x, y: (1 + x**2, 0 * x, 1 + 0 * x),
                                     ellipticity=0.4)
    u = g.field_from_callable(lambda x, y: x**2)
    out = div_a_grad(g, a, u)
    exact = 2.0 + 6.0 * g.x**2
    err = np.abs(out.values - exact)[g.interior_mask]
    assert err.max() <= 2.0 * g.dx**2


def test_div_a_grad_second_order_convergence():
    errs, ns = [], (21, 41, 81)
    for n in ns:
        g = Grid(n=n)
        a = DiffusionField.identity(g)
        u = g.field_from_callable(lambda x, y: np.sin(np.pi * x) * np.cos(np.pi * y))
        exact = -2 * np.pi**2 * np.sin(np.pi * g.x) * np.cos(np.pi * g.y)
        out = div_a_grad(g, a, u)
        errs.append(np.max(np.abs(out.values - exact)))
    slope = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


def test_div_a_grad_rejects_mismatched_field(grid21, ident21):
    other = Grid(n=31)
    u = other.field(np.ones(other.n_nodes))
    with pytest.raises(ValueError):
        div_a_grad(grid21, ident21, u)


# ----- gradient ---------------------------------------------------------------


def test_gradient_of_constant_vanishes(grid21):
    gx, gy = gradient(grid21, grid21.field(np.full(grid21.n_nodes, 3.7)))
    assert np.max(np.abs(gx.values)) < 1e-13
    assert np.max(np.abs(gy.values)) < 1e-13


def test_gradient_exact_on_linears_including_boundary(grid21):
    gx, gy = gradient(grid21, grid21.field_from_callable(lambda x, y: 3 * x - 2 * y))
    assert np.allclose(gx.values, 3.0, atol=1e-12)
    assert np.allclose(gy.values, -2.0, atol=1e-12)


def test_gradient_second_order_convergence():
    errs, ns = [], (21, 41, 81)
    for n in ns:
        g = Grid(n=n)
        gx, _ = gradient(g, g.field_from_callable(lambda x, y: np.sin(np.pi * x)))
        errs.append(np.max(np.abs(gx.values - np.pi * np.cos(np.pi * g.x))))
    slope = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


# ----- normal flux ------------------------------------------------------------


def test_normal_flux_identity_on_plane(grid21, ident21):
    u = grid21.field_from_callable(lambda x, y: x + 0 * y)
    nf = normal_flux(grid21, ident21, u)
    right = grid21.normals[:, 0] == 1.0
    assert np.allclose(nf[right], 1.0, atol=1e-12)


def test_normal_flux_exact_on_quadratic(grid21, ident21):
    u = grid21.field_from_callable(lambda x, y: x**2)
    nf = normal_flux(grid21, ident21, u)
    right = grid21.normals[:, 0] == 1.0
    assert np.allclose(nf[right], 2.0, atol=1e-11)


def test_normal_flux_uses_diffusion_tensor(grid21):
    # A = diag(2, 1), u = x + y, top edge: (2, 1) . (0, 1) = 1
    a = DiffusionField(grid21, 2 * np.ones(grid21.n_nodes),
                       np.zeros(grid21.n_nodes), np.ones(grid21.n_nodes),
                       ellipticity=0.5)
    u = grid21.field_from_callable(lambda x, y: x + y)
    nf = normal_flux(grid21, a, u)
    top = grid21.normals[:, 1] == 1.0
    assert np.allclose(nf[top], 1.0, atol=1e-11)


# ----- L2 norm ----------------------------------------------------------------


def test_l2_norm_of_zero_and_constant(grid21):
    assert l2_norm(grid21, grid21.zeros()) == 0.0
    # node-sum measure of (-1,1)^2 gives 2n/(n-1) ~ 2 + O(dx)
    val = l2_norm(grid21, grid21.field(np.ones(grid21.n_nodes)))
    assert abs(val - 2.0) <= 1.5 * grid21.dx


def test_l2_norm_of_x_matches_exact_integral():
    g = Grid(n=151)
    val = l2_norm(g, g.field(g.x))
    assert val == pytest.approx(np.sqrt(4.0 / 3.0), rel=0.02)


# ----- algebraic properties ---------------------------------------------------


def test_operators_are_linear(grid21, ident21, rng):
    u = grid21.field(rng.standard_normal(grid21.n_nodes))
    v = grid21.field(rng.standard_normal(grid21.n_nodes))
    alpha, beta = 1.7, -0.3
    combo = grid21.field(alpha * u.values + beta * v.values)

    lhs = div_a_grad(grid21, ident21, combo).values
    rhs = (alpha * div_a_grad(grid21, ident21, u).values
           + beta * div_a_grad(grid21, ident21, v).values)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-8)

    lx, _ = gradient(grid21, combo)
    rx = alpha * gradient(grid21, u)[0].values + beta * gradient(grid21, v)[0].values
    assert np.allclose(lx.values, rx, rtol=1e-10, atol=1e-10)

    lb = normal_flux(grid21, ident21, combo)
    rb = (alpha * normal_flux(grid21, ident21, u)
          + beta * normal_flux(grid21, ident21, v))
    assert np.allclose(lb, rb, rtol=1e-10, atol=1e-10)
