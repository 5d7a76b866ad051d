"""Cutoff profile and nonlinearity evaluation contract."""

import numpy as np
import pytest

from carlemanqr import Grid, NonlinearityEvalError, NonlinearitySpec, ZERO, chi_m, eval_f
from carlemanqr.nonlinearity import field_source


def test_chi_plateaus_and_midpoint():
    m = 1.5
    assert chi_m(0.0, (0.0, 0.0), m) == 1.0
    assert chi_m(m, (0.0, 0.0), m) == 1.0           # inner plateau boundary
    assert chi_m(2 * m, (0.0, 0.0), m) == 0.0       # outer plateau boundary
    assert chi_m(3 * m, (0.0, 0.0), m) == 0.0
    # symmetry of the blend puts the half-way point at q = 1.5 m
    assert chi_m(1.5 * m, (0.0, 0.0), m) == pytest.approx(0.5, abs=1e-14)


def test_chi_uses_full_argument_norm():
    # q = sqrt(s^2 + |p|^2)
    assert chi_m(3.0, (4.0, 0.0), 5.0) == 1.0       # q = 5 = m
    assert chi_m(6.0, (8.0, 0.0), 5.0) == 0.0       # q = 10 = 2m


def test_chi_monotone_nonincreasing_and_bounded():
    m = 2.0
    q = np.linspace(0.0, 5 * m, 2001)
    vals = chi_m(q, np.zeros((q.size, 2)), m)
    assert np.all(vals >= 0.0) and np.all(vals <= 1.0)
    assert np.all(np.diff(vals) <= 1e-12)


def test_chi_rejects_nonpositive_bound():
    with pytest.raises(ValueError):
        chi_m(1.0, (0.0, 0.0), 0.0)


def test_eval_f_zero_spec():
    assert eval_f(ZERO, np.array([0.3, -0.2]), 5.0, np.array([1.0, 2.0])) == 0.0


def test_eval_f_cutoff_agrees_inside_and_kills_outside():
    raw = NonlinearitySpec(f_eval=lambda x, s, p: s + p[..., 0], vectorized=True)
    cut = NonlinearitySpec(f_eval=raw.f_eval, cutoff_bound=2.0, vectorized=True)
    x = np.array([0.0, 0.0])
    # q = sqrt(1 + 1) < M: untouched
    assert eval_f(cut, x, 1.0, np.array([1.0, 0.0])) == eval_f(raw, x, 1.0, np.array([1.0, 0.0]))
    # q >= 2M: support of the cutoff ends
    assert eval_f(cut, x, 5.0, np.array([0.0, 0.0])) == 0.0


def test_cutoff_keeps_difference_quotients_bounded(rng):
    # empirical Lipschitz check for a smooth truncated nonlinearity
    spec = NonlinearitySpec(f_eval=lambda x, s, p: s**2 + p[..., 1] ** 2,
                            cutoff_bound=3.0, vectorized=True)
    x = np.zeros(2)
    s = rng.uniform(-10, 10, 400)
    slopes = []
    for s1, s2 in zip(s[::2], s[1::2]):
        if abs(s1 - s2) < 1e-9:
            continue
        f1 = eval_f(spec, x, s1, np.array([0.5, 0.5]))
        f2 = eval_f(spec, x, s2, np.array([0.5, 0.5]))
        slopes.append(abs(f1 - f2) / abs(s1 - s2))
    assert max(slopes) < 50.0


def test_scalar_and_vectorized_paths_agree():
    fn = lambda x, s, p: np.sin(s) + x[..., 0] * p[..., 1]
    vec = NonlinearitySpec(f_eval=fn, vectorized=True)
    sca = NonlinearitySpec(f_eval=lambda x, s, p: np.sin(s) + x[0] * p[1])
    xs = np.array([[0.1, 0.2], [0.3, -0.4], [-0.5, 0.6]])
    ss = np.array([0.7, -1.1, 2.2])
    ps = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
    assert np.allclose(eval_f(vec, xs, ss, ps), eval_f(sca, xs, ss, ps), atol=1e-15)


def test_non_finite_value_reports_location():
    spec = NonlinearitySpec(f_eval=lambda x, s, p: 1.0 / s)
    with np.errstate(divide="ignore"):
        with pytest.raises(NonlinearityEvalError, match="x="):
            eval_f(spec, np.array([[0.25, -0.75]]), np.array([0.0]),
                   np.array([[0.0, 0.0]]))


def test_field_source_uses_grid_gradient():
    g = Grid(n=11)
    spec = NonlinearitySpec(f_eval=lambda x, s, p: p[..., 0], vectorized=True)
    u = g.field_from_callable(lambda x, y: 3.0 * x)
    src = field_source(spec, g, u)
    assert np.allclose(src.values, 3.0, atol=1e-12)
