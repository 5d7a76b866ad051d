"""Estimator API: parameter handling, fit/predict contract, validation."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from carlemanqr import CarlemanContractionSolver, Grid, make_test, sample_cauchy_data
from carlemanqr.problems import NoiseModel


@pytest.fixture
def fitted():
    grid = Grid(n=31)
    problem = make_test(1, grid)
    f, g = sample_cauchy_data(problem, grid, NoiseModel())
    est = CarlemanContractionSolver(nonlinearity="test1", n=31)
    return est.fit(f, g), problem


def test_get_params_round_trip_and_clone():
    est = CarlemanContractionSolver(nonlinearity="test2", n=21, epsilon=1e-5)
    params = est.get_params()
    assert params["nonlinearity"] == "test2"
    assert params["n"] == 21
    assert params["epsilon"] == 1e-5
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(n=41)
    assert est.n == 41


def test_predict_before_fit_raises():
    with pytest.raises(NotFittedError):
        CarlemanContractionSolver(n=21).predict(np.zeros((3, 2)))


def test_fit_rejects_bad_boundary_data():
    est = CarlemanContractionSolver(n=21)
    nb = 4 * 21 - 4
    with pytest.raises(ValueError, match="length"):
        est.fit(np.zeros(nb - 1), np.zeros(nb))
    bad = np.zeros(nb)
    bad[0] = np.nan
    with pytest.raises(ValueError, match="finite"):
        est.fit(bad, np.zeros(nb))


def test_fit_recovers_field_and_reports_trace(fitted):
    est, problem = fitted
    assert est.converged_
    assert est.n_iter_ == len(est.trace_.l2_diff)
    exact = problem.exact_solution(est.grid_.x, est.grid_.y)
    rel = np.max(np.abs(est.solution_ - exact)) / np.max(np.abs(exact))
    assert rel < 3.0 * est.grid_.dx**2   # second-order reconstruction


def test_predict_interpolates_solution(fitted):
    est, _ = fitted
    grid = est.grid_
    pts = np.column_stack([grid.x[:50], grid.y[:50]])
    vals = est.predict(pts)
    assert np.allclose(vals, est.solution_[:50], atol=1e-12)
    mid = est.predict(np.array([[0.005, 0.005]]))
    assert np.isfinite(mid).all()
    with pytest.raises(ValueError):
        est.predict(np.zeros((3, 4)))


def test_fit_is_deterministic():
    grid = Grid(n=21)
    problem = make_test(2, grid)
    f, g = sample_cauchy_data(problem, grid, NoiseModel(delta=0.02, seed=3))
    a = CarlemanContractionSolver(nonlinearity="test2", n=21).fit(f, g)
    b = CarlemanContractionSolver(nonlinearity="test2", n=21).fit(f, g)
    assert np.array_equal(a.solution_, b.solution_)


def test_custom_nonlinearity_spec_accepted():
    from carlemanqr import NonlinearitySpec
    grid = Grid(n=21)
    problem = make_test(1, grid)
    f, g = sample_cauchy_data(problem, grid, NoiseModel())
    est = CarlemanContractionSolver(nonlinearity=problem.nonlinearity, n=21)
    est.fit(f, g)
    assert est.converged_
    with pytest.raises(TypeError):
        CarlemanContractionSolver(nonlinearity=123, n=21).fit(f, g)
