import numpy as np
import pytest

from tldet.errors import NumericError, ValidationError
from tldet.nn import grad_check


def test_quadratic_is_tight():
    x0 = np.array([1.0, -2.0, 0.5, 3.0])
    report = grad_check(lambda x: float(np.sum(x * x)), x0, 2.0 * x0, step=1e-6)
    assert report.max_rel_err <= 1e-9
    assert report.n_coords == 4


def test_detects_a_wrong_gradient():
    x0 = np.array([1.0, 2.0])
    wrong = np.array([2.0, 3.9])  # second coordinate should be 4.0
    report = grad_check(lambda x: float(np.sum(x * x)), x0, wrong, step=1e-6)
    assert report.max_rel_err > 1e-2
    assert report.coord == 1


def test_shape_mismatch():
    with pytest.raises(ValidationError):
        grad_check(lambda x: 0.0, np.zeros(3), np.zeros(4))


def test_bad_step():
    with pytest.raises(ValidationError):
        grad_check(lambda x: 0.0, np.zeros(2), np.zeros(2), step=0.0)


def test_non_finite_function_value():
    with pytest.raises(NumericError):
        grad_check(lambda x: float("nan"), np.zeros(2), np.zeros(2))


def test_json_round_trip():
    report = grad_check(lambda x: float(np.sum(x)), np.zeros(2), np.ones(2))
    payload = report.as_json_dict()
    assert set(payload) == {"max_rel_err", "coord", "analytic", "numeric", "n_coords"}
