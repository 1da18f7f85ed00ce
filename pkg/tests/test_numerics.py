import numpy as np
import pytest

from lticontracts.errors import InputError
from lticontracts.numerics import (Tolerances, as_matrix, matrix_power_norms, numerical_rank, observability_index,
                                   observability_matrix, operator_norm, spectral_radius)

from oracles import brute_force_observability_index, power_iteration_norm


def test_tolerances_validated():
    with pytest.raises(InputError):
        Tolerances(lp_tol=-1.0)
    with pytest.raises(InputError):
        Tolerances(rank_tol=float("nan"))


def test_as_matrix_shapes():
    assert as_matrix([[1, 2]], rows=1, cols=2).shape == (1, 2)
    with pytest.raises(InputError):
        as_matrix([[1, 2]], rows=2)
    with pytest.raises(InputError):
        as_matrix([[np.inf]])


@pytest.mark.parametrize("seed", range(10))
def test_operator_norm_matches_power_iteration(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((4, 3))
    assert operator_norm(M) == pytest.approx(power_iteration_norm(M), rel=1e-8)


def test_spectral_radius_known():
    A = np.array([[0.5, 1.0], [0.0, -0.9]])
    assert spectral_radius(A) == pytest.approx(0.9)
    assert spectral_radius(np.zeros((0, 0))) == 0.0


def test_numerical_rank():
    M = np.outer([1, 2, 3], [1, 1])
    assert numerical_rank(M) == 1
    assert numerical_rank(np.zeros((3, 3))) == 0


def test_observability_matrix_layout():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    C = np.array([[1.0, 0.0]])
    O = observability_matrix(A, C, 1)
    np.testing.assert_array_equal(O, [[1, 0], [0, 1]])


def test_observability_index_examples():
    # chain of integrators read at the first state: full depth needed
    A = np.eye(3, k=1)
    C = np.array([[1.0, 0.0, 0.0]])
    assert observability_index(A, C) == 3
    # full-state output saturates immediately
    assert observability_index(np.eye(3) * 0.5, np.eye(3)) == 1


@pytest.mark.parametrize("seed", range(20))
def test_observability_index_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    A = rng.standard_normal((n, n))
    C = rng.standard_normal((int(rng.integers(1, 3)), n))
    if seed % 3 == 0:
        A[:, 0] = 0.0  # introduce an unobservable direction sometimes
        C[:, 0] = 0.0
    assert observability_index(A, C) == brute_force_observability_index(A, C)


def test_matrix_power_norms():
    A = np.array([[0.5, 0.0], [0.0, 0.25]])
    norms = matrix_power_norms(A, 4)
    np.testing.assert_allclose(norms, [1.0, 0.5, 0.25, 0.125, 0.0625])
