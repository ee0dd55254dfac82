import numpy as np
import pytest

from dsmflow import corpus
from dsmflow.core import (OperatorProblem, ProblemMetadata, as_vector, check_jacobian,
                          finite_difference_jacobian, jacobian_at, probe_points, residual)
from dsmflow.errors import NonFiniteInput, NonFiniteOutput

from conftest import hand_solve_2x2


def test_residual_linear_at_hand_solution(linear_spd):
    u = hand_solve_2x2([[2.0, 1.0], [1.0, 2.0]], [1.0, 1.0])
    np.testing.assert_allclose(u, [1 / 3, 1 / 3])
    np.testing.assert_allclose(residual(linear_spd, u), [0.0, 0.0], atol=1e-15)


def test_residual_exp():
    p = OperatorProblem(1, np.exp, [2.0])
    assert residual(p, [0.0])[0] == -1.0


@pytest.mark.parametrize("name", [e.name for e in corpus.list_entries()
                                  if e.problem.metadata.known_solution is not None])
def test_residual_vanishes_at_known_solution(name):
    p = corpus.get(name).problem
    assert np.linalg.norm(residual(p, p.metadata.known_solution)) <= 1e-10


def test_residual_overflow_is_an_error():
    p = OperatorProblem(1, np.exp, [0.0])
    with pytest.raises(NonFiniteOutput):
        residual(p, [1000.0])


def test_nonfinite_input_rejected(linear_spd):
    with pytest.raises(NonFiniteInput):
        residual(linear_spd, [np.nan, 0.0])
    with pytest.raises(ValueError):
        residual(linear_spd, [0.0, 0.0, 0.0])


def test_evaluation_is_deterministic(cubic_pde):
    u = probe_points(50, 1)[0]
    assert np.array_equal(cubic_pde.F(u), cubic_pde.F(u))


def test_jacobian_exp_at_zero(exp_scalar):
    np.testing.assert_array_equal(jacobian_at(exp_scalar, [0.0]), [[1.0]])


def test_jacobian_linear_is_matrix(linear_spd):
    np.testing.assert_array_equal(jacobian_at(linear_spd, [3.0, -7.0]),
                                  [[2.0, 1.0], [1.0, 2.0]])


def test_jacobian_pde_at_zero_is_discrete_laplacian(cubic_pde):
    n = 50
    h = 1.0 / (n + 1)
    expected = np.zeros((n, n))
    for i in range(n):
        expected[i, i] = 2.0 / h**2
        if i > 0:
            expected[i, i - 1] = -1.0 / h**2
        if i < n - 1:
            expected[i, i + 1] = -1.0 / h**2
    np.testing.assert_allclose(jacobian_at(cubic_pde, np.zeros(n)), expected, rtol=1e-14)


def test_finite_difference_used_without_analytic_jacobian():
    p = OperatorProblem(2, lambda u: np.array([u[0] ** 2 + u[1], np.sin(u[1])]), [0.0, 0.0])
    u = np.array([1.5, 0.3])
    J = jacobian_at(p, u)
    np.testing.assert_allclose(J, [[3.0, 1.0], [0.0, np.cos(0.3)]], rtol=1e-7, atol=1e-8)


def test_check_jacobian_linear(linear_spd):
    rep = check_jacobian(linear_spd, [0.0, 0.0], tol=1e-6)
    assert rep.passed and rep.max_discrepancy <= 1e-9
    # away from the origin rounding in A u dominates, ~eps |Au| / h
    for u in probe_points(2, 10, scale=3.0):
        assert check_jacobian(linear_spd, u, tol=1e-6).passed


def test_check_jacobian_exp_at_5(exp_scalar):
    # oracle: central difference of e^u at 5 against e^5
    h = 1e-6
    assert abs((np.exp(5 + h) - np.exp(5 - h)) / (2 * h) - np.exp(5)) / np.exp(5) < 1e-8
    assert check_jacobian(exp_scalar, [5.0], tol=1e-5).passed


def test_check_jacobian_negative_control():
    p = corpus.negative_control("wrong-jacobian")
    assert not check_jacobian(p, [1.0, 2.0], tol=1e-5).passed


def test_check_jacobian_requires_analytic():
    p = OperatorProblem(1, np.exp, [1.0])
    with pytest.raises(ValueError):
        check_jacobian(p, [0.0])


@pytest.mark.parametrize("name", [e.name for e in corpus.list_entries()
                                  if e.problem.has_analytic_jacobian])
def test_corpus_jacobians_agree_with_finite_differences(name):
    p = corpus.get(name).problem
    for u in probe_points(p.dimension, 10):
        assert check_jacobian(p, u, 1e-5).passed


@pytest.mark.parametrize("name", [e.name for e in corpus.list_entries()
                                  if e.problem.metadata.claims_monotone])
def test_monotone_claims_hold_at_probes(name):
    p = corpus.get(name).problem
    for u in probe_points(p.dimension, 10):
        J = jacobian_at(p, u)
        assert np.linalg.eigvalsh(0.5 * (J + J.T))[0] >= -1e-10


def test_minimal_norm_metadata_validated_at_construction():
    with pytest.raises(ValueError, match="does not solve"):
        OperatorProblem(1, lambda u: u, [1.0],
                        metadata=ProblemMetadata(known_minimal_norm_solution=[2.0]))


def test_problem_is_immutable(linear_spd):
    with pytest.raises(Exception):
        linear_spd.dimension = 3
    with pytest.raises(ValueError):
        linear_spd.rhs_f[0] = 5.0


def test_as_vector_scalar_promotes():
    assert as_vector(3.0).shape == (1,)


def test_fd_jacobian_step_matches_rule():
    calls = []

    def F(u):
        calls.append(u.copy())
        return u.copy()

    finite_difference_jacobian(F, np.array([0.0, 99.0]))
    step0 = calls[0][0] - 0.0
    step1 = calls[2][1] - 99.0
    eps = np.finfo(float).eps
    assert step0 == pytest.approx(np.sqrt(eps))
    assert step1 == pytest.approx(np.sqrt(eps) * 100.0, rel=1e-6)
