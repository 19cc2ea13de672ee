import numpy as np
import pytest

from superburst.integrate import (ConvergenceError, IntegrationError, propagate_linear,
                                  rk4_integrate, rk4_step_matrix, validate_grid)


def test_step_matrix_is_taylor_polynomial():
    A = np.array([[-1.0, 2.0], [0.0, -3.0]])
    h = 0.1
    taylor = np.eye(2) + h * A + (h * A) @ (h * A) / 2 \
        + np.linalg.matrix_power(h * A, 3) / 6 + np.linalg.matrix_power(h * A, 4) / 24
    assert np.allclose(rk4_step_matrix(A, h), taylor)


def test_linear_matches_explicit_stepping():
    A = np.array([[-2.0, 1.0], [0.5, -1.0]])
    t = np.linspace(0, 1, 6)
    lin = propagate_linear(A, np.array([1.0, 0.0]), t, 0.01)
    gen = rk4_integrate(lambda s, y: A @ y, np.array([1.0, 0.0]), t, 0.01)
    assert np.allclose(lin, gen, atol=1e-13)


def test_scalar_decay():
    t = np.linspace(0, 5, 11)
    y = propagate_linear(np.array([[-1.0]]), np.array([1.0]), t, 1e-3)[:, 0]
    assert np.allclose(y, np.exp(-t), rtol=1e-12)


def test_time_dependent_rhs():
    t = np.linspace(0, 3, 7)
    y = rk4_integrate(lambda s, y: np.array([np.cos(s)]), np.array([0.0]), t, 1e-3)
    assert np.allclose(y[:, 0], np.sin(t), atol=1e-12)


def test_unstable_step_raises_with_time():
    with pytest.raises(IntegrationError) as info:
        propagate_linear(np.array([[-100.0]]), np.array([1.0]), np.linspace(0, 100, 101), 1.0)
    assert 0 < info.value.time <= 100


def test_convergence_check_flags_coarse_step():
    with pytest.raises(ConvergenceError):
        propagate_linear(np.array([[-10.0]]), np.array([1.0]), [0.0, 0.5], 0.2,
                         check_convergence=True, conv_tol=1e-9)
    propagate_linear(np.array([[-10.0]]), np.array([1.0]), [0.0, 0.5], 1e-4,
                     check_convergence=True, conv_tol=1e-9)


@pytest.mark.parametrize("grid", [[], [0.0, 0.0], [1.0, 0.5], [[0.0, 1.0]]])
def test_grid_validation(grid):
    with pytest.raises(ValueError):
        validate_grid(grid)


def test_convergence_check_when_max_step_exceeds_grid_spacing():
    # the output spacing, not max_step, sets the step here; halving must still bite
    A = np.array([[-12.0]])
    t = np.linspace(0, 4, 6)
    with pytest.raises(ConvergenceError):
        propagate_linear(A, np.array([1.0]), t, 5.0, check_convergence=True)
    with pytest.raises(ConvergenceError):
        rk4_integrate(lambda s, y: A @ y, np.array([1.0]), t, 5.0, check_convergence=True)
