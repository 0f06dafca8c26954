import numpy as np
import pytest

from app.errors import DimensionError, UnobservableSystemError
from app.lti.system import LTISystem, lag, lti_step, numerical_rank, random_minimal_system, simulate


def test_numerical_rank_counts_significant_singular_values():
    assert numerical_rank(np.eye(4)) == 4
    assert numerical_rank(np.zeros((3, 3))) == 0
    assert numerical_rank(np.outer([1.0, 2.0, 3.0], [1.0, -1.0])) == 1


def test_system_rejects_inconsistent_dimensions():
    with pytest.raises(DimensionError):
        LTISystem(np.eye(2), np.ones((3, 1)), np.ones((1, 2)), np.zeros((1, 1)))
    with pytest.raises(DimensionError):
        LTISystem(np.eye(2), np.ones((2, 1)), np.ones((1, 2)), np.zeros((2, 1)))


def test_simulate_matches_manual_recursion(siso_plant):
    u = np.array([1.0, 0.0, -1.0, 2.0])
    y = simulate(siso_plant, [0.0, 0.0], u)
    x = np.zeros(2)
    expected = []
    for u_t in u:
        x, y_t = lti_step(siso_plant, x, [u_t])
        expected.append(y_t)
    np.testing.assert_allclose(y, np.array(expected))
    assert y.shape == (4, 1)


def test_simulate_rejects_wrong_channel_count(siso_plant):
    with pytest.raises(DimensionError):
        simulate(siso_plant, [0.0, 0.0], np.ones((3, 2)))


def test_lag_of_full_output_and_chain_systems():
    full = LTISystem(0.5 * np.eye(3), np.ones((3, 1)), np.eye(3), np.zeros((3, 1)))
    assert lag(full) == 1
    chain = LTISystem(np.eye(3, k=1), np.array([[0.0], [0.0], [1.0]]),
                      np.array([[1.0, 0.0, 0.0]]), np.zeros((1, 1)))
    assert lag(chain) == 3


def test_lag_rejects_unobservable_system():
    sys = LTISystem(np.diag([0.5, 0.3]), np.ones((2, 1)), np.array([[1.0, 0.0]]), np.zeros((1, 1)))
    with pytest.raises(UnobservableSystemError):
        lag(sys)


def test_random_minimal_system_is_seeded_stable_and_minimal():
    a = random_minimal_system(4, 2, 2, seed=3)
    b = random_minimal_system(4, 2, 2, seed=3)
    np.testing.assert_array_equal(a.A, b.A)
    assert np.max(np.abs(np.linalg.eigvals(a.A))) < 0.95
    assert numerical_rank(a.controllability_matrix()) == 4
    assert numerical_rank(a.observability_matrix()) == 4
    assert (a.n, a.m, a.p) == (4, 2, 2)


def test_scalar_hand_example():
    sys = LTISystem([[0.5]], [[1.0]], [[1.0]], [[0.0]])
    np.testing.assert_allclose(simulate(sys, [0.0], [1.0, 0.0, 0.0]).ravel(), [0.0, 1.0, 0.5])


@pytest.mark.parametrize("seed", range(5))
def test_simulate_is_linear_in_state_and_input(seed):
    sys = random_minimal_system(4, 2, 2, seed)
    rng = np.random.default_rng(seed)
    x1, x2 = rng.standard_normal(4), rng.standard_normal(4)
    u1, u2 = rng.standard_normal((30, 2)), rng.standard_normal((30, 2))
    a, b = 1.7, -0.4
    combined = simulate(sys, a * x1 + b * x2, a * u1 + b * u2)
    separate = a * simulate(sys, x1, u1) + b * simulate(sys, x2, u2)
    np.testing.assert_allclose(combined, separate, atol=1e-10)


def test_outputs_do_not_depend_on_later_inputs(rng):
    sys = random_minimal_system(3, 1, 2, seed=11)
    x0 = rng.standard_normal(3)
    u = rng.standard_normal((20, 1))
    changed = u.copy()
    changed[12:] = rng.standard_normal((8, 1))
    np.testing.assert_array_equal(simulate(sys, x0, u)[:12], simulate(sys, x0, changed)[:12])
    np.testing.assert_array_equal(simulate(sys, x0, u)[:19], simulate(sys, x0, u[:19]))


@pytest.mark.parametrize("n, m, p", [(2, 1, 1), (4, 1, 1), (5, 2, 2), (6, 1, 3)])
def test_lag_never_exceeds_order(n, m, p):
    for seed in range(10):
        sys = random_minimal_system(n, m, p, seed)
        ell = lag(sys)
        assert 1 <= ell <= n
        assert numerical_rank(sys.observability_matrix(ell)) == n
        if ell > 1:
            assert numerical_rank(sys.observability_matrix(ell - 1)) < n


def test_lag_of_two_state_shift():
    sys = LTISystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [[1.0, 0.0]], [[0.0]])
    assert lag(sys) == 2


def test_random_systems_are_stable_over_many_seeds():
    radii = [np.max(np.abs(np.linalg.eigvals(random_minimal_system(3, 1, 1, s).A))) for s in range(100)]
    assert max(radii) < 0.95
