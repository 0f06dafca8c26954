import numpy as np
import pytest

from app.errors import DimensionError
from app.hankel.blocks import hankel, is_persistently_exciting, partition, rank_condition, trajectory_residual
from app.hankel.trajectory import Trajectory
from tests.conftest import fresh_window, lti_dataset


def test_hankel_scalar_sequence():
    H = hankel(np.arange(5.0), 2)
    np.testing.assert_array_equal(H, [[0, 1, 2, 3], [1, 2, 3, 4]])


def test_hankel_is_sample_major():
    record = np.array([[0.0, 10.0], [1.0, 11.0], [2.0, 12.0]])
    H = hankel(record, 2)
    assert H.shape == (4, 2)
    np.testing.assert_array_equal(H[:, 0], [0, 10, 1, 11])
    np.testing.assert_array_equal(H[:, 1], [1, 11, 2, 12])


@pytest.mark.parametrize("L", [0, 6])
def test_hankel_rejects_bad_depth(L):
    with pytest.raises(DimensionError):
        hankel(np.arange(5.0), L)


def test_partition_shapes():
    _, traj, T_ini, N = lti_dataset(2, n=3, m=2, p=2)
    blocks = partition(traj, T_ini, N)
    H_c = traj.T - T_ini - N + 1
    assert blocks.U_P.shape == (2 * T_ini, H_c)
    assert blocks.Y_P.shape == (2 * T_ini, H_c)
    assert blocks.U_F.shape == (2 * N, H_c)
    assert blocks.Y_F.shape == (2 * N, H_c)
    assert blocks.stacked().shape == (4 * (T_ini + N), H_c)


def test_partition_needs_enough_samples():
    traj = Trajectory(np.zeros(5), np.zeros(5))
    with pytest.raises(DimensionError):
        partition(traj, 3, 3)


def test_persistency_of_excitation(rng):
    assert is_persistently_exciting(rng.standard_normal((60, 2)), 8)
    assert not is_persistently_exciting(np.ones((60, 1)), 2)


def test_rank_condition_holds_for_exciting_data():
    sys, traj, T_ini, N = lti_dataset(5)
    assert rank_condition(traj, T_ini, N, sys.n)


def test_fresh_trajectories_lie_in_data_span(rng):
    sys, traj, T_ini, N = lti_dataset(7, m=2, p=2)
    blocks = partition(traj, T_ini, N)
    u, y = fresh_window(sys, rng, T_ini + N)
    res = trajectory_residual(blocks, u[:T_ini], y[:T_ini], u[T_ini:], y[T_ini:])
    assert res < 1e-8
    y_bad = y.copy()
    y_bad[-1] += 1.0
    res_bad = trajectory_residual(blocks, u[:T_ini], y_bad[:T_ini], u[T_ini:], y_bad[T_ini:])
    assert res_bad > 1e-4


def test_residual_checks_lengths():
    _, traj, T_ini, N = lti_dataset(1)
    blocks = partition(traj, T_ini, N)
    with pytest.raises(DimensionError):
        trajectory_residual(blocks, np.zeros(T_ini + 1), np.zeros(T_ini), np.zeros(N), np.zeros(N))


def test_trajectory_csv_round_trip(tmp_path):
    _, traj, _, _ = lti_dataset(3, m=2, p=1)
    path = tmp_path / "data" / "trajectory.csv"
    traj.to_csv(path, dt=1e-3)
    loaded = Trajectory.from_csv(path)
    np.testing.assert_array_equal(loaded.u, traj.u)
    np.testing.assert_array_equal(loaded.y, traj.y)


def test_trajectory_rejects_mismatched_lengths():
    with pytest.raises(DimensionError):
        Trajectory(np.zeros(4), np.zeros(5))


def test_trajectory_csv_requires_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,a,b\n0,1,2\n")
    with pytest.raises(DimensionError):
        Trajectory.from_csv(path)


def test_order_one_excitation_needs_independent_samples():
    assert is_persistently_exciting(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]), 1)
    assert is_persistently_exciting(np.array([[0.0], [2.0]]), 1)
    assert not is_persistently_exciting(np.array([[1.0, 2.0], [2.0, 4.0], [-1.0, -2.0]]), 1)
    assert not is_persistently_exciting(np.zeros((5, 1)), 1)


def test_rank_condition_fails_for_zero_data():
    traj = Trajectory(np.zeros((30, 1)), np.zeros((30, 1)))
    assert not rank_condition(traj, 2, 3, 0)
    assert not rank_condition(traj, 2, 3, 2)


@pytest.mark.parametrize("n_claimed", [2, 4])
def test_rank_condition_detects_wrong_order(n_claimed):
    _, traj, T_ini, N = lti_dataset(4, n=3)
    assert rank_condition(traj, T_ini, N, 3)
    assert not rank_condition(traj, T_ini, N, n_claimed)


def test_residual_is_distance_to_data_span(rng):
    sys, traj, T_ini, N = lti_dataset(6, n=2)
    blocks = partition(traj, T_ini, N)
    u, y = fresh_window(sys, rng, T_ini + N)
    M = blocks.stacked()
    rank = sys.m * (T_ini + N) + sys.n
    assert rank < M.shape[0]
    left, _, _ = np.linalg.svd(M)
    direction = 0.1 * left[:, rank]
    split = np.cumsum([T_ini, T_ini, N])
    d_u_ini, d_y_ini, d_u, d_y = np.split(direction, split)
    residual = trajectory_residual(blocks, u[:T_ini].ravel() + d_u_ini, y[:T_ini].ravel() + d_y_ini,
                                   u[T_ini:].ravel() + d_u, y[T_ini:].ravel() + d_y)
    assert residual == pytest.approx(0.1, rel=1e-6)


def test_single_output_perturbation_leaves_data_span(rng):
    sys, traj, T_ini, N = lti_dataset(7, n=2)
    blocks = partition(traj, T_ini, N)
    u, y = fresh_window(sys, rng, T_ini + N)
    y_bad = y.copy()
    y_bad[T_ini + 1] += 0.1
    assert trajectory_residual(blocks, u[:T_ini], y_bad[:T_ini], u[T_ini:], y_bad[T_ini:]) > 1e-3
