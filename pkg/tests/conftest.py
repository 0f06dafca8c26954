import numpy as np
import pytest

from app.hankel.trajectory import Trajectory
from app.lti.system import LTISystem, random_minimal_system, simulate
from app.models.scenario import ScenarioConfig


def lti_dataset(seed: int, n: int = 3, m: int = 1, p: int = 1, T_ini: int = None, N: int = 6, extra: int = 20):
    """Seeded minimal system with a persistently exciting noise-free record"""
    sys = random_minimal_system(n, m, p, seed)
    rng = np.random.default_rng(seed)
    T_ini = T_ini or n
    T = (m + 1) * (T_ini + N + n) - 1 + extra
    u = rng.standard_normal((T, m))
    y = simulate(sys, rng.standard_normal(n), u)
    return sys, Trajectory(u, y), T_ini, N


def fresh_window(sys, rng, length: int):
    u = rng.standard_normal((length, sys.m))
    return u, simulate(sys, rng.standard_normal(sys.n), u)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def siso_plant():
    """Stable second-order SISO plant with DC gain 0.5"""
    A = np.array([[0.5, 0.1], [0.0, 0.6]])
    B = np.array([[0.0], [1.0]])
    C = np.array([[1.0, 0.0]])
    D = np.array([[0.0]])
    return LTISystem(A, B, C, D)


@pytest.fixture
def baseline_cfg():
    """Short noise-free GFL baseline run"""
    return ScenarioConfig.model_validate({
        "name": "baseline_short",
        "plant": {"noise": 0.0},
        "controller": {"kind": "baseline_gfl"},
        "excitation": {"warmup": 0.05, "settle": 0.01},
        "run": {"duration": 0.2, "record_solve_time": False},
    })


def lti_closed_loop(ctrl, plant, r, steps: int, T_ini: int, prime):
    """Run a DeePC controller against an LTI plant; returns the last output"""
    rng = np.random.default_rng(5)
    x = np.zeros(plant.n)
    u_hist, y_hist = [], []
    for _ in range(T_ini):
        u = rng.uniform(-0.1, 0.1, plant.m)
        u_hist.append(u)
        y_hist.append(plant.C @ x + plant.D @ u)
        x = plant.A @ x + plant.B @ u
    prime(np.array(u_hist[:-1]), np.array(y_hist[:-1]))
    u_prev, y_prev = u_hist[-1], y_hist[-1]
    for _ in range(steps):
        u = ctrl.step(u_prev, y_prev, r)
        y_prev = plant.C @ x + plant.D @ u
        x = plant.A @ x + plant.B @ u
        u_prev = u
    return y_prev
