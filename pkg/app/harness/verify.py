"""
Self-contained property checks run by `python -m app.cli verify`. Every
check builds its own seeded fixtures, so nothing on disk is needed.
"""
import itertools
import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from app.behavior.baseline import KcLayout, pll_row_of_Kc, pll_step, vsm_row_of_Kc, vsm_step
from app.behavior.design import gfm_pw_design, swing_residual
from app.behavior.params import GFMParams, PLLParams
from app.deepc.closed_form import batch_kkt_system, kkt_batch, stack_xi
from app.deepc.problem import DeePCConfig, DeePCProblem, predict_outputs
from app.hankel.blocks import partition, rank_condition, trajectory_residual
from app.hankel.trajectory import Trajectory
from app.integral.delta import IntegralChannelMask, accumulation_matrices
from app.lti.system import random_minimal_system, simulate
from app.qp.admm import ADMMSettings, QPProblem, QPStatus, solve_box_qp
from app.qp.kkt import solve_equality_kkt

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _lti_fixture(seed: int, T_ini: int = None, N: int = 6, extra: int = 20):
    rng = np.random.default_rng(seed)
    n, m, p = int(rng.integers(2, 7)), int(rng.integers(1, 3)), int(rng.integers(1, 3))
    sys = random_minimal_system(n, m, p, seed)
    T_ini = T_ini or n
    T = (m + 1) * (T_ini + N + n) - 1 + extra
    u = rng.standard_normal((T, m))
    y = simulate(sys, rng.standard_normal(n), u)
    return sys, rng, Trajectory(u, y), T_ini, N


def _fresh(sys, rng, length: int) -> Tuple[np.ndarray, np.ndarray]:
    u = rng.standard_normal((length, sys.m))
    return u, simulate(sys, rng.standard_normal(sys.n), u)


def check_fundamental_lemma(systems: int = 25, windows: int = 10) -> Tuple[bool, str]:
    worst_fresh, best_corrupt = 0.0, np.inf
    for seed in range(systems):
        sys, rng, traj, T_ini, N = _lti_fixture(seed)
        if not rank_condition(traj, T_ini, N, sys.n):
            return False, f"rank condition fails for seed {seed}"
        blocks = partition(traj, T_ini, N)
        for _ in range(windows):
            u, y = _fresh(sys, rng, T_ini + N)
            cut = slice(0, T_ini)
            args = (u[cut].ravel(), y[cut].ravel(), u[T_ini:].ravel(), y[T_ini:].ravel())
            worst_fresh = max(worst_fresh, trajectory_residual(blocks, *args))
            bump = rng.standard_normal(y[T_ini:].size)
            bump *= 0.1 / np.linalg.norm(bump)
            best_corrupt = min(best_corrupt, trajectory_residual(blocks, *args[:3], args[3] + bump))
    ok = worst_fresh < 1e-8 and best_corrupt > 1e-4
    return ok, f"max fresh residual {worst_fresh:.2e}, min corrupted residual {best_corrupt:.2e}"


def check_predictor_exactness(cases: int = 50) -> Tuple[bool, str]:
    worst = 0.0
    for seed in range(cases):
        sys, rng, traj, T_ini, N = _lti_fixture(100 + seed)
        blocks = partition(traj, T_ini, N)
        u, y = _fresh(sys, rng, T_ini + N)
        y_hat = predict_outputs(blocks, u[:T_ini].ravel(), y[:T_ini].ravel(), u[T_ini:].ravel())
        worst = max(worst, float(np.max(np.abs(y_hat - y[T_ini:].ravel()))))
    return worst < 1e-5, f"max prediction error {worst:.2e}"


def check_closed_form_equivalence(cases: int = 50) -> Tuple[bool, str]:
    worst_gap, worst_res = 0.0, 0.0
    for seed in range(cases):
        sys, rng, traj, T_ini, N = _lti_fixture(200 + seed)
        blocks = partition(traj, T_ini, N)
        cfg = DeePCConfig(T_ini=T_ini, N=N, R=0.1, Q=10.0, lambda_u=1e3, lambda_y=1e3, lambda_g=1.0)
        K, B = batch_kkt_system(blocks, cfg)
        cm = kkt_batch(blocks, cfg)
        Z = np.linalg.solve(K, B)
        residual = np.linalg.norm(K @ Z - B) / max(1.0, np.linalg.norm(K) * np.linalg.norm(Z))
        worst_res = max(worst_res, float(residual))
        problem = DeePCProblem(blocks, cfg)
        u, y = _fresh(sys, rng, T_ini)
        r = rng.standard_normal(sys.p * N)
        first = cm.first_input(stack_xi(u.ravel(), y.ravel(), r))
        sol = problem.solve(u.ravel(), y.ravel(), r)
        gap = np.max(np.abs(first - sol.u_star[: sys.m])) / max(1.0, np.max(np.abs(first)))
        worst_gap = max(worst_gap, float(gap))
    return worst_gap < 1e-6 and worst_res < 1e-8, \
        f"max K_C vs QP gap {worst_gap:.2e}, KKT residual {worst_res:.2e}"


def brute_force_box_qp(P: np.ndarray, q: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Exhaustive active-set search for min 1/2 x'Px + q'x on a box"""
    n = P.shape[0]
    best, best_x = np.inf, None
    for pattern in itertools.product((0, 1, 2), repeat=n):
        fixed = [i for i in range(n) if pattern[i]]
        A_eq = np.eye(n)[fixed]
        b_eq = np.array([lo[i] if pattern[i] == 1 else hi[i] for i in fixed])
        x = solve_equality_kkt(P, q, A_eq if fixed else None, b_eq if fixed else None)
        if np.all(x >= lo - 1e-9) and np.all(x <= hi + 1e-9):
            value = 0.5 * x @ P @ x + q @ x
            if value < best:
                best, best_x = value, x
    return best_x


def check_admm_oracle(problems: int = 100, max_size: int = 8) -> Tuple[bool, str]:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(problems):
        n = int(rng.integers(2, max_size + 1))
        M = rng.standard_normal((n, n))
        P = M @ M.T + 0.1 * np.eye(n)
        q = 3.0 * rng.standard_normal(n)
        lo, hi = -rng.uniform(0.1, 1.0, n), rng.uniform(0.1, 1.0, n)
        prob = QPProblem(P, q, np.eye(n), lo, hi)
        sol = solve_box_qp(prob, ADMMSettings(max_iter=20000))
        if sol.status is not QPStatus.SOLVED:
            return False, f"ADMM stopped with status {sol.status.value} on a size-{n} problem"
        x_ref = brute_force_box_qp(P, q, lo, hi)
        worst = max(worst, abs(prob.objective(sol.x) - prob.objective(x_ref)))
    return worst < 1e-5, f"max objective gap {worst:.2e}"


def check_gfm_cost_identity(triples: int = 20, trajectories: int = 1000) -> Tuple[bool, str]:
    rng = np.random.default_rng(11)
    worst = 0.0
    N = 10
    for _ in range(triples):
        gfm = GFMParams(J=rng.uniform(0.01, 0.1), D=rng.uniform(0.1, 1.0), Ts=rng.uniform(1e-4, 1e-3))
        for _ in range(trajectories):
            dw_prev, P_ref = rng.standard_normal(), rng.standard_normal()
            dw, P = rng.standard_normal(N), rng.standard_normal(N)
            Q, phi = gfm_pw_design(gfm, N, dw_prev)
            e = np.concatenate([dw - phi, P - P_ref])
            lhs = float(e @ Q @ e)
            rhs = swing_residual(dw, dw_prev, P, P_ref, gfm)
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return worst < 1e-10, f"max relative mismatch {worst:.2e}"


def check_structural_rows() -> Tuple[bool, str]:
    rng = np.random.default_rng(13)
    layout = KcLayout(T_ini=5, N=10, m=3, p=6)
    pll, gfm = PLLParams(), GFMParams()
    pll_row, vsm_row = pll_row_of_Kc(pll, layout), vsm_row_of_Kc(gfm, layout)
    vq = 1e-2 * rng.standard_normal(200)
    pe = rng.standard_normal(200)
    P_ref = 0.5
    dw_pll, dw_vsm = np.zeros(200), np.zeros(200)
    worst = 0.0
    for t in range(2, 200):
        dw_pll[t] = pll_step(dw_pll[t - 1], vq[t - 1], vq[t - 2], pll)
        dw_vsm[t] = vsm_step(dw_vsm[t - 1], pe[t - 1], P_ref, gfm)
        for row, dw, expected in ((pll_row, dw_pll, dw_pll[t]), (vsm_row, dw_vsm, dw_vsm[t])):
            xi = rng.standard_normal(layout.size)
            for lag in range(1, min(t, layout.T_ini) + 1):
                xi[layout.u_ini_index(lag, layout.dw_input)] = dw[t - lag]
                xi[layout.y_ini_index(lag, layout.vq_output)] = vq[t - lag]
                xi[layout.y_ini_index(lag, layout.pe_output)] = pe[t - lag]
            for step in range(layout.N):
                xi[layout.r_index(step, layout.pe_output)] = P_ref
            worst = max(worst, abs(float(row @ xi) - expected))
    return worst < 1e-12, f"max row mismatch {worst:.2e}"


def check_integral_accumulation() -> Tuple[bool, str]:
    rng = np.random.default_rng(17)
    mask = IntegralChannelMask((False, True, True))
    N = 8
    acc, offset = accumulation_matrices(mask, N)
    v = rng.standard_normal((N, mask.m))
    u_prev = rng.standard_normal(mask.m)
    u = (acc @ v.ravel() + offset @ u_prev).reshape(N, mask.m)
    expected = v.copy()
    expected[:, 1:] = u_prev[1:] + np.cumsum(v[:, 1:], axis=0)
    err = float(np.max(np.abs(u - expected)))
    return err < 1e-12, f"max reconstruction error {err:.2e}"


CHECKS: List[Tuple[str, Callable[[], Tuple[bool, str]]]] = [
    ("fundamental_lemma", check_fundamental_lemma),
    ("predictor_exactness", check_predictor_exactness),
    ("closed_form_equivalence", check_closed_form_equivalence),
    ("admm_oracle", check_admm_oracle),
    ("gfm_cost_identity", check_gfm_cost_identity),
    ("structural_rows", check_structural_rows),
    ("integral_accumulation", check_integral_accumulation),
]


def run_checks() -> List[CheckResult]:
    results = []
    for name, check in CHECKS:
        start = time.perf_counter()
        try:
            passed, detail = check()
        except Exception as e:
            logger.exception("check %s raised", name)
            passed, detail = False, f"{type(e).__name__}: {e}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - start))
        logger.info("%s: %s (%s)", name, "ok" if passed else "FAILED", detail)
    return results


def format_results(results: List[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  status  seconds  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'ok' if r.passed else 'FAIL':<6}  {r.seconds:7.3f}  {r.detail}")
    return "\n".join(lines)
