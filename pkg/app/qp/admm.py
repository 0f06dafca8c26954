"""
Operator-splitting (ADMM) solver for box-constrained quadratic programs

    minimize    1/2 x'Px + q'x
    subject to  lo <= A x <= hi

Dense re-implementation of the OSQP iteration: Ruiz equilibration, a
per-row step size vector, a cached Cholesky factor of P + sigma I + A' rho A,
over-relaxation, a primal infeasibility certificate and solution polishing.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla

from app.errors import DimensionError, RankDeficiencyError
from app.qp.kkt import solve_equality_kkt

logger = logging.getLogger(__name__)

QP_INFTY = 1e20

# Ruiz equilibration limits
MIN_SCALING = 1e-4
MAX_SCALING = 1e4

# Step-size vector
RHO_MIN = 1e-6
RHO_EQ_FACTOR = 1e3
RHO_TOL = 1e-4


class QPStatus(str, Enum):
    SOLVED = "solved"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class QPProblem:
    P: np.ndarray
    q: np.ndarray
    A: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        n = P.shape[0]
        if P.shape != (n, n):
            raise DimensionError(f"P must be square, got {P.shape}")
        scale = max(1.0, float(np.max(np.abs(P))) if P.size else 1.0)
        if not np.allclose(P, P.T, rtol=0.0, atol=1e-12 * scale):
            raise ValueError("P must be symmetric")
        q = np.asarray(self.q, dtype=float).ravel()
        if q.shape[0] != n:
            raise DimensionError(f"q has length {q.shape[0]}, expected {n}")
        A = np.asarray(self.A, dtype=float).reshape(-1, n)
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        if lo.shape[0] != A.shape[0] or hi.shape[0] != A.shape[0]:
            raise DimensionError("lo and hi must have one entry per row of A")
        if np.any(lo > hi):
            raise ValueError("lower bounds must not exceed upper bounds")
        for name, value in (("P", P), ("q", q), ("A", A), ("lo", lo), ("hi", hi)):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def k(self) -> int:
        return self.A.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.P @ x + self.q @ x)

    @classmethod
    def unconstrained(cls, P, q) -> "QPProblem":
        n = np.atleast_2d(P).shape[0]
        return cls(P, q, np.zeros((0, n)), np.zeros(0), np.zeros(0))


@dataclass
class QPSolution:
    x: np.ndarray
    y: np.ndarray
    status: QPStatus
    primal_res: float
    dual_res: float
    iterations: int
    objective: float = float("nan")
    polished: bool = False


@dataclass(frozen=True)
class ADMMSettings:
    rho: float = 0.1
    sigma: float = 1e-6
    alpha: float = 1.6
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    max_iter: int = 4000
    eps_prim_inf: float = 1e-4
    scaling_iter: int = 10
    polish: bool = True

    def __post_init__(self):
        if self.rho <= 0 or self.sigma <= 0:
            raise ValueError("rho and sigma must be positive")
        if not 0 < self.alpha < 2:
            raise ValueError("alpha must lie in (0, 2)")
        if self.eps_abs < 0 or self.eps_rel < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


def _inf_norm(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def _limit_norms(norms: np.ndarray) -> np.ndarray:
    norms = norms.copy()
    norms[norms < MIN_SCALING] = 1.0
    return np.minimum(norms, MAX_SCALING)


def ruiz_equilibrate(P: np.ndarray, A: np.ndarray, iterations: int) -> Tuple[np.ndarray, np.ndarray, float]:
    """Diagonal scalings D, E and cost scale c equilibrating [[P, A'], [A, 0]]"""
    n, k = P.shape[0], A.shape[0]
    D = np.ones(n)
    E = np.ones(k)
    Ps, As = P.copy(), A.copy()
    for _ in range(iterations):
        col = np.abs(Ps).max(axis=0) if n else np.zeros(0)
        if k:
            col = np.maximum(col, np.abs(As).max(axis=0))
            e = 1.0 / np.sqrt(_limit_norms(np.abs(As).max(axis=1)))
        else:
            e = np.ones(0)
        d = 1.0 / np.sqrt(_limit_norms(col))
        Ps = d[:, None] * Ps * d[None, :]
        As = e[:, None] * As * d[None, :]
        D *= d
        E *= e
    mean_col = float(np.mean(np.abs(Ps).max(axis=0))) if n else 1.0
    c = 1.0 / float(_limit_norms(np.array([mean_col]))[0])
    return D, E, c


class ADMMSolver:
    """
    Stateful solver for one problem structure.

    The factorization is computed in setup() and reused by every solve();
    update() changes q and the bounds only. Each solve starts from the
    previous iterate unless cold_start() or warm_start() says otherwise.
    """

    def __init__(self, problem: QPProblem, settings: Optional[ADMMSettings] = None):
        self.settings = settings or ADMMSettings()
        self.setup(problem)

    def setup(self, problem: QPProblem):
        self.problem = problem
        s = self.settings
        self._D, self._E, self._c = ruiz_equilibrate(problem.P, problem.A, s.scaling_iter)
        D, E, c = self._D, self._E, self._c
        self._P = c * (D[:, None] * problem.P * D[None, :])
        self._P = 0.5 * (self._P + self._P.T)
        self._A = E[:, None] * problem.A * D[None, :]
        self._set_vectors(problem.q, problem.lo, problem.hi)
        self._rho = self._rho_vector()
        self._factor()
        self.cold_start()

    def _set_vectors(self, q, lo, hi):
        self._q = self._c * self._D * q
        self._lo = self._E * np.maximum(lo, -QP_INFTY)
        self._hi = self._E * np.minimum(hi, QP_INFTY)

    def _rho_vector(self) -> np.ndarray:
        rho = np.full(self.problem.k, self.settings.rho)
        free = (self._lo <= -QP_INFTY * 1e-6) & (self._hi >= QP_INFTY * 1e-6)
        equal = (self._hi - self._lo) < RHO_TOL
        rho[free] = RHO_MIN
        rho[equal] = RHO_EQ_FACTOR * self.settings.rho
        return rho

    def _factor(self):
        n = self.problem.n
        K = self._P + self.settings.sigma * np.eye(n) + self._A.T @ (self._rho[:, None] * self._A)
        self._chol = sla.cho_factor(K)
        logger.debug("factored ADMM system of size %d with %d constraint rows", n, self.problem.k)

    def update(self, q=None, lo=None, hi=None):
        """Replace q and/or the bounds; refactors only if the step-size pattern moves"""
        prob = self.problem
        q = prob.q if q is None else np.asarray(q, dtype=float).ravel()
        lo = prob.lo if lo is None else np.asarray(lo, dtype=float).ravel()
        hi = prob.hi if hi is None else np.asarray(hi, dtype=float).ravel()
        self.problem = QPProblem(prob.P, q, prob.A, lo, hi)
        self._set_vectors(self.problem.q, self.problem.lo, self.problem.hi)
        rho = self._rho_vector()
        if not np.array_equal(rho, self._rho):
            self._rho = rho
            self._factor()

    def cold_start(self):
        self._x = np.zeros(self.problem.n)
        self._z = np.zeros(self.problem.k)
        self._y = np.zeros(self.problem.k)

    def warm_start(self, sol: QPSolution):
        """Initialize the next solve at the primal/dual pair of a previous solution"""
        x = np.asarray(sol.x, dtype=float).ravel()
        y = np.asarray(sol.y, dtype=float).ravel()
        if x.shape[0] != self.problem.n or y.shape[0] != self.problem.k:
            raise DimensionError(
                f"warm start of size ({x.shape[0]}, {y.shape[0]}) does not match "
                f"problem of size ({self.problem.n}, {self.problem.k})"
            )
        self._x = x / self._D
        self._y = self._c * y / self._E if y.size else y
        self._z = np.clip(self._A @ self._x, self._lo, self._hi)

    def _residuals(self, x, z, y) -> Tuple[float, float, float, float]:
        s = self.settings
        D_inv, E_inv, c_inv = 1.0 / self._D, 1.0 / self._E, 1.0 / self._c
        Ax = self._A @ x
        Px = self._P @ x
        Aty = self._A.T @ y
        pri = _inf_norm(E_inv * (Ax - z))
        dua = c_inv * _inf_norm(D_inv * (Px + self._q + Aty))
        eps_pri = s.eps_abs + s.eps_rel * max(_inf_norm(E_inv * Ax), _inf_norm(E_inv * z))
        eps_dua = s.eps_abs + s.eps_rel * c_inv * max(
            _inf_norm(D_inv * Px), _inf_norm(D_inv * Aty), _inf_norm(D_inv * self._q)
        )
        return pri, dua, eps_pri, eps_dua

    def _primal_infeasible(self, dy: np.ndarray) -> bool:
        eps = self.settings.eps_prim_inf
        # certificate in unscaled space
        dy = self._E * dy / self._c
        norm = _inf_norm(dy)
        if norm <= eps:
            return False
        dy = dy / norm
        lo = np.maximum(self.problem.lo, -QP_INFTY)
        hi = np.minimum(self.problem.hi, QP_INFTY)
        support = hi @ np.maximum(dy, 0.0) + lo @ np.minimum(dy, 0.0)
        if support >= -eps:
            return False
        return _inf_norm(self.problem.A.T @ dy) < eps

    def solve(self) -> QPSolution:
        s = self.settings
        n, k = self.problem.n, self.problem.k
        x, z, y = self._x, self._z, self._y
        rho, sigma, alpha = self._rho, s.sigma, s.alpha
        status = QPStatus.MAX_ITER
        best = None
        pri = dua = float("inf")
        iterations = 0
        for iterations in range(1, s.max_iter + 1):
            rhs = sigma * x - self._q + self._A.T @ (rho * z - y)
            x_tilde = sla.cho_solve(self._chol, rhs)
            z_tilde = self._A @ x_tilde
            x_new = alpha * x_tilde + (1.0 - alpha) * x
            z_relax = alpha * z_tilde + (1.0 - alpha) * z
            z_new = np.clip(z_relax + y / rho, self._lo, self._hi) if k else z
            y_new = y + rho * (z_relax - z_new) if k else y
            dy = y_new - y
            x, z, y = x_new, z_new, y_new

            pri, dua, eps_pri, eps_dua = self._residuals(x, z, y)
            if pri <= eps_pri and dua <= eps_dua:
                status = QPStatus.SOLVED
                break
            if k and self._primal_infeasible(dy):
                status = QPStatus.INFEASIBLE
                break
            score = max(pri / max(eps_pri, 1e-300), dua / max(eps_dua, 1e-300))
            if best is None or score < best[0]:
                best = (score, x.copy(), z.copy(), y.copy(), pri, dua)

        if status is QPStatus.MAX_ITER and best is not None:
            _, x, z, y, pri, dua = best
            logger.warning("ADMM hit max_iter=%d (primal %.2e, dual %.2e)", s.max_iter, pri, dua)
        self._x, self._z, self._y = x, z, y

        x_out = self._D * x
        y_out = self._E * y / self._c if k else np.zeros(0)
        sol = QPSolution(
            x=x_out, y=y_out, status=status, primal_res=pri, dual_res=dua,
            iterations=iterations, objective=self.problem.objective(x_out),
        )
        if status is QPStatus.INFEASIBLE:
            sol.objective = float("inf")
        elif status is QPStatus.SOLVED and s.polish:
            self._polish(sol)
        return sol

    def _polish(self, sol: QPSolution):
        """Guess the active set from the duals and re-solve it exactly"""
        prob = self.problem
        s = self.settings
        if prob.k == 0:
            active = np.zeros(0, dtype=bool)
            lower = upper = active
            b = np.zeros(0)
        else:
            Ax = prob.A @ sol.x
            equal = prob.hi - prob.lo <= 1e-12 * np.maximum(1.0, np.abs(prob.lo))
            lower = ((Ax - prob.lo) < -sol.y) | equal
            upper = ((prob.hi - Ax) < sol.y) & ~lower
            active = lower | upper
            b = np.where(lower, prob.lo, prob.hi)[active]
        try:
            x, lam = solve_equality_kkt(prob.P, prob.q, prob.A[active], b, return_multipliers=True)
        except RankDeficiencyError:
            logger.debug("polish skipped: reduced KKT system is singular")
            return

        Ax = prob.A @ x
        tol_lo = s.eps_abs + s.eps_rel * np.abs(prob.lo)
        tol_hi = s.eps_abs + s.eps_rel * np.abs(prob.hi)
        if np.any(Ax < prob.lo - tol_lo) or np.any(Ax > prob.hi + tol_hi):
            return
        y = np.zeros(prob.k)
        y[active] = lam
        sign_tol = s.eps_abs * max(1.0, _inf_norm(lam))
        strict_lower = lower & ~(prob.hi - prob.lo <= 1e-12 * np.maximum(1.0, np.abs(prob.lo)))
        if np.any(y[strict_lower] > sign_tol) or np.any(y[upper] < -sign_tol):
            return

        dua = _inf_norm(prob.P @ x + prob.q + prob.A.T @ y)
        pri = _inf_norm(np.maximum(prob.lo - Ax, 0.0) + np.maximum(Ax - prob.hi, 0.0))
        sol.x, sol.y = x, y
        sol.primal_res, sol.dual_res = pri, dua
        sol.objective = prob.objective(x)
        sol.polished = True
        # next solve starts from the polished pair
        self.warm_start(sol)


def solve_box_qp(
    prob: QPProblem,
    settings: Optional[ADMMSettings] = None,
    warm: Optional[QPSolution] = None,
) -> QPSolution:
    solver = ADMMSolver(prob, settings)
    if warm is not None:
        solver.warm_start(warm)
    return solver.solve()
