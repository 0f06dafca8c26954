import logging
import warnings
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg as sla

from app.errors import DimensionError, RankDeficiencyError
from app.lti.system import numerical_rank

logger = logging.getLogger(__name__)


def _as_square(P) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[0] != P.shape[1]:
        raise DimensionError(f"P must be square, got {P.shape}")
    return P


def solve_equality_kkt(
    P,
    q,
    A_eq=None,
    b_eq=None,
    return_multipliers: bool = False,
) -> Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """
    Minimize 1/2 x'Px + q'x subject to A_eq x = b_eq by one direct solve of

        [P  A'] [x  ]   [-q]
        [A  0 ] [lam] = [ b]

    The multipliers follow the sign convention P x + q + A' lam = 0.
    """
    P = _as_square(P)
    n = P.shape[0]
    q = np.asarray(q, dtype=float).ravel()
    if q.shape[0] != n:
        raise DimensionError(f"q has length {q.shape[0]}, expected {n}")
    if A_eq is None:
        A_eq = np.zeros((0, n))
    A_eq = np.asarray(A_eq, dtype=float).reshape(-1, n)
    k = A_eq.shape[0]
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    if b_eq.shape[0] != k:
        raise DimensionError(f"b_eq has length {b_eq.shape[0]}, expected {k}")

    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = P
    kkt[:n, n:] = A_eq.T
    kkt[n:, :n] = A_eq
    rhs = np.concatenate([-q, b_eq])

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            sol = sla.solve(kkt, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, sla.LinAlgWarning) as e:
        raise _deficiency(P, A_eq) from e

    x, lam = sol[:n], sol[n:]
    if return_multipliers:
        return x, lam
    return x


def _deficiency(P: np.ndarray, A_eq: np.ndarray) -> RankDeficiencyError:
    k = A_eq.shape[0]
    if k and numerical_rank(A_eq) < k:
        return RankDeficiencyError("equality constraint rows are linearly dependent", block="A_eq")
    return RankDeficiencyError("P is not positive definite on the null space of A_eq", block="P")


def kkt_residuals(P, q, A_eq, b_eq, x, lam: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """(stationarity, feasibility) infinity norms for a candidate pair"""
    P = _as_square(P)
    A_eq = np.asarray(A_eq, dtype=float).reshape(-1, P.shape[0])
    grad = P @ x + np.asarray(q, dtype=float).ravel()
    if lam is not None and A_eq.shape[0]:
        grad = grad + A_eq.T @ lam
    feas = A_eq @ x - np.asarray(b_eq, dtype=float).ravel() if A_eq.shape[0] else np.zeros(0)
    stat = float(np.max(np.abs(grad))) if grad.size else 0.0
    return stat, float(np.max(np.abs(feas))) if feas.size else 0.0
