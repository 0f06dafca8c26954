"""
Cost-function behavior design for the DeePC converter.

The predicted trajectories are weighted by three structured terms

    alpha1 || [dw; P]  - [phi_N; P_ref 1] ||^2_{Q_Pomega}
  + alpha2 || [Vd; Q]  - [Vd_ref 1; Q_ref 1] ||^2_{Q_QV}
  + alpha3 || Vq - Vq_ref 1 ||^2

written channel-major (all N samples of one signal, then the next), so
every coupling is a 2x2 kernel Kronecker I_N. The DeePC side works
sample-major; the permutation helpers below convert between the two.
"""
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from app.behavior.params import GFMParams
from app.errors import DimensionError
from app.plant.converter import INPUT_CHANNELS, OUTPUT_CHANNELS

BEHAVIOR_PRESETS = ("gfl", "gfm", "pq", "pv", "qv_droop")

ALPHA_LARGE = 1e3
ALPHA_SMALL = 1.0
K_QV_DEFAULT = 0.05


@dataclass(frozen=True)
class BehaviorRefs:
    Vd_ref: float = 1.0
    Vq_ref: float = 0.0
    Q_ref: float = 0.0
    P_ref: float = 0.0


@dataclass(frozen=True)
class BehaviorDesign:
    alpha1: float
    alpha2: float
    alpha3: float
    Q_Pomega: np.ndarray
    Q_QV: np.ndarray
    phi_gain: np.ndarray
    refs: BehaviorRefs = field(default_factory=BehaviorRefs)
    name: str = "custom"

    def __post_init__(self):
        if min(self.alpha1, self.alpha2, self.alpha3) < 0:
            raise ValueError("behavior weights must be nonnegative")
        N = self.phi_gain.shape[0]
        for label in ("Q_Pomega", "Q_QV"):
            M = getattr(self, label)
            if M.shape != (2 * N, 2 * N):
                raise DimensionError(f"{label} must be {2 * N}x{2 * N}, got {M.shape}")
            if not np.allclose(M, M.T, atol=1e-12 * max(1.0, np.max(np.abs(M)))):
                raise ValueError(f"{label} must be symmetric")

    @property
    def N(self) -> int:
        return self.phi_gain.shape[0]

    def phi(self, dw_prev: float) -> np.ndarray:
        return self.phi_gain * dw_prev

    def with_refs(self, **changes) -> "BehaviorDesign":
        return replace(self, refs=replace(self.refs, **changes))


def qv_matrix(alphaV: float, alphaQ: float, beta: float, N: int) -> np.ndarray:
    if alphaV < 0 or alphaQ < 0 or alphaV * alphaQ < beta ** 2 - 1e-15:
        raise ValueError(f"kernel [[{alphaV}, {beta}], [{beta}, {alphaQ}]] is not PSD")
    return np.kron(np.array([[alphaV, beta], [beta, alphaQ]]), np.eye(N))


def gfl_pw_matrix(N: int) -> np.ndarray:
    if N < 1:
        raise ValueError("N must be positive")
    return np.kron(np.array([[0.0, 0.0], [0.0, 1.0]]), np.eye(N))


def swing_operator(gfm: GFMParams, N: int) -> np.ndarray:
    """M = D I_N + (J/Ts) backward difference"""
    diff = np.eye(N) - np.eye(N, k=-1)
    return gfm.D * np.eye(N) + gfm.inertia_gain * diff


def gfm_pw_design(gfm: GFMParams, N: int, delta_omega_prev: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """(Q_Pomega, phi_N) emulating the discrete swing equation over the horizon"""
    M = swing_operator(gfm, N)
    Q = np.block([[M.T @ M, M.T], [M, np.eye(N)]])
    return Q, gfm_phi_gain(gfm, N) * delta_omega_prev


def gfm_phi_gain(gfm: GFMParams, N: int) -> np.ndarray:
    e0 = np.zeros(N)
    e0[0] = 1.0
    return gfm.inertia_gain * np.linalg.solve(swing_operator(gfm, N), e0)


def swing_residual(dw_traj, dw_prev: float, P_traj, P_ref: float, gfm: GFMParams) -> float:
    dw = np.asarray(dw_traj, dtype=float).ravel()
    P = np.asarray(P_traj, dtype=float).ravel()
    if dw.shape != P.shape:
        raise DimensionError("dw and P trajectories must have the same length")
    shifted = np.concatenate([[dw_prev], dw[:-1]])
    res = gfm.inertia_gain * (dw - shifted) + gfm.D * dw - P_ref + P
    return float(res @ res)


def channel_major_permutation(width: int, N: int) -> np.ndarray:
    """perm with x_channel_major = x_sample_major[perm]"""
    return np.array([i * width + c for c in range(width) for i in range(N)])


def to_sample_major(x_cm: np.ndarray, perm: np.ndarray, perm_cols: Optional[np.ndarray] = None) -> np.ndarray:
    """Reorder a channel-major vector or matrix to sample-major"""
    x_cm = np.asarray(x_cm, dtype=float)
    if x_cm.ndim == 1:
        out = np.empty_like(x_cm)
        out[perm] = x_cm
        return out
    cols = perm if perm_cols is None else perm_cols
    out = np.empty_like(x_cm)
    out[np.ix_(perm, cols)] = x_cm
    return out


def to_channel_major(x_sm: np.ndarray, perm: np.ndarray, perm_cols: Optional[np.ndarray] = None) -> np.ndarray:
    x_sm = np.asarray(x_sm, dtype=float)
    if x_sm.ndim == 1:
        return x_sm[perm]
    cols = perm if perm_cols is None else perm_cols
    return x_sm[np.ix_(perm, cols)]


@dataclass(frozen=True)
class BehaviorCost:
    """
    Channel-major pieces of the behavior cost. The dw terms live on the
    input side: R_dw on dw, S_dw between dw and the outputs.
    """

    Q: np.ndarray
    R_dw: np.ndarray
    S_dw: np.ndarray
    phi_gain: np.ndarray
    design: BehaviorDesign
    outputs: Tuple[str, ...]

    @property
    def N(self) -> int:
        return self.design.N

    def reference(self, refs: Optional[BehaviorRefs] = None) -> np.ndarray:
        """Channel-major output reference"""
        refs = refs or self.design.refs
        values = {"vd": refs.Vd_ref, "vq": refs.Vq_ref, "pe": refs.P_ref, "qe": refs.Q_ref}
        return np.concatenate([np.full(self.N, values.get(ch, 0.0)) for ch in self.outputs])

    def joint_matrix(self) -> np.ndarray:
        """Weight over [dw; y] (both channel-major)"""
        return np.block([[self.R_dw, self.S_dw], [self.S_dw.T, self.Q]])

    def joint_value(self, dw, y_cm, dw_prev: float, refs: Optional[BehaviorRefs] = None) -> float:
        z = np.concatenate([np.ravel(dw), np.ravel(y_cm)])
        z_ref = np.concatenate([self.phi_gain * dw_prev, self.reference(refs)])
        e = z - z_ref
        return float(e @ self.joint_matrix() @ e)

    def to_deepc_weights(
        self,
        T_ini: int,
        input_weight: Sequence[float],
        inputs: Sequence[str] = INPUT_CHANNELS,
    ) -> Dict[str, np.ndarray]:
        """
        Sample-major R, Q, S and Phi for DeePCConfig. input_weight is the
        per-channel base weight keeping R positive definite.
        """
        N = self.N
        m, p = len(inputs), len(self.outputs)
        base = np.asarray(input_weight, dtype=float).ravel()
        if base.shape[0] != m:
            raise DimensionError(f"input_weight has {base.shape[0]} entries, expected {m}")
        perm_u = channel_major_permutation(m, N)
        perm_y = channel_major_permutation(p, N)
        R_cm = np.kron(np.diag(base), np.eye(N))
        S_cm = np.zeros((m * N, p * N))
        Phi = np.zeros((m * N, m * T_ini))
        if "dw" in inputs:
            k = list(inputs).index("dw")
            sl = slice(k * N, (k + 1) * N)
            R_cm[sl, sl] += self.R_dw
            S_cm[sl, :] = self.S_dw
            Phi[np.arange(N) * m + k, (T_ini - 1) * m + k] = self.phi_gain
        elif np.any(self.R_dw) or np.any(self.S_dw):
            raise ValueError(f"behavior {self.design.name!r} weights dw but the inputs have no dw channel")
        return {
            "R": to_sample_major(R_cm, perm_u),
            "Q": to_sample_major(self.Q, perm_y),
            "S": to_sample_major(S_cm, perm_u, perm_y),
            "Phi": Phi,
        }

    def sample_major_reference(self, refs: Optional[BehaviorRefs] = None) -> np.ndarray:
        return to_sample_major(self.reference(refs), channel_major_permutation(len(self.outputs), self.N))


def behavior_cost(design: BehaviorDesign, outputs: Sequence[str] = OUTPUT_CHANNELS) -> BehaviorCost:
    N = design.N
    outputs = tuple(outputs)
    missing = {"vd", "vq", "pe", "qe"} - set(outputs)
    if missing:
        raise DimensionError(f"output ordering lacks {sorted(missing)}")
    idx = {ch: i for i, ch in enumerate(outputs)}
    p = len(outputs)

    def block(ch):
        return slice(idx[ch] * N, (idx[ch] + 1) * N)

    Q = np.zeros((p * N, p * N))
    a1, a2, a3 = design.alpha1, design.alpha2, design.alpha3
    Qpw, Qqv = design.Q_Pomega, design.Q_QV
    w, P = slice(0, N), slice(N, 2 * N)

    Q[block("pe"), block("pe")] += a1 * Qpw[P, P]
    Q[block("vd"), block("vd")] += a2 * Qqv[w, w]
    Q[block("vd"), block("qe")] += a2 * Qqv[w, P]
    Q[block("qe"), block("vd")] += a2 * Qqv[P, w]
    Q[block("qe"), block("qe")] += a2 * Qqv[P, P]
    Q[block("vq"), block("vq")] += a3 * np.eye(N)

    S_dw = np.zeros((N, p * N))
    S_dw[:, block("pe")] = a1 * Qpw[w, P]
    return BehaviorCost(
        Q=Q, R_dw=a1 * Qpw[w, w], S_dw=S_dw,
        phi_gain=design.phi_gain, design=design, outputs=outputs,
    )


def build_output_weight(design: BehaviorDesign, N: int,
                        outputs: Sequence[str] = OUTPUT_CHANNELS) -> Tuple[np.ndarray, np.ndarray]:
    """Channel-major output weight and reference (the dw terms go through BehaviorCost)"""
    if N != design.N:
        raise DimensionError(f"design built for N={design.N}, requested N={N}")
    cost = behavior_cost(design, outputs)
    return cost.Q, cost.reference()


def behavior_preset(name: str, N: int, gfm: Optional[GFMParams] = None,
                    overrides: Optional[dict] = None, refs: Optional[BehaviorRefs] = None) -> BehaviorDesign:
    """
    Table of weight priorities:
      gfl / pq   alpha3 > alpha1 = alpha2, P tracking, Q tracking
      gfm        alpha2 = alpha3 > alpha1, swing-equation coupling, Vd tracking
      pv         alpha2 = alpha3 > alpha1, P tracking, Vd tracking
      qv_droop   as pv with the kernel [[1, k], [k, k^2]] on (Vd, Q)
    """
    overrides = dict(overrides or {})
    gfm = gfm or GFMParams()
    refs = refs or BehaviorRefs()
    k_qv = float(overrides.pop("k_qv", K_QV_DEFAULT))
    zero_phi = np.zeros(N)
    if name in ("gfl", "pq"):
        alphas = (ALPHA_SMALL, ALPHA_SMALL, ALPHA_LARGE)
        Q_pw, Q_qv, phi = gfl_pw_matrix(N), qv_matrix(0.0, 1.0, 0.0, N), zero_phi
    elif name == "gfm":
        alphas = (ALPHA_SMALL, ALPHA_LARGE, ALPHA_LARGE)
        Q_pw, _ = gfm_pw_design(gfm, N)
        Q_qv, phi = qv_matrix(1.0, 0.0, 0.0, N), gfm_phi_gain(gfm, N)
    elif name == "pv":
        alphas = (ALPHA_SMALL, ALPHA_LARGE, ALPHA_LARGE)
        Q_pw, Q_qv, phi = gfl_pw_matrix(N), qv_matrix(1.0, 0.0, 0.0, N), zero_phi
    elif name == "qv_droop":
        alphas = (ALPHA_SMALL, ALPHA_LARGE, ALPHA_LARGE)
        Q_pw, Q_qv, phi = gfl_pw_matrix(N), qv_matrix(1.0, k_qv ** 2, k_qv, N), zero_phi
    else:
        raise ValueError(f"unknown behavior preset {name!r}, expected one of {BEHAVIOR_PRESETS}")
    a1 = float(overrides.pop("alpha1", alphas[0]))
    a2 = float(overrides.pop("alpha2", alphas[1]))
    a3 = float(overrides.pop("alpha3", alphas[2]))
    if overrides:
        raise ValueError(f"unknown behavior overrides: {sorted(overrides)}")
    return BehaviorDesign(a1, a2, a3, Q_pw, Q_qv, phi, refs, name)
