from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from app.errors import DimensionError


def as_record(seq) -> np.ndarray:
    """Coerce a sequence to a T x q float array (1-D input means q = 1)"""
    arr = np.asarray(seq, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"record must be 1-D or 2-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Trajectory:
    """Input/output record u^d (T x m), y^d (T x p)"""

    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        u = as_record(self.u)
        y = as_record(self.y)
        if u.shape[0] != y.shape[0]:
            raise DimensionError(f"u has {u.shape[0]} samples but y has {y.shape[0]}")
        if u.shape[0] < 1:
            raise DimensionError("trajectory must contain at least one sample")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def T(self) -> int:
        return self.u.shape[0]

    @property
    def m(self) -> int:
        return self.u.shape[1]

    @property
    def p(self) -> int:
        return self.y.shape[1]

    def tail(self, length: int) -> "Trajectory":
        return Trajectory(self.u[-length:], self.y[-length:])

    def to_frame(self, dt: float = 1.0) -> pd.DataFrame:
        columns = {"t": np.arange(self.T) * dt}
        for j in range(self.m):
            columns[f"u{j + 1}"] = self.u[:, j]
        for j in range(self.p):
            columns[f"y{j + 1}"] = self.y[:, j]
        return pd.DataFrame(columns)

    def to_csv(self, path: Union[str, Path], dt: float = 1.0):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame(dt).to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "Trajectory":
        frame = pd.read_csv(path, float_precision="round_trip")
        u_cols = [c for c in frame.columns if c.startswith("u")]
        y_cols = [c for c in frame.columns if c.startswith("y")]
        if not u_cols or not y_cols:
            raise DimensionError(f"{path}: expected header t,u1..um,y1..yp")
        return cls(frame[u_cols].to_numpy(), frame[y_cols].to_numpy())
