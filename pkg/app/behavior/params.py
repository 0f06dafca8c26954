from dataclasses import dataclass

from app.config.settings import settings


@dataclass(frozen=True)
class GFMParams:
    """Virtual inertia J (s p.u.), damping D (p.u. per rad/s), period Ts (s)"""

    J: float = 0.03
    D: float = 0.3
    Ts: float = settings.control_period

    def __post_init__(self):
        if self.J <= 0 or self.D <= 0 or self.Ts <= 0:
            raise ValueError("J, D and Ts must be positive")
        decay = 1.0 - self.D * self.Ts / self.J
        if not 0.0 < decay < 1.0:
            raise ValueError(f"1 - D*Ts/J = {decay:.4f} must lie in (0, 1)")

    @property
    def inertia_gain(self) -> float:
        return self.J / self.Ts


@dataclass(frozen=True)
class PLLParams:
    Kp_pll: float = 42.0
    Ki_pll: float = 900.0
    Ts: float = settings.control_period

    def __post_init__(self):
        if self.Kp_pll <= 0 or self.Ki_pll <= 0 or self.Ts <= 0:
            raise ValueError("PLL gains and Ts must be positive")
