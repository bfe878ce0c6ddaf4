from dataclasses import dataclass

from ..errors import BadConfig


@dataclass
class PlannerConfig:
    s_reg: float = 40.0
    eps_e: float = 0.25
    eps_r: float = 0.6
    eps_ftr: float = 0.25
    u0: float = 0.05
    c_min: float = 1.0
    global_period: float = 2.0
    local_period: float = 1.0
    explored_fraction: float = 0.95
    n_exact: int = 12
    # only regions with a cluster scoring at least eps_ftr compete, when one exists
    relevant_gate: bool = True

    def __post_init__(self):
        if self.s_reg <= 0:
            raise BadConfig(f"s_reg must be positive, got {self.s_reg}")
        for name in ("eps_e", "eps_r", "eps_ftr", "u0"):
            if not 0 <= getattr(self, name) <= 1:
                raise BadConfig(f"{name} must lie in [0, 1]")
        if self.c_min <= 0:
            raise BadConfig("c_min must be positive")
        if self.global_period <= 0 or self.local_period <= 0:
            raise BadConfig("planning periods must be positive")
        if not 0 < self.explored_fraction <= 1:
            raise BadConfig("explored_fraction must lie in (0, 1]")
        if self.n_exact < 1:
            raise BadConfig("n_exact must be at least 1")
