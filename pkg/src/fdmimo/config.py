"""System configuration shared by the solver, the sweep and the CLI."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .channels import dbm_to_watt_linear
from .exceptions import ConfigError

ARCHITECTURES = ("taps", "aux")
DL_PRECODING_MODES = ("open_loop", "closed_loop")


@dataclass(frozen=True)
class SystemConfig:
    """Node dimensions, powers, noise floors and canceller budget.

    ``d_m`` defaults to ``min(m_k, n_m)`` and ``alpha_max`` to the
    power-dependent rule in :meth:`resolved_alpha_max` when left as None.
    """

    m_k: int = 4
    n_k: int = 4
    m_q: int = 1
    n_m: int = 1
    d_m: Optional[int] = None
    p_k_dbm: float = 30.0
    p_m_dbm: float = 10.0
    noise_floor_k_dbm: float = -110.0
    noise_floor_q_dbm: float = -90.0
    lambda_a_dbm: float = -60.0
    architecture: str = "taps"
    n_elements: int = 8
    dl_precoding: str = "open_loop"
    alpha_max: Optional[int] = None
    enumerate_realizations: bool = False
    max_realizations: int = 10_000

    def __post_init__(self):
        for key in ("m_k", "n_k", "m_q", "n_m"):
            if int(getattr(self, key)) < 1:
                raise ConfigError(key, "antenna count must be >= 1")
        if self.architecture not in ARCHITECTURES:
            raise ConfigError("architecture", f"expected one of {ARCHITECTURES}")
        if self.dl_precoding not in DL_PRECODING_MODES:
            raise ConfigError("dl_precoding", f"expected one of {DL_PRECODING_MODES}")
        if self.d_m is not None and not 1 <= self.d_m <= min(self.m_k, self.n_m):
            raise ConfigError(
                "d_m", f"must satisfy 1 <= d_m <= min(m_k, n_m) = {min(self.m_k, self.n_m)}"
            )
        budget = self.m_k * self.n_k if self.architecture == "taps" else self.m_k
        if not 0 <= self.n_elements <= budget:
            raise ConfigError(
                "n_elements",
                f"{self.architecture} canceller admits 0..{budget} elements, got {self.n_elements}",
            )
        if self.alpha_max is not None and not 1 <= self.alpha_max <= self.n_k:
            raise ConfigError("alpha_max", f"must lie in [1, n_k={self.n_k}]")
        if self.max_realizations < 1:
            raise ConfigError("max_realizations", "must be >= 1")

    @property
    def streams_ul(self):
        return self.d_m if self.d_m is not None else min(self.m_k, self.n_m)

    @property
    def p_k(self):
        return dbm_to_watt_linear(self.p_k_dbm)

    @property
    def p_m(self):
        return dbm_to_watt_linear(self.p_m_dbm)

    @property
    def sigma_k_sq(self):
        return dbm_to_watt_linear(self.noise_floor_k_dbm)

    @property
    def sigma_q_sq(self):
        return dbm_to_watt_linear(self.noise_floor_q_dbm)

    @property
    def lambda_a(self):
        return dbm_to_watt_linear(self.lambda_a_dbm)

    def resolved_alpha_max(self):
        # High DL power: restrict to min(M_q, N_k) effective antennas.
        if self.alpha_max is not None:
            return self.alpha_max
        if self.p_k_dbm >= 30.0:
            return min(self.m_q, self.n_k)
        return self.n_k

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)
