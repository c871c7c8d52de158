"""Channel realizations for the full-duplex link and dB/linear conversions.

All generators take an explicit ``numpy.random.Generator`` so callers decide
how random streams are split between trials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# k-factors at or below this many dB are treated as pure Rayleigh.
RAYLEIGH_K_FACTOR_DB = -300.0


def dbm_to_watt_linear(x):
    """Convert dBm to watts, ``10**((x - 30) / 10)``."""
    if np.ndim(x):
        return 10.0 ** ((np.asarray(x, dtype=float) - 30.0) / 10.0)
    return 10.0 ** ((float(x) - 30.0) / 10.0)


def db_to_linear(x_db):
    return 10.0 ** (x_db / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Large-scale parameters of the three links seen by the FD node.

    Defaults are the desk-scale reproduction values: 110 dB path loss on the
    downlink and uplink, a 40 dB self-interference path with a 35 dB
    k-factor.
    """

    pathloss_dl_db: float = 110.0
    pathloss_ul_db: float = 110.0
    pathloss_si_db: float = 40.0
    ricean_k_db: float = 35.0

    def __post_init__(self):
        from .exceptions import ConfigError

        for key in ("pathloss_dl_db", "pathloss_ul_db", "pathloss_si_db"):
            if not getattr(self, key) >= 0.0:
                raise ConfigError(key, "path loss must be >= 0 dB")
        if not np.isfinite(self.ricean_k_db):
            raise ConfigError("ricean_k_db", "k-factor must be finite")


@dataclass(frozen=True)
class ChannelSet:
    """One realization of the downlink, uplink and self-interference channels.

    Shapes: ``h_qk`` is M_q x N_k, ``h_km`` is M_k x N_m and ``h_kk`` is
    M_k x N_k.  The channel between nodes q and m is identically zero and
    is therefore not stored.
    """

    h_qk: np.ndarray
    h_km: np.ndarray
    h_kk: np.ndarray


def _complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_rayleigh_channel(rows, cols, pathloss_db, rng):
    """IID CN(0, 10**(-pathloss_db/10)) entries."""
    scale = np.sqrt(db_to_linear(-pathloss_db))
    return scale * _complex_normal(rng, (rows, cols))


def los_phase_matrix(rows, cols):
    """Deterministic phase ramp used for the line-of-sight SI component.

    ``theta[i, j] = 2*pi*(i*cols + j) / (rows*cols)`` with zero-based indices.
    """
    idx = np.arange(rows * cols, dtype=float).reshape(rows, cols)
    return 2.0 * np.pi * idx / (rows * cols)


def draw_ricean_si_channel(rows, cols, pathloss_db, k_factor_db, rng):
    """Ricean self-interference channel with a fixed LoS phase pattern.

    Each entry is ``sqrt(P*K/(1+K)) * exp(j*theta) + sqrt(P/(1+K)) * CN(0, 1)``
    with ``P = 10**(-pathloss_db/10)`` and ``K = 10**(k_factor_db/10)``.
    """
    power = db_to_linear(-pathloss_db)
    scatter = _complex_normal(rng, (rows, cols))
    if k_factor_db <= RAYLEIGH_K_FACTOR_DB:
        return np.sqrt(power) * scatter
    k = db_to_linear(k_factor_db)
    los = np.exp(1j * los_phase_matrix(rows, cols))
    return np.sqrt(power * k / (1.0 + k)) * los + np.sqrt(power / (1.0 + k)) * scatter


def draw_channel_set(config, params, rng):
    """Draw independent DL, UL and SI channels for ``config``'s dimensions."""
    h_qk = draw_rayleigh_channel(config.m_q, config.n_k, params.pathloss_dl_db, rng)
    h_km = draw_rayleigh_channel(config.m_k, config.n_m, params.pathloss_ul_db, rng)
    h_kk = draw_ricean_si_channel(
        config.m_k, config.n_k, params.pathloss_si_db, params.ricean_k_db, rng
    )
    return ChannelSet(h_qk=h_qk, h_km=h_km, h_kk=h_kk)
