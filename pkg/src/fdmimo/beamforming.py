"""Digital transmit precoding and receive combining at the full-duplex node.

The transmit precoder is built as ``V = F @ G``: ``F`` keeps the ``alpha``
least dominant right singular directions of the effective SI channel
``H_kk + C`` and ``G`` precodes the resulting effective downlink channel
``H_qk @ F``.  The receive combiner whitens the residual SI plus noise and
matches the whitened uplink channel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .exceptions import NumericalError, ParameterError

PRECODER_MODES = ("open_loop", "closed_loop", "mrt", "scalar")

# Effective DL gains below this are treated as a dead channel in closed loop.
_DEAD_GAIN = 1e-15


@dataclass(frozen=True)
class PrecoderCandidate:
    """A feasible precoder for one canceller realization.

    ``realization_index`` and ``candidate_index`` are 1-based; candidates of a
    realization are numbered in order of decreasing ``alpha``.
    """

    realization_index: int
    candidate_index: int
    alpha: int
    f: np.ndarray
    g: np.ndarray
    v: np.ndarray
    dl_rate: float
    rx_rows: Tuple[int, ...] = ()

    @property
    def d_k(self):
        return self.g.shape[1]


@dataclass(frozen=True)
class Combiner:
    """Receive combiner ``u`` (d_m x M_k) with unit-norm rows."""

    u: np.ndarray

    @property
    def d_m(self):
        return self.u.shape[0]


def _log2det_identity_plus(a):
    sign, logdet = np.linalg.slogdet(np.eye(a.shape[0]) + a)
    value = logdet / np.log(2.0)
    if not np.isfinite(value) or sign == 0:
        raise NumericalError("log-determinant is not finite")
    return float(value)


def dl_rate(v, h_qk, sigma_q_sq):
    """Downlink rate ``log2 det(I + H V V^H H^H / sigma_q^2)`` in bits/s/Hz."""
    hv = np.asarray(h_qk) @ np.asarray(v)
    rate = _log2det_identity_plus(hv @ hv.conj().T / sigma_q_sq)
    return max(rate, 0.0)


def uplink_precoder(n_m, d_m, p_m):
    """Open-loop precoder of the uplink node: equal power on ``d_m`` antennas."""
    return np.sqrt(p_m / d_m) * np.eye(n_m, d_m)


def ul_rate(u, c_eff, v, h_km, p_m, sigma_k_sq):
    """Uplink rate after combining, treating residual SI as Gaussian noise.

    With ``S = U H V_m V_m^H H^H U^H`` and
    ``Q = U C V V^H C^H U^H + sigma_k^2 U U^H`` this is
    ``log2 det(I + S Q^{-1})``.
    """
    u = np.asarray(u)
    d_m = u.shape[0]
    h_km = np.asarray(h_km)
    v_m = uplink_precoder(h_km.shape[1], d_m, p_m)
    sig = u @ h_km @ v_m
    interf = u @ np.asarray(c_eff) @ np.asarray(v)
    q = interf @ interf.conj().T + sigma_k_sq * (u @ u.conj().T)
    s = sig @ sig.conj().T
    try:
        s_qinv = np.linalg.solve(q.T, s.T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError("interference-plus-noise covariance is singular") from exc
    return max(_log2det_identity_plus(s_qinv), 0.0)


def waterfilling(channel_gains, total_power, noise_var=1.0, tol=1e-12):
    """Water-filling power allocation over parallel channels.

    ``channel_gains`` are amplitude gains (singular values); channel ``i``
    receives ``max(0, mu - noise_var / g_i**2)`` with the water level ``mu``
    found by bisection so that the powers add up to ``total_power``.
    """
    g2 = np.asarray(channel_gains, dtype=float) ** 2
    if np.any(g2 < 0) or not total_power > 0:
        raise ParameterError("gains must be >= 0 and total_power > 0")
    active = g2 > 0
    if not np.any(active):
        raise ParameterError("all channel gains are zero")
    floor = np.full(g2.shape, np.inf)
    floor[active] = noise_var / g2[active]

    def allocated(mu):
        return np.maximum(mu - floor, 0.0)

    lo, hi = 0.0, total_power + floor[active].max()
    for _ in range(400):
        mu = 0.5 * (lo + hi)
        excess = allocated(mu).sum() - total_power
        if abs(excess) <= tol:
            break
        if excess > 0:
            hi = mu
        else:
            lo = mu
    p = allocated(mu)
    return p * (total_power / p.sum())


def sub_precoder(h_eff, p_k, mode, noise_var=1.0, n_streams=None):
    """Precoder ``G`` (alpha x d_k) for the effective downlink channel ``h_eff``.

    Modes: ``open_loop`` spreads ``p_k`` equally over ``d_k = min(M_q, alpha)``
    streams; ``closed_loop`` beamforms on the right singular vectors with
    water-filling; ``mrt`` is conjugate beamforming for a single receive
    antenna; ``scalar`` is ``sqrt(p_k)`` for a single effective antenna.
    ``n_streams`` caps ``d_k``.
    """
    h_eff = np.atleast_2d(np.asarray(h_eff))
    m_q, alpha = h_eff.shape
    d_k = min(m_q, alpha) if n_streams is None else min(n_streams, m_q, alpha)
    if mode == "scalar":
        if alpha != 1:
            raise ParameterError("scalar precoding needs alpha == 1")
        return np.full((1, 1), np.sqrt(p_k), dtype=complex)
    if mode == "mrt":
        if m_q != 1 or alpha < 2:
            raise ParameterError("MRT needs a single receive antenna and alpha >= 2")
        h = h_eff[0]
        norm = np.linalg.norm(h)
        if norm < _DEAD_GAIN:
            return sub_precoder(h_eff, p_k, "open_loop", noise_var, 1)
        return (np.sqrt(p_k) * h.conj() / norm)[:, None]
    if mode == "open_loop":
        return np.sqrt(p_k / d_k) * np.eye(alpha, d_k, dtype=complex)
    if mode == "closed_loop":
        _, s, vh = np.linalg.svd(h_eff)
        gains = s[:d_k]
        if gains.max(initial=0.0) < _DEAD_GAIN:
            return sub_precoder(h_eff, p_k, "open_loop", noise_var, n_streams)
        powers = waterfilling(gains, p_k, noise_var)
        return vh.conj().T[:, :d_k] * np.sqrt(powers)[None, :]
    raise ParameterError(f"unknown precoding mode {mode!r}")


def squeeze_basis(c_eff):
    """Right singular vectors of ``c_eff`` ordered by descending singular value."""
    _, _, vh = np.linalg.svd(np.asarray(c_eff))
    return vh.conj().T


def residual_row_powers(c_eff, v):
    """Average residual SI power at every RX chain, ``||[C V]_(j,:)||^2``."""
    cv = np.asarray(c_eff) @ np.asarray(v)
    return np.sum(np.abs(cv) ** 2, axis=1)


def constrained_rows(c_eff, v, lambda_a, n_rows: Optional[int] = None):
    """RX chains checked against ``lambda_a``, or None if any of them exceeds it.

    With ``n_rows`` set, only the ``n_rows`` chains with the smallest
    residual SI power are checked; the others are left to saturate.
    """
    powers = residual_row_powers(c_eff, v)
    rows = np.arange(powers.size) if n_rows is None else np.argsort(powers, kind="stable")[:n_rows]
    if np.all(powers[rows] <= lambda_a):
        return tuple(sorted(int(r) for r in rows))
    return None


def meets_residual_constraint(c_eff, v, lambda_a):
    return bool(np.all(residual_row_powers(c_eff, v) <= lambda_a))


def stage_mode(m_q, alpha, mode):
    if alpha == 1:
        return "scalar"
    if m_q == 1 and mode in ("open_loop", "closed_loop"):
        return "mrt"
    return mode


def algorithm1_precoders(
    c_eff_design,
    h_qk,
    p_k,
    lambda_a,
    alpha_max,
    mode="open_loop",
    sigma_q_sq=1.0,
    realization_index=1,
    n_streams=None,
    n_constrained_rows=None,
) -> List[PrecoderCandidate]:
    """Feasible transmit precoders for one canceller realization.

    For ``alpha = alpha_max, ..., 1`` the precoder is restricted to the
    ``alpha`` least dominant right singular directions of ``c_eff_design``
    and kept if every RX chain sees residual SI power at most ``lambda_a``
    (or, with ``n_constrained_rows``, the chains with the weakest residual).
    A MISO effective channel is served with MRT and a single effective
    antenna with ``sqrt(p_k)``.  An empty list means
    the realization cannot meet the constraint.
    """
    c_eff_design = np.asarray(c_eff_design)
    h_qk = np.asarray(h_qk)
    n_k = c_eff_design.shape[1]
    m_q = h_qk.shape[0]
    if not 1 <= alpha_max <= n_k:
        raise ParameterError(f"alpha_max must lie in [1, {n_k}]")
    basis = squeeze_basis(c_eff_design)
    candidates = []
    for alpha in range(alpha_max, 0, -1):
        f = basis[:, n_k - alpha:]
        stage = stage_mode(m_q, alpha, mode)
        g = sub_precoder(h_qk @ f, p_k, stage, sigma_q_sq, n_streams)
        v = f @ g
        rows = constrained_rows(c_eff_design, v, lambda_a, n_constrained_rows)
        if rows is not None:
            candidates.append(
                PrecoderCandidate(
                    realization_index=realization_index,
                    candidate_index=len(candidates) + 1,
                    alpha=alpha,
                    f=f,
                    g=g,
                    v=v,
                    dl_rate=dl_rate(v, h_qk, sigma_q_sq),
                    rx_rows=rows,
                )
            )
    return candidates


def optimal_combiner(c_eff, v, h_km, sigma_k_sq, d_m):
    """Uplink-rate-maximizing combiner with unit-norm rows.

    ``B = C V V^H C^H + sigma_k^2 I = E diag(lam) E^H`` is whitened by
    ``T = diag(lam)^{-1/2} E^H``; the rows of ``U`` are the top ``d_m`` left
    singular vectors ``W`` of ``T H_km`` mapped back through ``T`` (``W^H T``)
    and normalized.
    """
    c_eff = np.asarray(c_eff)
    h_km = np.asarray(h_km)
    m_k = c_eff.shape[0]
    interf = c_eff @ np.asarray(v)
    b = interf @ interf.conj().T + sigma_k_sq * np.eye(m_k)
    lam, e = np.linalg.eigh(b)
    if lam.min() <= 0:
        raise NumericalError("interference-plus-noise covariance is not positive definite")
    whiten = e.conj().T / np.sqrt(lam)[:, None]
    w_full, s, _ = np.linalg.svd(whiten @ h_km[:, : min(d_m, h_km.shape[1])])
    s_max = s.max(initial=0.0)
    rank = int(np.sum(s > s_max * 1e-12)) if s_max > 0 else 0
    if d_m > rank:
        raise ParameterError(f"d_m={d_m} exceeds the whitened uplink channel rank {rank}")
    u = w_full[:, :d_m].conj().T @ whiten
    u = u / np.linalg.norm(u, axis=1, keepdims=True)
    return Combiner(u=u)
