"""Joint canceller / precoder / combiner selection and baseline designs.

``solve_op3`` searches the configured canceller realizations, collects every
feasible precoder returned by :func:`~fdmimo.beamforming.algorithm1_precoders`
and keeps the triple with the largest downlink-plus-uplink rate.  When no
pair meets the residual SI threshold the node falls back to half duplex.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import canceller as cc
from .beamforming import (
    Combiner,
    PrecoderCandidate,
    algorithm1_precoders,
    dl_rate,
    meets_residual_constraint,
    optimal_combiner,
    squeeze_basis,
    sub_precoder,
    ul_rate,
    stage_mode,
)
from .exceptions import ParameterError

DESIGN_IDS = (
    "proposed_taps",
    "proposed_aux",
    "sota_full_taps",
    "sota_full_aux",
    "softnull",
    "half_duplex_dl",
    "half_duplex_ul",
)


@dataclass(frozen=True)
class FdSolution:
    """Outcome of one design on one channel realization.

    ``feasible`` is False whenever the node had to fall back to half duplex;
    ``alpha_used`` is then 0.
    """

    design_id: str
    dl_rate: float
    ul_rate: float
    feasible: bool
    alpha_used: int
    canceller: Optional[cc.CancellerRealization] = None
    precoder: Optional[PrecoderCandidate] = None
    combiner: Optional[Combiner] = None

    @property
    def fd_rate(self):
        return self.dl_rate + self.ul_rate


def _effective_si(channels, realization):
    c = realization.c_impaired if realization.c_impaired is not None else realization.c_ideal
    return channels.h_kk + c


def _realizations(channels, config):
    if config.enumerate_realizations:
        yield from cc.enumerate_realizations(
            channels.h_kk, config.architecture, config.n_elements, config.max_realizations
        )
    else:
        yield cc.heuristic_canceller(channels.h_kk, config.architecture, config.n_elements)


def _dl_only_rate(channels, config):
    h = channels.h_qk
    mode = stage_mode(h.shape[0], h.shape[1], config.dl_precoding)
    g = sub_precoder(h, config.p_k, mode, config.sigma_q_sq)
    return dl_rate(g, h, config.sigma_q_sq)


def _ul_only_rate(channels, config, rows=None):
    h = channels.h_km if rows is None else channels.h_km[list(rows)]
    m_k = h.shape[0]
    d_m = min(config.streams_ul, m_k)
    zero_si = np.zeros((m_k, channels.h_kk.shape[1]))
    zero_v = np.zeros((channels.h_kk.shape[1], 1))
    try:
        u = optimal_combiner(zero_si, zero_v, h, config.sigma_k_sq, d_m)
    except ParameterError:
        return 0.0, None
    return ul_rate(u.u, zero_si, zero_v, h, config.p_m, config.sigma_k_sq), u


def fallback_half_duplex(channels, config):
    """Serve only the better of the downlink and the uplink (ties go to DL)."""
    dl = _dl_only_rate(channels, config)
    ul, combiner = _ul_only_rate(channels, config)
    if dl >= ul:
        return FdSolution("half_duplex_dl", dl, 0.0, False, 0)
    return FdSolution("half_duplex_ul", 0.0, ul, False, 0, combiner=combiner)


def _evaluate_candidate(channels, config, c_eff, cand):
    h_km = channels.h_km
    if cand.rx_rows and len(cand.rx_rows) < h_km.shape[0]:
        rows = list(cand.rx_rows)
        c_eff = c_eff[rows]
        h_km = h_km[rows]
    d_m = min(config.streams_ul, h_km.shape[0])
    comb = optimal_combiner(c_eff, cand.v, h_km, config.sigma_k_sq, d_m)
    ul = ul_rate(comb.u, c_eff, cand.v, h_km, config.p_m, config.sigma_k_sq)
    return comb, ul


def _select_best(channels, config, impairments, rng, design_id, n_constrained_rows=None):
    best = None
    alpha_max = config.resolved_alpha_max()
    for ell, real in enumerate(_realizations(channels, config), start=1):
        real = cc.impair(real, impairments, rng)
        c_eff = _effective_si(channels, real)
        candidates = algorithm1_precoders(
            c_eff,
            channels.h_qk,
            config.p_k,
            config.lambda_a,
            alpha_max,
            mode=config.dl_precoding,
            sigma_q_sq=config.sigma_q_sq,
            realization_index=ell,
            n_constrained_rows=n_constrained_rows,
        )
        for cand in candidates:
            comb, ul = _evaluate_candidate(channels, config, c_eff, cand)
            key = (-(cand.dl_rate + ul), cand.candidate_index, ell)
            if best is None or key < best[0]:
                best = (key, real, cand, comb, ul)
    if best is None:
        return fallback_half_duplex(channels, config)
    _, real, cand, comb, ul = best
    return FdSolution(
        design_id=design_id,
        dl_rate=cand.dl_rate,
        ul_rate=ul,
        feasible=True,
        alpha_used=cand.alpha,
        canceller=real,
        precoder=cand,
        combiner=comb,
    )


def solve_op3(channels, config, impairments, rng):
    """Jointly pick canceller realization, precoder and combiner for max FD rate.

    Ties in FD rate go to the candidate with the largest ``alpha`` and then
    to the earliest realization.
    """
    return _select_best(channels, config, impairments, rng, f"proposed_{config.architecture}")


def relax_rx_subset(channels, config, m_k_prime, impairments, rng):
    """Enforce the residual SI threshold on ``m_k_prime`` RX chains only.

    For every candidate precoder the ``m_k_prime`` chains with the smallest
    residual SI power are constrained; the remaining (saturated) chains are
    excluded from uplink reception, so the combiner works on the matching
    rows of ``H_km``.
    """
    m_k = channels.h_kk.shape[0]
    if not 1 <= m_k_prime <= m_k:
        raise ParameterError(f"m_k_prime must lie in [1, {m_k}], got {m_k_prime}")
    if m_k_prime == m_k:
        return solve_op3(channels, config, impairments, rng)
    return _select_best(
        channels,
        config,
        impairments,
        rng,
        f"proposed_{config.architecture}",
        n_constrained_rows=m_k_prime,
    )


def _single_precoder_solution(channels, config, design_id, real, c_eff, f, n_streams=None):
    mode = stage_mode(channels.h_qk.shape[0], f.shape[1], config.dl_precoding)
    g = sub_precoder(channels.h_qk @ f, config.p_k, mode, config.sigma_q_sq, n_streams)
    v = f @ g
    if not meets_residual_constraint(c_eff, v, config.lambda_a):
        return fallback_half_duplex(channels, config)
    cand = PrecoderCandidate(
        1, 1, f.shape[1], f, g, v, dl_rate(v, channels.h_qk, config.sigma_q_sq),
        rx_rows=tuple(range(c_eff.shape[0])),
    )
    comb, ul = _evaluate_candidate(channels, config, c_eff, cand)
    return FdSolution(design_id, cand.dl_rate, ul, True, cand.alpha, real, cand, comb)


def solve_sota_full_canceller(channels, config, impairments, rng, architecture):
    """Full canceller plus null-space-projection transmit beamforming.

    The precoder is confined to the ``min(M_q, N_k)`` least dominant right
    singular directions of the impaired residual SI channel.
    """
    if architecture not in ("taps", "aux"):
        raise ParameterError(f"unknown architecture {architecture!r}")
    real = cc.impair(cc.full_canceller(channels.h_kk, architecture), impairments, rng)
    c_eff = _effective_si(channels, real)
    n_k = c_eff.shape[1]
    alpha = min(channels.h_qk.shape[0], n_k)
    f = squeeze_basis(c_eff)[:, n_k - alpha:]
    return _single_precoder_solution(
        channels, config, f"sota_full_{architecture}", real, c_eff, f
    )


def solve_softnull(channels, config):
    """Transmit-only SI suppression: no analog canceller and one DL stream.

    Uses the largest feasible ``alpha`` on the raw SI channel.
    """
    alpha_max = config.resolved_alpha_max()
    candidates = algorithm1_precoders(
        channels.h_kk,
        channels.h_qk,
        config.p_k,
        config.lambda_a,
        alpha_max,
        mode="closed_loop",
        sigma_q_sq=config.sigma_q_sq,
        n_streams=1,
    )
    if not candidates:
        return fallback_half_duplex(channels, config)
    cand = candidates[0]
    comb, ul = _evaluate_candidate(channels, config, channels.h_kk, cand)
    return FdSolution("softnull", cand.dl_rate, ul, True, cand.alpha, None, cand, comb)
