"""Reduced-complexity analog canceller realizations and hardware impairments.

Two architectures are modelled.  The multi-tap canceller routes ``N`` analog
taps through MUX/DEMUX networks, ``C = L3 @ L2 @ L1``; the multi-AUX-TX
canceller feeds ``N`` auxiliary transmit chains from a digital linear map and
routes their outputs with a DEMUX, ``C = L5 @ L4``.  Canceller values are the
negated SI channel entries (rows) they target, so ``H_kk + C`` vanishes there.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import ParameterError

logger = logging.getLogger(__name__)

# Largest realization count representable as a signed 64-bit integer.
_MAX_COUNT = 2**63 - 1


@dataclass(frozen=True)
class ImpairmentParams:
    """Non-ideal canceller hardware.

    Tap phase and magnitude errors are uniform on ``[-max, +max]``, i.e. half
    of a 0.13 degree / 0.02 dB setting step.  AUX TX oscillators carry
    zero-mean Gaussian phase noise with a 0.717 degree standard deviation.
    """

    tap_phase_err_max_rad: float = 0.065 * np.pi / 180.0
    tap_mag_err_max_db: float = 0.01
    aux_phase_jitter_std_rad: float = 0.717 * np.pi / 180.0

    def __post_init__(self):
        from .exceptions import ConfigError

        for f in dataclasses.fields(self):
            if not getattr(self, f.name) >= 0.0:
                raise ConfigError(f.name, "impairment magnitudes must be >= 0")

    @classmethod
    def ideal(cls):
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class TapCancellerRealization:
    """Multi-tap canceller: input MUX ``l1`` (N x N_k), diagonal tap values
    ``l2`` (N x N) and output DEMUX ``l3`` (M_k x N).

    ``positions[n]`` is the (rx, tx) pair bridged by tap ``n``.
    """

    l1: np.ndarray
    l2: np.ndarray
    l3: np.ndarray
    c_ideal: np.ndarray
    positions: Tuple[Tuple[int, int], ...]
    c_impaired: Optional[np.ndarray] = None

    architecture = "taps"

    @property
    def n_elements(self):
        return self.l2.shape[0]


@dataclass(frozen=True)
class AuxTxCancellerRealization:
    """Multi-AUX-TX canceller: digital map ``l4`` (N x N_k) and DEMUX ``l5``
    (M_k x N).  ``rows[i]`` is the RX antenna fed by AUX chain ``i``.
    """

    l4: np.ndarray
    l5: np.ndarray
    c_ideal: np.ndarray
    rows: Tuple[int, ...]
    c_impaired: Optional[np.ndarray] = None

    architecture = "aux"

    @property
    def n_elements(self):
        return self.l4.shape[0]


CancellerRealization = Union[TapCancellerRealization, AuxTxCancellerRealization]


def _descending_order(values):
    # Stable: equal values keep ascending index order.
    return np.argsort(-np.asarray(values), kind="stable")


def tap_canceller_from_positions(h_kk, positions: Sequence[Tuple[int, int]]):
    """Build the tap canceller that cancels ``h_kk`` at ``positions``."""
    h_kk = np.asarray(h_kk)
    m_k, n_k = h_kk.shape
    n = len(positions)
    l1 = np.zeros((n, n_k))
    l3 = np.zeros((m_k, n))
    taps = np.zeros(n, dtype=complex)
    for t, (i, j) in enumerate(positions):
        l1[t, j] = 1.0
        l3[i, t] = 1.0
        taps[t] = -h_kk[i, j]
    l2 = np.diag(taps)
    return TapCancellerRealization(
        l1=l1,
        l2=l2,
        l3=l3,
        c_ideal=l3 @ l2 @ l1,
        positions=tuple((int(i), int(j)) for i, j in positions),
    )


def aux_canceller_from_rows(h_kk, rows: Sequence[int]):
    """Build the AUX TX canceller whose chain ``i`` cancels row ``rows[i]``."""
    h_kk = np.asarray(h_kk)
    m_k, n_k = h_kk.shape
    n = len(rows)
    l4 = np.zeros((n, n_k), dtype=complex)
    l5 = np.zeros((m_k, n))
    for i, r in enumerate(rows):
        l4[i] = -h_kk[r]
        l5[r, i] = 1.0
    return AuxTxCancellerRealization(
        l4=l4, l5=l5, c_ideal=l5 @ l4, rows=tuple(int(r) for r in rows)
    )


def realize_tap_canceller_rowwise(h_kk, n_taps):
    """Row-by-row tap placement.

    Rows are visited in descending Euclidean norm; within a row, taps go to
    the columns with the largest magnitudes first.
    """
    h_kk = np.asarray(h_kk)
    m_k, n_k = h_kk.shape
    if not 1 <= n_taps <= m_k * n_k:
        raise ParameterError(f"n_taps must lie in [1, {m_k * n_k}], got {n_taps}")
    positions = []
    for i in _descending_order(np.linalg.norm(h_kk, axis=1)):
        for j in _descending_order(np.abs(h_kk[i])):
            positions.append((int(i), int(j)))
    return tap_canceller_from_positions(h_kk, positions[:n_taps])


def realize_aux_canceller_largest_rows(h_kk, n_aux):
    """Connect the AUX chains to the ``n_aux`` RX antennas with most SI energy."""
    h_kk = np.asarray(h_kk)
    m_k = h_kk.shape[0]
    if not 1 <= n_aux <= m_k:
        raise ParameterError(f"n_aux must lie in [1, {m_k}], got {n_aux}")
    rows = _descending_order(np.linalg.norm(h_kk, axis=1))[:n_aux]
    return aux_canceller_from_rows(h_kk, rows)


def zero_canceller(architecture, m_k, n_k):
    """Canceller with no elements (C = 0)."""
    h = np.zeros((m_k, n_k), dtype=complex)
    if architecture == "taps":
        return tap_canceller_from_positions(h, [])
    return aux_canceller_from_rows(h, [])


def full_canceller(h_kk, architecture):
    """Conventional canceller: one tap per TX-RX pair, or one AUX chain per RX."""
    h_kk = np.asarray(h_kk)
    m_k, n_k = h_kk.shape
    if architecture == "taps":
        return realize_tap_canceller_rowwise(h_kk, m_k * n_k)
    return realize_aux_canceller_largest_rows(h_kk, m_k)


def heuristic_canceller(h_kk, architecture, n):
    h_kk = np.asarray(h_kk)
    if n == 0:
        return zero_canceller(architecture, *h_kk.shape)
    if architecture == "taps":
        return realize_tap_canceller_rowwise(h_kk, n)
    if architecture == "aux":
        return realize_aux_canceller_largest_rows(h_kk, n)
    raise ParameterError(f"unknown architecture {architecture!r}")


def enumerate_realization_count(architecture, m_k, n_k, n):
    """Number of distinct MUX/DEMUX placements: C(M_k N_k, N) or C(M_k, N)."""
    if architecture == "taps":
        total = m_k * n_k
    elif architecture == "aux":
        total = m_k
    else:
        raise ParameterError(f"unknown architecture {architecture!r}")
    if not 0 <= n <= total:
        raise ParameterError(f"n must lie in [0, {total}], got {n}")
    count = math.comb(total, n)
    if count > _MAX_COUNT:
        raise OverflowError(f"C({total}, {n}) exceeds the 64-bit realization counter")
    return count


def enumerate_realizations(h_kk, architecture, n, cap=10_000) -> Iterator[CancellerRealization]:
    """Yield canceller realizations, the row-wise heuristic one first.

    The remaining placements follow in lexicographic order.  At most ``cap``
    realizations are produced.
    """
    h_kk = np.asarray(h_kk)
    m_k, n_k = h_kk.shape
    first = heuristic_canceller(h_kk, architecture, n)
    yield first
    if n == 0 or cap <= 1:
        return
    total = enumerate_realization_count(architecture, m_k, n_k, n)
    if total > cap:
        logger.warning("truncating %d %s realizations to %d", total, architecture, cap)
    emitted = 1
    if architecture == "taps":
        seen = frozenset(first.positions)
        cells = [(i, j) for i in range(m_k) for j in range(n_k)]
        for combo in itertools.combinations(cells, n):
            if emitted >= cap:
                return
            if frozenset(combo) == seen:
                continue
            yield tap_canceller_from_positions(h_kk, combo)
            emitted += 1
    else:
        seen = frozenset(first.rows)
        for combo in itertools.combinations(range(m_k), n):
            if emitted >= cap:
                return
            if frozenset(combo) == seen:
                continue
            yield aux_canceller_from_rows(h_kk, combo)
            emitted += 1


def tap_gain_errors(n, params: ImpairmentParams, rng):
    """Multiplicative setting errors ``exp(j*a) * 10**(b/20)`` of ``n`` taps.

    ``a`` and ``b`` are uniform on the configured symmetric intervals and are
    drawn tap by tap, so a prefix of taps always sees the same errors.
    """
    u = rng.uniform(-1.0, 1.0, size=(n, 2))
    phase = params.tap_phase_err_max_rad * u[:, 0]
    mag_db = params.tap_mag_err_max_db * u[:, 1]
    return np.exp(1j * phase) * 10.0 ** (mag_db / 20.0)


def draw_oscillator_phases(n_aux, n_k, params: ImpairmentParams, rng):
    """Phase noise of the ``n_aux`` AUX chains and ``n_k`` TX chains.

    TX phases are drawn first so cancellers of different size share them.
    """
    sigma = params.aux_phase_jitter_std_rad
    phi_tx = sigma * rng.standard_normal(n_k)
    phi_aux = sigma * rng.standard_normal(n_aux)
    return phi_aux, phi_tx


def impair_tap_canceller(real: TapCancellerRealization, params: ImpairmentParams, rng):
    """Apply per-tap IID phase/magnitude setting errors (see :func:`tap_gain_errors`)."""
    gains = tap_gain_errors(real.n_elements, params, rng)
    l2_hat = np.diag(np.diag(real.l2) * gains)
    return dataclasses.replace(real, c_impaired=real.l3 @ l2_hat @ real.l1)


def phase_noise_mismatch(phi_aux, phi_tx):
    """``Phi[i, j] = exp(j*phi_aux[i]) - exp(j*phi_tx[j]) + 1``."""
    phi_aux = np.asarray(phi_aux, dtype=float)
    phi_tx = np.asarray(phi_tx, dtype=float)
    return np.exp(1j * phi_aux)[:, None] - np.exp(1j * phi_tx)[None, :] + 1.0


def impair_aux_canceller(real: AuxTxCancellerRealization, params: ImpairmentParams, rng, n_k=None):
    """Apply oscillator phase-noise mismatch between AUX and TX chains.

    ``L4`` becomes ``Phi * L4`` (entrywise) with ``Phi`` from
    :func:`phase_noise_mismatch`; independent oscillators are assumed.
    """
    if n_k is None:
        n_k = real.l4.shape[1]
    phi_aux, phi_tx = draw_oscillator_phases(real.n_elements, n_k, params, rng)
    l4_hat = phase_noise_mismatch(phi_aux, phi_tx) * real.l4
    return dataclasses.replace(real, c_impaired=real.l5 @ l4_hat)


def impair(real: CancellerRealization, params: ImpairmentParams, rng):
    if isinstance(real, TapCancellerRealization):
        return impair_tap_canceller(real, params, rng)
    return impair_aux_canceller(real, params, rng)


def hardware_reduction_percent(architecture, m_k, n_k, n):
    """Element saving against the conventional full canceller, in percent."""
    if architecture == "taps":
        return 100.0 * (1.0 - n / (m_k * n_k))
    if architecture == "aux":
        return 100.0 * (1.0 - n / m_k)
    raise ParameterError(f"unknown architecture {architecture!r}")
